#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlycorr/model.hpp"

namespace earlycorr {

enum class Mining { kRandom, kSemiHard };

const char* to_string(Mining m);
Mining mining_from_string(const std::string& s);

struct TrainConfig {
  int batch_size = 64;
  int epochs = 30;
  double learning_rate = 0.001;
  double margin = 0.5;
  Mining mining = Mining::kSemiHard;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// 1 - a.b for unit vectors.
template <typename S>
S cosine_distance(const nn::Vec<S>& a, const nn::Vec<S>& b) {
  return S(1) - a.dot(b);
}

/// max(0, d(a,p) - d(a,n) + margin).
double triplet_loss(const nn::Vec<double>& a, const nn::Vec<double>& p, const nn::Vec<double>& n,
                    double margin);

/// Column indices of a triplet inside a batch: the anchor is entry column
/// `anchor`, the positive and negative are exit columns.
struct TripletIndex {
  int anchor = 0;
  int positive = 0;
  int negative = 0;
  bool operator==(const TripletIndex&) const = default;
};

/// One triplet per batch pair, negatives drawn from the other pairs' exits.
/// Throws InsufficientPairs with fewer than two distinct pair ids.
std::vector<TripletIndex> sample_triplets(const nn::Mat<float>& anchors,
                                          const nn::Mat<float>& positives,
                                          const std::vector<std::string>& pair_ids,
                                          Mining mining, Rng& rng);

/// Mean triplet loss over `triplets`; when d_anchors/d_positives are given
/// they receive the gradient w.r.t. the anchor/exit embedding columns.
template <typename S>
double batch_triplet_loss(const nn::Mat<S>& anchors, const nn::Mat<S>& positives,
                          const std::vector<TripletIndex>& triplets, double margin,
                          nn::Mat<S>* d_anchors = nullptr, nn::Mat<S>* d_positives = nullptr);

/// Window samples of one entry/exit pair. entry[v] and exit[v] hold the k
/// window samples of variant v (one variant per flow truncation length).
struct TrainPair {
  std::string pair_id;
  std::vector<std::vector<MultiViewSample>> entry;
  std::vector<std::vector<MultiViewSample>> exit;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;  // NaN for the pre-training row
  double val_loss = 0.0;   // NaN without validation pairs
  double seconds = 0.0;
};

struct FitResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `model` in place with Adam and leaves it holding the parameters of
/// the epoch with the lowest validation loss (epoch 0 = initialization). Each
/// epoch picks one random variant and window per training pair. Throws
/// Divergence on a non-finite loss and InsufficientPairs for fewer than two
/// training pairs.
FitResult fit(Model<float>& model, const std::vector<TrainPair>& train,
              const std::vector<TrainPair>& val, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace earlycorr
