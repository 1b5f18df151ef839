#include "earlycorr/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

using nlohmann::json;
using nn::Mat;

const char* to_string(Mining m) { return m == Mining::kRandom ? "random" : "semi_hard"; }

Mining mining_from_string(const std::string& s) {
  if (s == "random") return Mining::kRandom;
  if (s == "semi_hard") return Mining::kSemiHard;
  throw InvalidConfig("unknown mining strategy '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw InvalidConfig("batch_size must be >= 2");
  if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (!(margin > 0.0)) throw InvalidConfig("margin must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw InvalidConfig("val_fraction must be in [0,1)");
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},       {"epochs", epochs},
          {"learning_rate", learning_rate}, {"margin", margin},
          {"mining", to_string(mining)},    {"val_fraction", val_fraction},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("margin")) c.margin = j.at("margin").get<double>();
    if (j.contains("mining")) c.mining = mining_from_string(j.at("mining").get<std::string>());
    if (j.contains("val_fraction")) c.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double triplet_loss(const nn::Vec<double>& a, const nn::Vec<double>& p, const nn::Vec<double>& n,
                    double margin) {
  return std::max(0.0, cosine_distance(a, p) - cosine_distance(a, n) + margin);
}

std::vector<TripletIndex> sample_triplets(const Mat<float>& anchors, const Mat<float>& positives,
                                          const std::vector<std::string>& pair_ids,
                                          Mining mining, Rng& rng) {
  const int B = static_cast<int>(pair_ids.size());
  if (anchors.cols() != B || positives.cols() != B)
    throw ShapeMismatch("embedding columns do not match the batch pair ids");
  if (std::set<std::string>(pair_ids.begin(), pair_ids.end()).size() < 2)
    throw InsufficientPairs("a batch needs at least two distinct pair ids");

  std::vector<TripletIndex> out;
  out.reserve(B);
  std::vector<int> candidates;
  for (int i = 0; i < B; ++i) {
    candidates.clear();
    for (int j = 0; j < B; ++j)
      if (pair_ids[j] != pair_ids[i]) candidates.push_back(j);
    int chosen = -1;
    if (mining == Mining::kRandom) {
      chosen = candidates[rng.uniform_int(candidates.size())];
    } else {
      const double dap = 1.0 - static_cast<double>(anchors.col(i).dot(positives.col(i)));
      int semi = -1, hardest = -1;
      double semi_d = 0.0, hard_d = 0.0;
      for (int j : candidates) {
        double dan = 1.0 - static_cast<double>(anchors.col(i).dot(positives.col(j)));
        if (dan > dap && (semi < 0 || dan < semi_d)) {
          semi = j;
          semi_d = dan;
        }
        if (hardest < 0 || dan < hard_d) {
          hardest = j;
          hard_d = dan;
        }
      }
      chosen = semi >= 0 ? semi : hardest;
    }
    out.push_back({i, i, chosen});
  }
  return out;
}

template <typename S>
double batch_triplet_loss(const Mat<S>& anchors, const Mat<S>& positives,
                          const std::vector<TripletIndex>& triplets, double margin,
                          Mat<S>* d_anchors, Mat<S>* d_positives) {
  if (d_anchors) d_anchors->setZero(anchors.rows(), anchors.cols());
  if (d_positives) d_positives->setZero(positives.rows(), positives.cols());
  if (triplets.empty()) return 0.0;
  const S scale = S(1) / static_cast<S>(triplets.size());
  double total = 0.0;
  for (const auto& t : triplets) {
    auto a = anchors.col(t.anchor);
    auto p = positives.col(t.positive);
    auto n = positives.col(t.negative);
    double l = static_cast<double>(a.dot(n)) - static_cast<double>(a.dot(p)) + margin;
    if (!(l > 0.0)) {
      if (std::isnan(l)) total = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    total += l;
    if (d_anchors) d_anchors->col(t.anchor) += (n - p) * scale;
    if (d_positives) {
      d_positives->col(t.positive) -= a * scale;
      d_positives->col(t.negative) += a * scale;
    }
  }
  return total / static_cast<double>(triplets.size());
}

template double batch_triplet_loss<float>(const Mat<float>&, const Mat<float>&,
                                          const std::vector<TripletIndex>&, double, Mat<float>*,
                                          Mat<float>*);
template double batch_triplet_loss<double>(const Mat<double>&, const Mat<double>&,
                                           const std::vector<TripletIndex>&, double,
                                           Mat<double>*, Mat<double>*);

namespace {

/// [start, end) chunks of at most `size`; a trailing single element joins the
/// previous chunk so every chunk can host a negative.
std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += size) out.emplace_back(s, std::min(n, s + size));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

struct Choice {
  std::size_t pair;
  std::size_t variant;
  std::size_t window;
};

/// Embeds anchors and positives of the chosen windows as one batch.
Mat<float> forward_pairs(Model<float>& model, const std::vector<TrainPair>& pairs,
                         const std::vector<Choice>& choices, bool train, Rng& rng,
                         std::vector<std::string>& ids) {
  std::vector<const MultiViewSample*> ptrs;
  ptrs.reserve(2 * choices.size());
  ids.clear();
  for (const auto& c : choices) {
    ptrs.push_back(&pairs[c.pair].entry[c.variant][c.window]);
    ids.push_back(pairs[c.pair].pair_id);
  }
  for (const auto& c : choices) ptrs.push_back(&pairs[c.pair].exit[c.variant][c.window]);
  Batch<float> batch = make_batch<float>(ptrs, model.config());
  return model.forward(batch, train, rng);
}

Choice random_choice(const std::vector<TrainPair>& pairs, std::size_t idx, Rng& rng) {
  const auto& p = pairs[idx];
  if (p.entry.empty() || p.entry.size() != p.exit.size())
    throw InvalidConfig("training pair '" + p.pair_id + "' has mismatched variants");
  std::size_t v = rng.uniform_int(p.entry.size());
  if (p.entry[v].empty() || p.entry[v].size() != p.exit[v].size())
    throw InvalidConfig("training pair '" + p.pair_id + "' has mismatched windows");
  std::size_t w = rng.uniform_int(p.entry[v].size());
  return {idx, v, w};
}

double validation_loss(Model<float>& model, const std::vector<TrainPair>& val,
                       const std::vector<Choice>& choices, const TrainConfig& cfg) {
  if (val.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  std::size_t count = 0;
  Rng dummy(0);
  std::vector<std::string> ids;
  std::size_t chunk_index = 0;
  for (auto [s, e] : chunks(choices.size(), static_cast<std::size_t>(cfg.batch_size))) {
    std::vector<Choice> part(choices.begin() + s, choices.begin() + e);
    Mat<float> emb = forward_pairs(model, val, part, false, dummy, ids);
    const Eigen::Index B = static_cast<Eigen::Index>(part.size());
    Mat<float> a = emb.leftCols(B), p = emb.rightCols(B);
    Rng mine(derive_seed(cfg.seed, 302, chunk_index++));
    auto triplets = sample_triplets(a, p, ids, cfg.mining, mine);
    total += batch_triplet_loss<float>(a, p, triplets, cfg.margin) * part.size();
    count += part.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace

FitResult fit(Model<float>& model, const std::vector<TrainPair>& train,
              const std::vector<TrainPair>& val, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() < 2) throw InsufficientPairs("training needs at least two pairs");

  auto params = model.params();
  nn::Adam<float> adam(params, cfg.learning_rate);

  std::vector<Choice> val_choices;
  {
    Rng r(derive_seed(cfg.seed, 301));
    for (std::size_t i = 0; i < val.size(); ++i) val_choices.push_back(random_choice(val, i, r));
  }

  FitResult result;
  std::vector<Mat<float>> best;
  auto snapshot = [&] {
    best.clear();
    for (auto* p : params) best.push_back(p->value);
  };

  EpochLog init;
  init.epoch = 0;
  init.mean_loss = std::numeric_limits<double>::quiet_NaN();
  init.val_loss = validation_loss(model, val, val_choices, cfg);
  result.log.push_back(init);
  result.best_epoch = 0;
  result.best_val_loss = init.val_loss;
  snapshot();
  if (on_epoch) on_epoch(init);

  std::vector<std::string> ids;
  Mat<float> da, dp, d_embed;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    Rng er(derive_seed(cfg.seed, 201, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[er.uniform_int(i)]);
    std::vector<Choice> choices;
    choices.reserve(order.size());
    for (std::size_t idx : order) choices.push_back(random_choice(train, idx, er));

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t batch_index = 0;
    for (auto [s, e] : chunks(choices.size(), static_cast<std::size_t>(cfg.batch_size))) {
      std::vector<Choice> part(choices.begin() + s, choices.begin() + e);
      const std::uint64_t key = static_cast<std::uint64_t>(epoch) * 1000003ULL + batch_index;
      Rng drop(derive_seed(cfg.seed, 203, key));
      Rng mine(derive_seed(cfg.seed, 204, key));
      model.zero_grad();
      Mat<float> emb = forward_pairs(model, train, part, true, drop, ids);
      const Eigen::Index B = static_cast<Eigen::Index>(part.size());
      Mat<float> a = emb.leftCols(B), p = emb.rightCols(B);
      auto triplets = sample_triplets(a, p, ids, cfg.mining, mine);
      double loss = batch_triplet_loss<float>(a, p, triplets, cfg.margin, &da, &dp);
      if (!std::isfinite(loss))
        throw Divergence("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_index));
      d_embed.resize(emb.rows(), emb.cols());
      d_embed.leftCols(B) = da;
      d_embed.rightCols(B) = dp;
      model.backward(d_embed);
      adam.step();
      loss_sum += loss * part.size();
      loss_count += part.size();
      ++batch_index;
    }

    EpochLog row;
    row.epoch = epoch;
    row.mean_loss = loss_sum / static_cast<double>(loss_count);
    row.val_loss = validation_loss(model, val, val_choices, cfg);
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.log.push_back(row);
    // Without validation pairs the latest epoch wins.
    bool better = std::isnan(row.val_loss) || row.val_loss < result.best_val_loss;
    if (better) {
      result.best_epoch = epoch;
      result.best_val_loss = row.val_loss;
      snapshot();
    }
    if (on_epoch) on_epoch(row);
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return result;
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,mean_loss,val_loss\n";
  char buf[128];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", row.epoch, row.mean_loss, row.val_loss);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace earlycorr
