#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlycorr/features.hpp"
#include "earlycorr/model.hpp"

namespace earlycorr {

/// Dot product; both inputs are expected to be unit vectors.
template <typename S>
double cosine_similarity(const nn::Vec<S>& a, const nn::Vec<S>& b) {
  return static_cast<double>(a.dot(b));
}

struct WindowOptions {
  int k = 5;
  double width_frac = 1.0 / 3.0;
  int max_packets = 0;  // flows are cut to this many packets before windowing; 0 keeps all
  SampleOptions sample;
};

struct WindowSimilarities {
  std::string entry_id;
  std::string exit_id;
  std::vector<double> sims;
};

/// Embeddings of the k windows of one flow, (embedding_dim, k).
nn::Mat<float> window_embeddings(Model<float>& model, const Flow& flow, const WindowOptions& opts);

/// Index-matched window similarities of two embedding sets.
std::vector<double> window_similarities(const nn::Mat<float>& entry, const nn::Mat<float>& exit);

WindowSimilarities pair_similarities(const Flow& entry, const Flow& exit, Model<float>& model,
                                     const WindowOptions& opts = {});

/// Per-window Gaussian class conditionals of window similarity.
struct LikelihoodModel {
  std::vector<double> mu_corr, sigma_corr, mu_unc, sigma_unc;
  double prior_corr = 0.5;

  int windows() const { return static_cast<int>(mu_corr.size()); }
  nlohmann::json to_json() const;
  static LikelihoodModel from_json(const nlohmann::json& j);
};

inline constexpr double kSigmaFloor = 1e-4;

/// Maximum-likelihood fit per window and class. Needs at least two examples
/// of each class (InsufficientValidation).
LikelihoodModel fit_likelihoods(const std::vector<std::vector<double>>& sims,
                                const std::vector<bool>& correlated, double prior_corr);

/// Naive-Bayes posterior of the correlated class, evaluated in log space.
double bayes_posterior(const std::vector<double>& sims, const LikelihoodModel& model);
/// The same quantity from direct products of densities.
double bayes_posterior_linear(const std::vector<double>& sims, const LikelihoodModel& model);

struct Policy {
  enum class Kind { kBayes, kVote };
  Kind kind = Kind::kBayes;
  int m = 1;          // vote only
  double tau = 0.5;   // posterior threshold (bayes) or window threshold (vote)

  static Policy bayes(double tau) { return {Kind::kBayes, 1, tau}; }
  static Policy vote(int m, double tau_w) { return {Kind::kVote, m, tau_w}; }
  /// "bayes" or "vote:<m>"; tau is not part of the name.
  std::string name() const;
  static Policy parse(const std::string& s);
};

struct CorrelationDecision {
  WindowSimilarities pair;
  double posterior = 0.0;
  double tau = 0.0;
  bool correlated = false;
  Policy policy;
};

/// m-th largest window similarity; vote(m, t) fires iff this is >= t.
double vote_statistic(const std::vector<double>& sims, int m);

/// Throws InvalidPolicy for m outside [1, k] or a NaN threshold.
CorrelationDecision decide(const WindowSimilarities& sims, const LikelihoodModel& model,
                           const Policy& policy);

/// Threshold among the distinct scores maximizing TPR - FPR (scores >= tau
/// count as positive); ties go to the higher threshold. Throws
/// EmptyValidation without scores or without both classes.
double select_threshold(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Re-selects the threshold over every labeled score seen so far.
class DynamicThreshold {
 public:
  explicit DynamicThreshold(double initial) : tau_(initial) {}
  void observe(double score, bool correlated);
  double tau() const { return tau_; }

 private:
  std::vector<double> scores_;
  std::vector<bool> labels_;
  double tau_;
};

void write_decisions_csv(const std::vector<CorrelationDecision>& decisions,
                         const std::vector<bool>& truth, const std::filesystem::path& path);

}  // namespace earlycorr
