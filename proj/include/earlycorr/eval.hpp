#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace earlycorr {

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  void add(bool predicted, bool truth) {
    if (predicted) (truth ? tp : fp) += 1;
    else (truth ? fn : tn) += 1;
  }
  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Rates {
  double acc = 0.0, tpr = 0.0, fpr = 0.0;
};

/// Throws UndefinedRate naming the rate whose denominator is zero.
Rates metrics(const Confusion& c);

/// One test entry with its true exit and `n` decoys. Indices refer to the
/// test pair list: entry i's true exit is exit i.
struct CandidateSet {
  std::size_t entry = 0;
  std::vector<std::size_t> exits;  // true exit first, then decoys
};

/// Decoys are drawn uniformly without replacement from the other exits.
/// Throws InsufficientDecoys when n_test <= n_neg.
std::vector<CandidateSet> build_candidate_sets(std::size_t n_test, int n_neg, std::uint64_t seed);

struct RocPoint {
  double tau = 0.0, tpr = 0.0, fpr = 0.0;
};

/// One point per distinct score (scores >= tau are positive), preceded by a
/// (0,0) anchor at tau = +inf and closed by (1,1). Throws DegenerateLabels
/// without both classes.
std::vector<RocPoint> roc_sweep(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Trapezoidal area under an roc_sweep curve.
double roc_auc(const std::vector<RocPoint>& curve);

void write_roc_csv(const std::vector<RocPoint>& curve, const std::filesystem::path& path);

}  // namespace earlycorr
