#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "earlycorr/flow.hpp"

namespace earlycorr {

/// Unquantized inter-packet delays in seconds, at most `length` of them.
std::vector<double> flow_ipds(const Flow& flow, int length = 200);

/// Ranks starting at 1; tied values share the mean of their ranks.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Pearson correlation of average ranks over the common prefix of x and y.
/// Returns 0 when either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman correlation of the two flows' first min(valid) IPDs. Throws
/// TooShort when either flow has fewer than two packets.
double raptor_score(const Flow& entry, const Flow& exit, int length = 200);

struct ProjectionMatrix {
  int m = 0;
  int d = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd values;  // (m, d)

  /// Entries i.i.d. N(0, 1) / sqrt(m).
  static ProjectionMatrix gaussian(int m, int d, std::uint64_t seed);
  static ProjectionMatrix identity(int d);
};

/// Cosine similarity of the projected, zero-padded IPD vectors; 0 when a
/// projection vanishes. Throws ShapeMismatch when proj.d != length.
double cta_score(const Flow& entry, const Flow& exit, const ProjectionMatrix& proj,
                 int length = 200);

/// Inclusive threshold rule shared by both baselines.
inline bool baseline_decide(double score, double tau) { return score >= tau; }

}  // namespace earlycorr
