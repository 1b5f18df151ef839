#include "earlycorr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

std::vector<double> flow_ipds(const Flow& flow, int length) {
  std::vector<double> out;
  const std::size_t n = flow.packets.size() < 2 ? 0 : flow.packets.size() - 1;
  out.reserve(std::min<std::size_t>(n, static_cast<std::size_t>(length)));
  for (std::size_t i = 0; i < n && static_cast<int>(i) < length; ++i)
    out.push_back(flow.packets[i + 1].timestamp - flow.packets[i].timestamp);
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  auto rx = average_ranks(std::vector<double>(x.begin(), x.begin() + n));
  auto ry = average_ranks(std::vector<double>(y.begin(), y.begin() + n));
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double raptor_score(const Flow& entry, const Flow& exit, int length) {
  if (entry.packets.size() < 2 || exit.packets.size() < 2)
    throw TooShort("spearman scoring needs at least 2 packets per flow");
  return spearman(flow_ipds(entry, length), flow_ipds(exit, length));
}

ProjectionMatrix ProjectionMatrix::gaussian(int m, int d, std::uint64_t seed) {
  if (m <= 0 || d <= 0) throw InvalidConfig("projection dimensions must be positive");
  ProjectionMatrix p;
  p.m = m;
  p.d = d;
  p.seed = seed;
  p.values.resize(m, d);
  Rng rng(derive_seed(seed, 401));
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < m; ++i) p.values(i, j) = rng.normal() * scale;
  return p;
}

ProjectionMatrix ProjectionMatrix::identity(int d) {
  ProjectionMatrix p;
  p.m = d;
  p.d = d;
  p.values = Eigen::MatrixXd::Identity(d, d);
  return p;
}

double cta_score(const Flow& entry, const Flow& exit, const ProjectionMatrix& proj, int length) {
  if (proj.d != length || proj.values.cols() != length)
    throw ShapeMismatch("projection expects " + std::to_string(proj.d) +
                        " inputs, sequences have " + std::to_string(length));
  auto padded = [&](const Flow& f) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(length);
    auto ipds = flow_ipds(f, length);
    for (std::size_t i = 0; i < ipds.size(); ++i) v(static_cast<Eigen::Index>(i)) = ipds[i];
    return v;
  };
  Eigen::VectorXd a = proj.values * padded(entry);
  Eigen::VectorXd b = proj.values * padded(exit);
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace earlycorr
