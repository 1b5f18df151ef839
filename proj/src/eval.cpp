#include "earlycorr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

Rates metrics(const Confusion& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw InvalidConfig("confusion counts must be non-negative");
  if (c.tp + c.fn == 0) throw UndefinedRate("tpr: no positive pairs");
  if (c.fp + c.tn == 0) throw UndefinedRate("fpr: no negative pairs");
  Rates r;
  r.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  r.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  return r;
}

std::vector<CandidateSet> build_candidate_sets(std::size_t n_test, int n_neg, std::uint64_t seed) {
  if (n_neg < 1) throw InvalidConfig("negative sample number must be >= 1");
  if (n_test <= static_cast<std::size_t>(n_neg))
    throw InsufficientDecoys("need more than " + std::to_string(n_neg) + " test exits, have " +
                             std::to_string(n_test));
  std::vector<CandidateSet> out(n_test);
  std::vector<std::size_t> pool(n_test - 1);
  for (std::size_t i = 0; i < n_test; ++i) {
    Rng rng(derive_seed(seed, 501, i));
    std::size_t w = 0;
    for (std::size_t j = 0; j < n_test; ++j)
      if (j != i) pool[w++] = j;
    // Partial Fisher-Yates: the first n_neg slots become the sample.
    for (std::size_t s = 0; s < static_cast<std::size_t>(n_neg); ++s) {
      std::size_t pick = s + rng.uniform_int(pool.size() - s);
      std::swap(pool[s], pool[pick]);
    }
    out[i].entry = i;
    out[i].exits.reserve(n_neg + 1);
    out[i].exits.push_back(i);
    out[i].exits.insert(out[i].exits.end(), pool.begin(), pool.begin() + n_neg);
  }
  return out;
}

std::vector<RocPoint> roc_sweep(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ShapeMismatch("scores and labels differ in count");
  const auto P = static_cast<std::int64_t>(std::count(labels.begin(), labels.end(), true));
  const auto N = static_cast<std::int64_t>(labels.size()) - P;
  if (P == 0 || N == 0) throw DegenerateLabels("ROC needs both positive and negative pairs");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.push_back({v, static_cast<double>(tp) / P, static_cast<double>(fp) / N});
  }
  if (curve.back().tpr != 1.0 || curve.back().fpr != 1.0)
    curve.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  return curve;
}

double roc_auc(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  return area;
}

void write_roc_csv(const std::vector<RocPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "tau,tpr,fpr\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", p.tau, p.tpr, p.fpr);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace earlycorr
