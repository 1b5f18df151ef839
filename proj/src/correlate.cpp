#include "earlycorr/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "earlycorr/error.hpp"

namespace earlycorr {

using nlohmann::json;
using nn::Mat;

nn::Mat<float> window_embeddings(Model<float>& model, const Flow& flow, const WindowOptions& opts) {
  auto samples = window_samples(flow, opts.max_packets, opts.k, opts.width_frac, opts.sample);
  return embed_all(model, samples);
}

std::vector<double> window_similarities(const Mat<float>& entry, const Mat<float>& exit) {
  if (entry.rows() != exit.rows() || entry.cols() != exit.cols())
    throw ShapeMismatch("window embedding sets differ in shape");
  std::vector<double> sims(static_cast<std::size_t>(entry.cols()));
  for (Eigen::Index i = 0; i < entry.cols(); ++i)
    sims[i] = static_cast<double>(entry.col(i).dot(exit.col(i)));
  return sims;
}

WindowSimilarities pair_similarities(const Flow& entry, const Flow& exit, Model<float>& model,
                                     const WindowOptions& opts) {
  WindowSimilarities out;
  out.entry_id = entry.flow_id;
  out.exit_id = exit.flow_id;
  out.sims = window_similarities(window_embeddings(model, entry, opts),
                                 window_embeddings(model, exit, opts));
  return out;
}

// ---------------------------------------------------------------- likelihoods

json LikelihoodModel::to_json() const {
  return {{"mu_corr", mu_corr}, {"sigma_corr", sigma_corr}, {"mu_unc", mu_unc},
          {"sigma_unc", sigma_unc}, {"prior_corr", prior_corr}};
}

LikelihoodModel LikelihoodModel::from_json(const json& j) {
  LikelihoodModel m;
  try {
    j.at("mu_corr").get_to(m.mu_corr);
    j.at("sigma_corr").get_to(m.sigma_corr);
    j.at("mu_unc").get_to(m.mu_unc);
    j.at("sigma_unc").get_to(m.sigma_unc);
    m.prior_corr = j.at("prior_corr").get<double>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("likelihood model: ") + e.what());
  }
  const std::size_t k = m.mu_corr.size();
  if (m.sigma_corr.size() != k || m.mu_unc.size() != k || m.sigma_unc.size() != k)
    throw InvalidConfig("likelihood model arrays differ in length");
  return m;
}

LikelihoodModel fit_likelihoods(const std::vector<std::vector<double>>& sims,
                                const std::vector<bool>& correlated, double prior_corr) {
  if (sims.size() != correlated.size())
    throw ShapeMismatch("similarities and labels differ in count");
  if (!(prior_corr >= 0.0 && prior_corr <= 1.0))
    throw InvalidConfig("prior must be in [0,1]");
  std::size_t n_corr = std::count(correlated.begin(), correlated.end(), true);
  std::size_t n_unc = correlated.size() - n_corr;
  if (n_corr < 2 || n_unc < 2)
    throw InsufficientValidation("need at least 2 correlated and 2 uncorrelated examples, got " +
                                 std::to_string(n_corr) + " and " + std::to_string(n_unc));
  const std::size_t k = sims.front().size();
  for (const auto& s : sims)
    if (s.size() != k) throw ShapeMismatch("window similarity vectors differ in length");

  LikelihoodModel m;
  m.prior_corr = prior_corr;
  for (std::size_t w = 0; w < k; ++w) {
    for (bool cls : {true, false}) {
      double sum = 0.0, n = 0.0;
      for (std::size_t i = 0; i < sims.size(); ++i)
        if (correlated[i] == cls) {
          sum += sims[i][w];
          n += 1.0;
        }
      const double mu = sum / n;
      double ss = 0.0;
      for (std::size_t i = 0; i < sims.size(); ++i)
        if (correlated[i] == cls) ss += (sims[i][w] - mu) * (sims[i][w] - mu);
      const double sigma = std::max(std::sqrt(ss / n), kSigmaFloor);
      (cls ? m.mu_corr : m.mu_unc).push_back(mu);
      (cls ? m.sigma_corr : m.sigma_unc).push_back(sigma);
    }
  }
  return m;
}

namespace {

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

void check_windows(const std::vector<double>& sims, const LikelihoodModel& model) {
  if (static_cast<int>(sims.size()) != model.windows())
    throw ShapeMismatch("expected " + std::to_string(model.windows()) + " window similarities, got " +
                        std::to_string(sims.size()));
}

}  // namespace

double bayes_posterior(const std::vector<double>& sims, const LikelihoodModel& model) {
  check_windows(sims, model);
  double lc = std::log(model.prior_corr);
  double lu = std::log1p(-model.prior_corr);
  for (std::size_t i = 0; i < sims.size(); ++i) {
    lc += log_normal_pdf(sims[i], model.mu_corr[i], model.sigma_corr[i]);
    lu += log_normal_pdf(sims[i], model.mu_unc[i], model.sigma_unc[i]);
  }
  if (std::isinf(lc) && lc < 0) return 0.0;
  if (std::isinf(lu) && lu < 0) return 1.0;
  // 1 / (1 + exp(lu - lc)), written to avoid overflow either way.
  const double d = lu - lc;
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

double bayes_posterior_linear(const std::vector<double>& sims, const LikelihoodModel& model) {
  check_windows(sims, model);
  double pc = model.prior_corr, pu = 1.0 - model.prior_corr;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    pc *= std::exp(log_normal_pdf(sims[i], model.mu_corr[i], model.sigma_corr[i]));
    pu *= std::exp(log_normal_pdf(sims[i], model.mu_unc[i], model.sigma_unc[i]));
  }
  return pc / (pc + pu);
}

// ---------------------------------------------------------------- decisions

std::string Policy::name() const {
  return kind == Kind::kBayes ? "bayes" : "vote:" + std::to_string(m);
}

Policy Policy::parse(const std::string& s) {
  if (s == "bayes") return bayes(0.5);
  if (s.rfind("vote:", 0) == 0) {
    try {
      std::size_t used = 0;
      int m = std::stoi(s.substr(5), &used);
      if (used == s.size() - 5) return vote(m, 0.5);
    } catch (const std::exception&) {
    }
  }
  throw InvalidPolicy("unknown policy '" + s + "' (expected bayes or vote:<m>)");
}

double vote_statistic(const std::vector<double>& sims, int m) {
  if (m < 1 || m > static_cast<int>(sims.size()))
    throw InvalidPolicy("vote count " + std::to_string(m) + " outside [1, " +
                        std::to_string(sims.size()) + "]");
  std::vector<double> sorted = sims;
  std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end(), std::greater<>());
  return sorted[m - 1];
}

CorrelationDecision decide(const WindowSimilarities& sims, const LikelihoodModel& model,
                           const Policy& policy) {
  if (std::isnan(policy.tau)) throw InvalidPolicy("threshold is NaN");
  CorrelationDecision d;
  d.pair = sims;
  d.policy = policy;
  d.tau = policy.tau;
  d.posterior = bayes_posterior(sims.sims, model);
  if (policy.kind == Policy::Kind::kBayes) {
    d.correlated = d.posterior >= policy.tau;
  } else {
    d.correlated = vote_statistic(sims.sims, policy.m) >= policy.tau;
  }
  return d;
}

double select_threshold(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.empty()) throw EmptyValidation("no validation scores");
  if (scores.size() != labels.size()) throw ShapeMismatch("scores and labels differ in count");
  const std::int64_t P = std::count(labels.begin(), labels.end(), true);
  const std::int64_t N = static_cast<std::int64_t>(labels.size()) - P;
  if (P == 0 || N == 0) throw EmptyValidation("validation needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Descending sweep; at each distinct value count everything >= it. J is
  // compared as tp*N - fp*P to keep ties exact.
  std::int64_t tp = 0, fp = 0;
  std::int64_t best_j = 0;
  double best_tau = 0.0;
  bool have = false;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const std::int64_t j = tp * N - fp * P;
    if (!have || j > best_j) {
      best_j = j;
      best_tau = v;
      have = true;
    }
  }
  return best_tau;
}

void DynamicThreshold::observe(double score, bool correlated) {
  scores_.push_back(score);
  labels_.push_back(correlated);
  bool pos = false, neg = false;
  for (bool l : labels_) (l ? pos : neg) = true;
  if (pos && neg) tau_ = select_threshold(scores_, labels_);
}

void write_decisions_csv(const std::vector<CorrelationDecision>& decisions,
                         const std::vector<bool>& truth, const std::filesystem::path& path) {
  if (truth.size() != decisions.size()) throw ShapeMismatch("truth labels differ in count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::size_t k = decisions.empty() ? 0 : decisions.front().pair.sims.size();
  out << "entry_id,exit_id";
  for (std::size_t i = 0; i < k; ++i) out << ",sim" << i;
  out << ",posterior,tau,label,truth\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (std::size_t r = 0; r < decisions.size(); ++r) {
    const auto& d = decisions[r];
    out << d.pair.entry_id << ',' << d.pair.exit_id;
    for (double s : d.pair.sims) out << ',' << num(s);
    out << ',' << num(d.posterior) << ',' << num(d.tau) << ','
        << (d.correlated ? "correlated" : "uncorrelated") << ','
        << (truth[r] ? "correlated" : "uncorrelated") << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace earlycorr
