#include "earlycorr/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "earlycorr/baselines.hpp"
#include "earlycorr/checkpoint.hpp"
#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ViewSpec {
  EmbedMode mode = EmbedMode::kFull;
  SecondView second;
};

ViewSpec parse_view(const std::string& v) {
  ViewSpec spec;
  if (v == "raw+ipd") return spec;
  if (v == "raw") {
    spec.mode = EmbedMode::kRawOnly;
    return spec;
  }
  if (v == "ipd") {
    spec.mode = EmbedMode::kIpdOnly;
    return spec;
  }
  if (v.rfind("hdr:", 0) == 0) {
    spec.second = SecondView::parse(v);
    return spec;
  }
  throw InvalidConfig("unknown view '" + v + "' (expected raw+ipd, raw, ipd or hdr:<kind>)");
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
  return out;
}

char metric_buf[256];

}  // namespace

// ---------------------------------------------------------------- config

json windows_to_json(const WindowOptions& w) {
  return {{"k", w.k},
          {"width_frac", w.width_frac},
          {"max_packets", w.max_packets},
          {"n_packets", w.sample.n_packets},
          {"n_bytes", w.sample.n_bytes},
          {"seq_length", w.sample.seq_length},
          {"quantum_ms", w.sample.quantum_ms},
          {"vocab", w.sample.vocab},
          {"second_view", w.sample.second_view.name()}};
}

WindowOptions windows_from_json(const json& j) {
  if (!j.is_object()) throw InvalidConfig("window options must be a JSON object");
  WindowOptions w;
  if (j.contains("k")) w.k = j.at("k").get<int>();
  if (j.contains("width_frac")) w.width_frac = j.at("width_frac").get<double>();
  if (j.contains("max_packets")) w.max_packets = j.at("max_packets").get<int>();
  if (j.contains("n_packets")) w.sample.n_packets = j.at("n_packets").get<int>();
  if (j.contains("n_bytes")) w.sample.n_bytes = j.at("n_bytes").get<int>();
  if (j.contains("seq_length")) w.sample.seq_length = j.at("seq_length").get<int>();
  if (j.contains("quantum_ms")) w.sample.quantum_ms = j.at("quantum_ms").get<double>();
  if (j.contains("vocab")) w.sample.vocab = j.at("vocab").get<std::int32_t>();
  if (j.contains("second_view"))
    w.sample.second_view = SecondView::parse(j.at("second_view").get<std::string>());
  return w;
}


void ExperimentConfig::validate() const {
  static const std::set<std::string> known{"early_mfc", "early_mfc_plus", "raptor", "cta"};
  if (methods.empty()) throw InvalidConfig("methods must not be empty");
  for (const auto& m : methods)
    if (!known.count(m)) throw InvalidConfig("unknown method '" + m + "'");
  for (const auto& v : views) parse_view(v);
  if (n_neg.empty()) throw InvalidConfig("n_neg must not be empty");
  for (int n : n_neg)
    if (n < 1) throw InvalidConfig("negative sample numbers must be >= 1");
  for (int n : plus_packet_counts)
    if (n < 2) throw InvalidConfig("plus packet counts must be >= 2");
  if (policies.empty()) throw InvalidConfig("policies must not be empty");
  for (const auto& p : policies) {
    Policy pol = Policy::parse(p);
    if (pol.kind == Policy::Kind::kVote && (pol.m < 1 || pol.m > windows.k))
      throw InvalidPolicy("vote count in '" + p + "' outside [1, " + std::to_string(windows.k) + "]");
  }
  if (windows.k < 1) throw InvalidConfig("window count must be >= 1");
  if (!(windows.width_frac > 0.0 && windows.width_frac <= 1.0))
    throw InvalidConfig("window width fraction must be in (0, 1]");
  if (windows.sample.n_packets != model.raw_packets || windows.sample.n_bytes != model.raw_bytes ||
      windows.sample.seq_length != model.seq_length || windows.sample.vocab != model.vocab)
    throw InvalidConfig("window sample options disagree with the model input shape");
  if (cta_dim < 1) throw InvalidConfig("cta_dim must be >= 1");
  if (baseline_length < 2) throw InvalidConfig("baseline_length must be >= 2");
  if (windows.max_packets < 0) throw InvalidConfig("window max_packets must be >= 0");
  model.validate();
  train.validate();
  if (data_dir.empty()) synth.validate();
}

json ExperimentConfig::to_json() const {
  return {{"data_dir", data_dir.string()},
          {"synth", synth.to_json()},
          {"out_dir", out_dir.string()},
          {"methods", methods},
          {"views", views},
          {"n_neg", n_neg},
          {"plus_packet_counts", plus_packet_counts},
          {"policies", policies},
          {"model", model.to_json()},
          {"train", train.to_json()},
          {"windows", windows_to_json(windows)},
          {"cta_dim", cta_dim},
          {"baseline_length", baseline_length},
          {"seed", seed},
          {"reuse_checkpoints", reuse_checkpoints}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  static const std::set<std::string> keys{
      "data_dir", "synth",   "out_dir", "methods", "views",   "n_neg",   "plus_packet_counts",
      "policies", "model",   "train",   "windows", "cta_dim", "seed",    "reuse_checkpoints", "baseline_length"};
  if (!j.is_object()) throw InvalidConfig("experiment config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw InvalidConfig("unknown experiment config key '" + it.key() + "'");
  ExperimentConfig c;
  try {
    if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("synth")) c.synth = SynthConfig::from_json(j.at("synth"));
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("methods")) j.at("methods").get_to(c.methods);
    if (j.contains("views")) j.at("views").get_to(c.views);
    if (j.contains("n_neg")) j.at("n_neg").get_to(c.n_neg);
    if (j.contains("plus_packet_counts")) j.at("plus_packet_counts").get_to(c.plus_packet_counts);
    if (j.contains("policies")) j.at("policies").get_to(c.policies);
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("windows")) c.windows = windows_from_json(j.at("windows"));
    if (j.contains("cta_dim")) c.cta_dim = j.at("cta_dim").get<int>();
    if (j.contains("baseline_length")) c.baseline_length = j.at("baseline_length").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("reuse_checkpoints")) c.reuse_checkpoints = j.at("reuse_checkpoints").get<bool>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("experiment config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- output

std::string format_metric_row(const MetricRow& r) {
  std::snprintf(metric_buf, sizeof metric_buf, "%s,%s,%d,%s,%.6f,%.6f,%.6f,%.9g", r.method.c_str(),
                r.view.c_str(), r.n_neg, r.policy.c_str(), r.rates.acc, r.rates.tpr, r.rates.fpr,
                r.tau);
  return metric_buf;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_metric_row(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------- data helpers

void split_validation(const std::vector<std::string>& train_ids, double fraction, std::uint64_t seed,
                      std::vector<std::string>& fit, std::vector<std::string>& val) {
  std::vector<std::string> ids = train_ids;
  Rng rng(derive_seed(seed, 701));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_int(i)]);
  const auto nval = static_cast<std::size_t>(fraction * static_cast<double>(ids.size()));
  val.assign(ids.begin(), ids.begin() + nval);
  fit.assign(ids.begin() + nval, ids.end());
}

std::vector<std::pair<const Flow*, const Flow*>> pair_flows(const std::vector<Flow>& flows,
                                                            const std::vector<std::string>& ids) {
  std::map<std::string, std::pair<const Flow*, const Flow*>> by_id;
  for (const auto& f : flows) {
    if (!f.pair_id) continue;
    auto& slot = by_id[*f.pair_id];
    if (f.role == FlowRole::kEntry) slot.first = &f;
    if (f.role == FlowRole::kExit) slot.second = &f;
  }
  std::vector<std::pair<const Flow*, const Flow*>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end() || !it->second.first || !it->second.second)
      throw InvalidConfig("pair '" + id + "' lacks an entry or exit flow");
    out.push_back(it->second);
  }
  return out;
}

std::vector<TrainPair> build_train_pairs(const std::vector<std::pair<const Flow*, const Flow*>>& pairs,
                                         const std::vector<int>& max_packets,
                                         const WindowOptions& windows) {
  std::vector<TrainPair> out(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    TrainPair& tp = out[i];
    tp.pair_id = pairs[i].first->pair_id.value_or(pairs[i].first->flow_id);
    for (int n : max_packets) {
      tp.entry.push_back(
          window_samples(*pairs[i].first, n, windows.k, windows.width_frac, windows.sample));
      tp.exit.push_back(
          window_samples(*pairs[i].second, n, windows.k, windows.width_frac, windows.sample));
    }
  }
  return out;
}

// ---------------------------------------------------------------- harness

namespace {

using FlowPairs = std::vector<std::pair<const Flow*, const Flow*>>;

struct Split {
  FlowPairs fit, val, test;
};

struct Context {
  const ExperimentConfig& cfg;
  std::ostream* log;
  Split split;
  std::vector<MetricRow> rows;
  json models = json::object();
  bool roc_written = false;
  json roc_summary;

  void say(const std::string& msg) const {
    if (log) *log << msg << std::endl;
  }
};

/// Candidate pairs of a split flattened, with their labels.
struct Candidates {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (entry index, exit index)
  std::vector<bool> truth;
};

Candidates flatten(const std::vector<CandidateSet>& sets) {
  Candidates c;
  for (const auto& s : sets)
    for (std::size_t e : s.exits) {
      c.pairs.emplace_back(s.entry, e);
      c.truth.push_back(e == s.entry);
    }
  return c;
}

Candidates val_candidates(const Context& ctx, int n) {
  const std::size_t nval = ctx.split.val.size();
  if (nval < 2) throw InsufficientValidation("validation split has fewer than 2 pairs");
  const int nv = std::min<int>(n, static_cast<int>(nval) - 1);
  return flatten(build_candidate_sets(nval, nv, derive_seed(ctx.cfg.seed, 702, n)));
}

Candidates test_candidates(const Context& ctx, int n) {
  return flatten(build_candidate_sets(ctx.split.test.size(), n, derive_seed(ctx.cfg.seed, 703, n)));
}

MetricRow make_row(const std::string& method, const std::string& view, int n,
                   const std::string& policy, const std::vector<bool>& predicted,
                   const std::vector<bool>& truth, double tau) {
  MetricRow row{method, view, n, policy, {}, {}, tau};
  for (std::size_t i = 0; i < truth.size(); ++i) row.confusion.add(predicted[i], truth[i]);
  row.rates = metrics(row.confusion);
  return row;
}

std::unique_ptr<Model<float>> obtain_model(Context& ctx, const std::string& name,
                                           const ModelConfig& mc, const std::vector<int>& variants,
                                           const WindowOptions& w) {
  const auto& cfg = ctx.cfg;
  const std::uint64_t h = fnv1a(name);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 602, h);
  json meta = {{"name", name},
               {"train", tc.to_json()},
               {"init_seed", derive_seed(cfg.seed, 601, h)},
               {"windows", windows_to_json(w)},
               {"variants", variants},
               {"fit_pairs", ctx.split.fit.size()},
               {"val_pairs", ctx.split.val.size()}};
  const fs::path dir = cfg.out_dir / "models" / sanitize(name);

  if (cfg.reuse_checkpoints && fs::exists(dir / kCheckpointManifest)) {
    Checkpoint ck = load_checkpoint(dir, &mc);
    json stored = ck.metadata;
    stored.erase("best_epoch");
    stored.erase("best_val_loss");
    stored.erase("train_seconds");
    if (stored == meta) {
      ctx.say("reusing checkpoint " + dir.string());
      ctx.models[name] = ck.metadata;
      ctx.models[name]["reused"] = true;
      return std::move(ck.model);
    }
  }

  auto t0 = std::chrono::steady_clock::now();
  auto model = std::make_unique<Model<float>>(mc);
  model->init(meta["init_seed"].get<std::uint64_t>());
  auto train_pairs = build_train_pairs(ctx.split.fit, variants, w);
  auto val_pairs = build_train_pairs(ctx.split.val, variants, w);
  ctx.say("training " + name + " on " + std::to_string(train_pairs.size()) + " pairs");
  FitResult res = fit(*model, train_pairs, val_pairs, tc, [&](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %s epoch %d loss %.4f val %.4f (%.1fs)", name.c_str(),
                  e.epoch, e.mean_loss, e.val_loss, e.seconds);
    ctx.say(buf);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  meta["best_epoch"] = res.best_epoch;
  meta["best_val_loss"] = res.best_val_loss;
  meta["train_seconds"] = secs;
  save_checkpoint(*model, meta, dir);
  write_training_log(res.log, dir / "training_log.csv");
  ctx.models[name] = meta;
  ctx.models[name]["reused"] = false;
  return model;
}

using Embeddings = std::vector<nn::Mat<float>>;

Embeddings embed_side(Model<float>& model, const FlowPairs& pairs, bool entry,
                      const WindowOptions& w) {
  std::vector<MultiViewSample> samples;
  samples.reserve(pairs.size() * w.k);
  for (const auto& p : pairs) {
    auto s = window_samples(entry ? *p.first : *p.second, w.max_packets, w.k, w.width_frac, w.sample);
    samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  nn::Mat<float> all = embed_all(model, samples);
  Embeddings out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    out[i] = all.middleCols(static_cast<Eigen::Index>(i) * w.k, w.k);
  return out;
}

std::vector<WindowSimilarities> similarities(const Candidates& c, const Embeddings& entry,
                                             const Embeddings& exit, const FlowPairs& pairs) {
  std::vector<WindowSimilarities> out(c.pairs.size());
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    auto [a, b] = c.pairs[i];
    out[i].entry_id = pairs[a].first->flow_id;
    out[i].exit_id = pairs[b].second->flow_id;
    out[i].sims = window_similarities(entry[a], exit[b]);
  }
  return out;
}

void evaluate_embedding(Context& ctx, const std::string& method, const std::string& view,
                        Model<float>& model, const WindowOptions& w) {
  const auto& cfg = ctx.cfg;
  Embeddings val_in = embed_side(model, ctx.split.val, true, w);
  Embeddings val_out = embed_side(model, ctx.split.val, false, w);
  Embeddings test_in = embed_side(model, ctx.split.test, true, w);
  Embeddings test_out = embed_side(model, ctx.split.test, false, w);

  // Class conditionals from every validation entry/exit combination.
  std::vector<std::vector<double>> fit_sims;
  std::vector<bool> fit_truth;
  for (std::size_t a = 0; a < val_in.size(); ++a)
    for (std::size_t b = 0; b < val_out.size(); ++b) {
      fit_sims.push_back(window_similarities(val_in[a], val_out[b]));
      fit_truth.push_back(a == b);
    }
  LikelihoodModel lm = fit_likelihoods(fit_sims, fit_truth, 0.5);

  for (int n : cfg.n_neg) {
    lm.prior_corr = 1.0 / (1.0 + n);
    Candidates vc = val_candidates(ctx, n);
    Candidates tc = test_candidates(ctx, n);
    auto val_sims = similarities(vc, val_in, val_out, ctx.split.val);
    auto test_sims = similarities(tc, test_in, test_out, ctx.split.test);
    for (const auto& pname : cfg.policies) {
      Policy policy = Policy::parse(pname);
      std::vector<double> scores;
      scores.reserve(val_sims.size());
      for (const auto& s : val_sims)
        scores.push_back(policy.kind == Policy::Kind::kBayes ? bayes_posterior(s.sims, lm)
                                                             : vote_statistic(s.sims, policy.m));
      policy.tau = select_threshold(scores, vc.truth);
      std::vector<CorrelationDecision> decisions;
      std::vector<bool> predicted;
      decisions.reserve(test_sims.size());
      for (const auto& s : test_sims) {
        decisions.push_back(decide(s, lm, policy));
        predicted.push_back(decisions.back().correlated);
      }
      ctx.rows.push_back(make_row(method, view, n, policy.name(), predicted, tc.truth, policy.tau));
      ctx.say("  " + format_metric_row(ctx.rows.back()));

      if (!ctx.roc_written && policy.kind == Policy::Kind::kBayes) {
        std::vector<double> post;
        for (const auto& d : decisions) post.push_back(d.posterior);
        auto curve = roc_sweep(post, tc.truth);
        write_roc_csv(curve, cfg.out_dir / "roc.csv");
        write_decisions_csv(decisions, tc.truth, cfg.out_dir / "decisions.csv");
        ctx.roc_summary = {{"method", method}, {"view", view}, {"n_neg", n}, {"auc", roc_auc(curve)}};
        ctx.roc_written = true;
      }
    }
  }
}

void evaluate_baseline(Context& ctx, const std::string& method) {
  const auto& cfg = ctx.cfg;
  const int d = cfg.baseline_length;
  ProjectionMatrix proj = ProjectionMatrix::gaussian(cfg.cta_dim, d, derive_seed(cfg.seed, 801));
  auto score = [&](const Flow& a, const Flow& b) {
    return method == "raptor" ? raptor_score(a, b, d) : cta_score(a, b, proj, d);
  };
  auto score_all = [&](const Candidates& c, const FlowPairs& pairs) {
    std::vector<double> s(c.pairs.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < c.pairs.size(); ++i)
      s[i] = score(*pairs[c.pairs[i].first].first, *pairs[c.pairs[i].second].second);
    return s;
  };
  for (int n : cfg.n_neg) {
    Candidates vc = val_candidates(ctx, n);
    Candidates tc = test_candidates(ctx, n);
    double tau = select_threshold(score_all(vc, ctx.split.val), vc.truth);
    auto test_scores = score_all(tc, ctx.split.test);
    std::vector<bool> predicted;
    for (double s : test_scores) predicted.push_back(baseline_decide(s, tau));
    ctx.rows.push_back(make_row(method, "ipd", n, "threshold", predicted, tc.truth, tau));
    ctx.say("  " + format_metric_row(ctx.rows.back()));
  }
}

json rows_to_json(const std::vector<MetricRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"method", r.method},
                   {"view", r.view},
                   {"n_neg", r.n_neg},
                   {"policy", r.policy},
                   {"acc", r.rates.acc},
                   {"tpr", r.rates.tpr},
                   {"fpr", r.rates.fpr},
                   {"tau", r.tau},
                   {"tp", r.confusion.tp},
                   {"fp", r.confusion.fp},
                   {"tn", r.confusion.tn},
                   {"fn", r.confusion.fn}});
  return out;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create " + config.out_dir.string() + ": " + ec.message());

  Context ctx{config, log, {}, {}, json::object(), false, json()};
  ExperimentReport result;
  json report = {{"config", config.to_json()}, {"seed", config.seed}};
  auto finish = [&](const std::string& status, const std::string& error) {
    write_metrics_csv(ctx.rows, config.out_dir / "metrics.csv");
    report["status"] = status;
    if (!error.empty()) report["error"] = error;
    report["models"] = ctx.models;
    report["rows"] = rows_to_json(ctx.rows);
    if (ctx.roc_written) report["roc"] = ctx.roc_summary;
    report["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(report, config.out_dir / "report.json");
  };

  try {
    fs::path data_dir = config.data_dir;
    if (data_dir.empty()) {
      data_dir = config.out_dir / "data";
      ctx.say("generating " + std::to_string(config.synth.n_pairs) + " synthetic pairs");
      generate_dataset(config.synth, data_dir);
    }
    Dataset ds = load_dataset(data_dir);
    report["dataset"] = {{"dir", data_dir.string()},
                         {"train_pairs", ds.manifest.train.size()},
                         {"test_pairs", ds.manifest.test.size()}};

    std::vector<std::string> fit_ids, val_ids;
    split_validation(ds.manifest.train, config.train.val_fraction, config.seed, fit_ids, val_ids);
    ctx.split.fit = pair_flows(ds.flows, fit_ids);
    ctx.split.val = pair_flows(ds.flows, val_ids);
    ctx.split.test = pair_flows(ds.flows, ds.manifest.test);
    report["split"] = {{"fit_pairs", fit_ids.size()},
                       {"val_pairs", val_ids.size()},
                       {"test_pairs", ds.manifest.test.size()}};

    for (const auto& method : config.methods) {
      if (method == "early_mfc") {
        for (const auto& view : config.views) {
          ViewSpec spec = parse_view(view);
          ModelConfig mc = config.model;
          mc.arch = Arch::kEarlyMfc;
          mc.mode = spec.mode;
          WindowOptions w = config.windows;
          w.sample.second_view = spec.second;
          auto model = obtain_model(ctx, "early_mfc_" + view, mc, {w.max_packets}, w);
          evaluate_embedding(ctx, method, view, *model, w);
        }
      } else if (method == "early_mfc_plus") {
        ModelConfig mc = config.model;
        mc.arch = Arch::kEarlyMfcPlus;
        mc.mode = EmbedMode::kFull;
        WindowOptions w = config.windows;
        auto model = obtain_model(ctx, "early_mfc_plus", mc, config.plus_packet_counts, w);
        for (int n : config.plus_packet_counts) {
          WindowOptions wn = w;
          wn.max_packets = n;
          evaluate_embedding(ctx, "early_mfc_plus:" + std::to_string(n), "raw+ipd", *model, wn);
        }
      } else {
        evaluate_baseline(ctx, method);
      }
    }
  } catch (const std::exception& e) {
    finish("failed", e.what());
    throw;
  }
  finish("ok", "");
  result.rows = ctx.rows;
  result.report = report;
  return result;
}

}  // namespace earlycorr
