#include "cli.hpp"

#include <omp.h>

#include <Eigen/Core>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "earlycorr/capture.hpp"
#include "earlycorr/checkpoint.hpp"
#include "earlycorr/dataset_io.hpp"
#include "earlycorr/error.hpp"
#include "earlycorr/experiment.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out = ".";
  std::string config;
  std::uint64_t seed = 1;
  int jobs = 0;
  std::vector<CLI::Option*> seed_opts;  // one per verb; only the parsed verb's can be set

  bool seed_given() const {
    for (auto* o : seed_opts)
      if (o->count() > 0) return true;
    return false;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--config", c.config, "JSON config file; explicit flags win")->check(CLI::ExistingFile);
  c.seed_opts.push_back(sub->add_option("--seed", c.seed, "Seed for all randomness (default: $EARLYCORR_SEED, then 1)"));
  sub->add_option("--jobs", c.jobs, "Worker thread cap (0: OpenMP default)")->check(CLI::NonNegativeNumber);
}

json read_json_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig(path + ": " + e.what());
  }
}

struct SeedChoice {
  std::uint64_t value = 1;
  bool forced = false;  // flag or environment: overrides seeds in the config file
};

SeedChoice resolve_seed(const Common& c, const json& file, const char* key = "seed") {
  if (c.seed_given()) return {c.seed, true};
  if (file.is_object() && file.contains(key)) return {file.at(key).get<std::uint64_t>(), false};
  if (const char* env = std::getenv("EARLYCORR_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw InvalidConfig(std::string("EARLYCORR_SEED is not an integer: ") + env);
    return {v, true};
  }
  return {1, false};
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json versions() {
  return {{"earlycorr", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"openmp", _OPENMP}};
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  return dir;
}

/// Sets `target` from the flag when it was given on the command line.
template <typename T>
void override(CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  int pairs = 100;
  int min_packets = 200, max_packets = 400;
  double latency = 0.15, jitter = 0.005, repacket = 0.1, flip = 0.05, payload = 0.7, iat_extra = 0.01;
  bool iat_mode = false;
  std::map<std::string, CLI::Option*> opts;
};

void add_synth_flags(CLI::App* sub, SynthArgs& a) {
  a.opts["pairs"] = sub->add_option("--pairs", a.pairs, "Number of correlated pairs");
  a.opts["min"] = sub->add_option("--min-packets", a.min_packets, "Minimum packets per flow");
  a.opts["max"] = sub->add_option("--max-packets", a.max_packets, "Maximum packets per flow");
  a.opts["latency"] = sub->add_option("--latency", a.latency, "Constant entry-to-exit latency (s)");
  a.opts["jitter"] = sub->add_option("--jitter", a.jitter, "Laplace jitter scale (s)");
  a.opts["repacket"] = sub->add_option("--repacket", a.repacket, "Repacketization probability");
  a.opts["flip"] = sub->add_option("--flip", a.flip, "Payload byte randomization probability");
  a.opts["payload"] = sub->add_option("--payload-prob", a.payload, "Share of packets with payload");
  a.opts["iat_extra"] = sub->add_option("--iat-extra-delay", a.iat_extra, "Max extra delay in IAT mode (s)");
  a.opts["iat_mode"] = sub->add_flag("--iat-mode", a.iat_mode, "Scramble inter-arrival times");
}

void apply_synth_flags(const SynthArgs& a, SynthConfig& s) {
  override(a.opts.at("pairs"), a.pairs, s.n_pairs);
  override(a.opts.at("min"), a.min_packets, s.min_packets);
  override(a.opts.at("max"), a.max_packets, s.max_packets);
  override(a.opts.at("latency"), a.latency, s.latency_shift);
  override(a.opts.at("jitter"), a.jitter, s.jitter_scale);
  override(a.opts.at("repacket"), a.repacket, s.repacket_prob);
  override(a.opts.at("flip"), a.flip, s.payload_flip_prob);
  override(a.opts.at("payload"), a.payload, s.payload_prob);
  override(a.opts.at("iat_extra"), a.iat_extra, s.iat_extra_delay_max);
  override(a.opts.at("iat_mode"), a.iat_mode, s.iat_mode);
}

json run_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  json file = read_json_file(c.config);
  if (file.contains("synth")) file = file.at("synth");
  SynthConfig cfg = file.empty() ? SynthConfig{} : SynthConfig::from_json(file);
  apply_synth_flags(a, cfg);
  SeedChoice seed = resolve_seed(c, file);
  if (seed.forced || !file.contains("seed")) cfg.seed = seed.value;
  cfg.validate();
  DatasetManifest m = generate_dataset(cfg, ensure_dir(c.out));
  out << "wrote " << m.pairs << " pairs (" << m.flows << " flows) to " << c.out << '\n';
  return {{"synth", cfg.to_json()}, {"seed", cfg.seed}};
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string entry, exit, pairs, link = "ethernet";
  std::size_t min_packets = 8;
};

std::vector<Flow> read_capture(const std::string& path, LinkType link, std::size_t min_packets,
                               FlowRole role, std::size_t& skipped) {
  CaptureResult cap = parse_pcap(path, link);
  skipped += cap.skipped;
  std::vector<Flow> flows = filter_flows(assemble_flows(cap.records), min_packets);
  for (auto& f : flows) f.role = role;
  return flows;
}

json run_extract(const Common& c, const ExtractArgs& a, std::ostream& out) {
  const LinkType link = a.link == "raw" ? LinkType::kRawIp : LinkType::kEthernet;
  std::size_t skipped = 0;
  std::vector<Flow> flows = read_capture(a.entry, link, a.min_packets, FlowRole::kEntry, skipped);
  if (!a.exit.empty()) {
    auto ex = read_capture(a.exit, link, a.min_packets, FlowRole::kExit, skipped);
    flows.insert(flows.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }

  std::vector<std::string> pair_ids;
  if (!a.pairs.empty()) {
    // Lines "entry_flow_id,exit_flow_id" name the ground-truth pairs.
    std::map<std::string, Flow*> entry_by_id, exit_by_id;
    for (auto& f : flows) (f.role == FlowRole::kEntry ? entry_by_id : exit_by_id)[f.flow_id] = &f;
    std::ifstream in(a.pairs);
    if (!in) throw IoError("cannot read " + a.pairs);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw InvalidConfig(a.pairs + ":" + std::to_string(line_no) + ": expected entry_id,exit_id");
      auto e = entry_by_id.find(line.substr(0, comma));
      auto x = exit_by_id.find(line.substr(comma + 1));
      if (e == entry_by_id.end() || x == exit_by_id.end())
        throw InvalidConfig(a.pairs + ":" + std::to_string(line_no) + ": unknown flow id");
      const std::string pid = pair_id_for(static_cast<int>(pair_ids.size()));
      e->second->pair_id = pid;
      x->second->pair_id = pid;
      pair_ids.push_back(pid);
    }
  }

  const SeedChoice seed = resolve_seed(c, json::object());
  DatasetManifest m;
  m.config = {{"source", "pcap"}, {"entry", a.entry}, {"exit", a.exit}, {"link", a.link},
              {"min_packets", a.min_packets}};
  m.pairs = pair_ids.size();
  m.flows = flows.size();
  split_pairs(pair_ids, seed.value, m.train, m.test);
  const fs::path dir = ensure_dir(c.out);
  write_dataset(dir / kDatasetFile, flows);
  write_json(m.to_json(), dir / kManifestFile);
  out << "extracted " << flows.size() << " flows, " << pair_ids.size() << " labeled pairs, " << skipped
      << " frames skipped\n";
  return {{"extract", m.config}, {"seed", seed.value}};
}

// ---------------------------------------------------------------- experiment-style verbs

struct ExperimentArgs {
  std::string data;
  std::vector<std::string> methods, views, policies;
  std::vector<int> n_neg, plus_packets;
  int epochs = 30, batch = 64;
  double lr = 1e-3, margin = 0.5;
  std::string mining = "semi_hard";
  bool reuse = false;
  std::map<std::string, CLI::Option*> opts;
};

void add_training_flags(CLI::App* sub, ExperimentArgs& a) {
  a.opts["epochs"] = sub->add_option("--epochs", a.epochs, "Training epochs");
  a.opts["batch"] = sub->add_option("--batch", a.batch, "Pairs per batch");
  a.opts["lr"] = sub->add_option("--lr", a.lr, "Adam learning rate");
  a.opts["margin"] = sub->add_option("--margin", a.margin, "Triplet margin");
  a.opts["mining"] = sub->add_option("--mining", a.mining, "Negative mining: semi_hard or random");
}

void add_experiment_flags(CLI::App* sub, ExperimentArgs& a, SynthArgs& s) {
  a.opts["data"] = sub->add_option("--data", a.data, "Dataset directory (default: generate synthetic data)");
  a.opts["methods"] = sub->add_option("--methods", a.methods, "early_mfc, early_mfc_plus, raptor, cta");
  a.opts["views"] = sub->add_option("--views", a.views, "raw+ipd, raw, ipd, hdr:<kind>");
  a.opts["policies"] = sub->add_option("--policies", a.policies, "bayes, vote:<m>");
  a.opts["n_neg"] = sub->add_option("--n-neg", a.n_neg, "Negative sample numbers");
  a.opts["plus"] = sub->add_option("--plus-packets", a.plus_packets, "Packet counts for early_mfc_plus");
  a.opts["reuse"] = sub->add_flag("--reuse", a.reuse, "Reuse matching checkpoints under --out");
  add_training_flags(sub, a);
  add_synth_flags(sub, s);
}

void apply_training_flags(const ExperimentArgs& a, TrainConfig& t) {
  override(a.opts.at("epochs"), a.epochs, t.epochs);
  override(a.opts.at("batch"), a.batch, t.batch_size);
  override(a.opts.at("lr"), a.lr, t.learning_rate);
  override(a.opts.at("margin"), a.margin, t.margin);
  if (a.opts.at("mining")->count() > 0) t.mining = mining_from_string(a.mining);
}

ExperimentConfig resolve_experiment(const Common& c, const ExperimentArgs& a, const SynthArgs& s,
                                    bool ablate) {
  const json file = read_json_file(c.config);
  ExperimentConfig cfg = ExperimentConfig::from_json(file);
  if (ablate) {
    if (!file.contains("methods")) cfg.methods = {"early_mfc"};
    if (!file.contains("views")) cfg.views = {"raw+ipd", "raw", "ipd"};
  }
  if (a.opts.at("data")->count() > 0) cfg.data_dir = a.data;
  override(a.opts.at("methods"), a.methods, cfg.methods);
  override(a.opts.at("views"), a.views, cfg.views);
  override(a.opts.at("policies"), a.policies, cfg.policies);
  override(a.opts.at("n_neg"), a.n_neg, cfg.n_neg);
  override(a.opts.at("plus"), a.plus_packets, cfg.plus_packet_counts);
  override(a.opts.at("reuse"), a.reuse, cfg.reuse_checkpoints);
  apply_training_flags(a, cfg.train);
  apply_synth_flags(s, cfg.synth);
  const SeedChoice seed = resolve_seed(c, file);
  cfg.seed = seed.value;
  const bool synth_seeded = file.contains("synth") && file.at("synth").contains("seed");
  if (seed.forced || !synth_seeded) cfg.synth.seed = seed.value;
  cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

json run_eval(const Common& c, const ExperimentArgs& a, const SynthArgs& s, bool ablate,
              std::ostream& out) {
  ExperimentConfig cfg = resolve_experiment(c, a, s, ablate);
  ensure_dir(c.out);
  ExperimentReport report = run_experiment(cfg, &out);
  out << kMetricsHeader << '\n';
  for (const auto& r : report.rows) out << format_metric_row(r) << '\n';
  return {{"experiment", cfg.to_json()}, {"seed", cfg.seed}};
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string view = "raw+ipd";
  std::string arch = "early_mfc";
  std::vector<int> packets;
};

json run_train(const Common& c, const ExperimentArgs& a, const TrainArgs& t, std::ostream& out) {
  const json file = read_json_file(c.config);
  ExperimentConfig cfg = ExperimentConfig::from_json(file);
  apply_training_flags(a, cfg.train);
  const SeedChoice seed = resolve_seed(c, file);
  cfg.seed = seed.value;
  if (a.data.empty()) throw InvalidConfig("train needs --data");

  ModelConfig mc = cfg.model;
  mc.arch = arch_from_string(t.arch);
  WindowOptions w = cfg.windows;
  if (t.view == "raw") {
    mc.mode = EmbedMode::kRawOnly;
  } else if (t.view == "ipd") {
    mc.mode = EmbedMode::kIpdOnly;
  } else if (t.view != "raw+ipd") {
    w.sample.second_view = SecondView::parse(t.view);
  }
  mc.validate();
  cfg.train.validate();
  std::vector<int> variants = t.packets;
  if (variants.empty())
    variants = mc.arch == Arch::kEarlyMfcPlus ? cfg.plus_packet_counts : std::vector<int>{w.max_packets};

  Dataset ds = load_dataset(a.data);
  std::vector<std::string> fit_ids, val_ids;
  split_validation(ds.manifest.train, cfg.train.val_fraction, cfg.seed, fit_ids, val_ids);
  auto fit_pairs = build_train_pairs(pair_flows(ds.flows, fit_ids), variants, w);
  auto val_pairs = build_train_pairs(pair_flows(ds.flows, val_ids), variants, w);

  Model<float> model(mc);
  model.init(derive_seed(cfg.seed, 601));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 602);
  FitResult res = fit(model, fit_pairs, val_pairs, tc, [&](const EpochLog& e) {
    out << "epoch " << e.epoch << " loss " << e.mean_loss << " val " << e.val_loss << '\n';
  });
  const fs::path dir = ensure_dir(c.out) / "model";
  json meta = {{"train", tc.to_json()},
               {"windows", windows_to_json(w)},
               {"variants", variants},
               {"view", t.view},
               {"data", a.data},
               {"best_epoch", res.best_epoch},
               {"best_val_loss", res.best_val_loss}};
  save_checkpoint(model, meta, dir);
  write_training_log(res.log, dir / "training_log.csv");
  out << "checkpoint written to " << dir.string() << '\n';
  return {{"model", mc.to_json()}, {"train", tc.to_json()}, {"seed", cfg.seed}};
}

// ---------------------------------------------------------------- correlate

struct CorrelateArgs {
  std::string checkpoint, data, likelihood, policy = "bayes";
  int n_neg = 9;
  double tau = 0.0;
  CLI::Option* tau_opt = nullptr;
};

json run_correlate(const Common& c, const CorrelateArgs& a, std::ostream& out) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  WindowOptions w;
  try {
    if (ck.metadata.contains("windows")) w = windows_from_json(ck.metadata.at("windows"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(std::string("checkpoint window options: ") + e.what());
  }
  const SeedChoice seed = resolve_seed(c, json::object());
  Policy policy = Policy::parse(a.policy);
  if (policy.kind == Policy::Kind::kVote && (policy.m < 1 || policy.m > w.k))
    throw InvalidPolicy("vote count outside [1, " + std::to_string(w.k) + "]");

  Dataset ds = load_dataset(a.data);
  std::vector<std::string> fit_ids, val_ids;
  split_validation(ds.manifest.train, 0.1, seed.value, fit_ids, val_ids);
  auto val = pair_flows(ds.flows, val_ids);
  auto test = pair_flows(ds.flows, ds.manifest.test);

  auto embed_pairs = [&](const std::vector<std::pair<const Flow*, const Flow*>>& pairs, bool entry) {
    std::vector<nn::Mat<float>> out(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
      out[i] = window_embeddings(*ck.model, entry ? *pairs[i].first : *pairs[i].second, w);
    return out;
  };
  auto val_in = embed_pairs(val, true), val_out = embed_pairs(val, false);

  LikelihoodModel lm;
  if (!a.likelihood.empty()) {
    lm = LikelihoodModel::from_json(read_json_file(a.likelihood));
  } else {
    std::vector<std::vector<double>> sims;
    std::vector<bool> truth;
    for (std::size_t i = 0; i < val.size(); ++i)
      for (std::size_t j = 0; j < val.size(); ++j) {
        sims.push_back(window_similarities(val_in[i], val_out[j]));
        truth.push_back(i == j);
      }
    lm = fit_likelihoods(sims, truth, 0.5);
  }
  lm.prior_corr = 1.0 / (1.0 + a.n_neg);

  auto score = [&](const std::vector<double>& s) {
    return policy.kind == Policy::Kind::kBayes ? bayes_posterior(s, lm) : vote_statistic(s, policy.m);
  };
  if (a.tau_opt->count() > 0) {
    policy.tau = a.tau;
  } else {
    if (val.size() < 2) throw InsufficientValidation("validation split has fewer than 2 pairs");
    const int nv = std::min<int>(a.n_neg, static_cast<int>(val.size()) - 1);
    std::vector<double> scores;
    std::vector<bool> truth;
    for (const auto& set : build_candidate_sets(val.size(), nv, derive_seed(seed.value, 702, a.n_neg)))
      for (std::size_t e : set.exits) {
        scores.push_back(score(window_similarities(val_in[set.entry], val_out[e])));
        truth.push_back(e == set.entry);
      }
    policy.tau = select_threshold(scores, truth);
  }

  auto test_in = embed_pairs(test, true), test_out = embed_pairs(test, false);
  std::vector<CorrelationDecision> decisions;
  std::vector<bool> truth;
  Confusion conf;
  for (const auto& set : build_candidate_sets(test.size(), a.n_neg, derive_seed(seed.value, 703, a.n_neg)))
    for (std::size_t e : set.exits) {
      WindowSimilarities ws{test[set.entry].first->flow_id, test[e].second->flow_id,
                            window_similarities(test_in[set.entry], test_out[e])};
      decisions.push_back(decide(ws, lm, policy));
      truth.push_back(e == set.entry);
      conf.add(decisions.back().correlated, truth.back());
    }
  const fs::path dir = ensure_dir(c.out);
  write_decisions_csv(decisions, truth, dir / "decisions.csv");
  write_json(lm.to_json(), dir / "likelihood.json");
  const Rates r = metrics(conf);
  out << "policy " << policy.name() << " tau " << policy.tau << " acc " << r.acc << " tpr " << r.tpr
      << " fpr " << r.fpr << '\n';
  return {{"checkpoint", a.checkpoint}, {"data", a.data}, {"policy", policy.name()},
          {"tau", policy.tau},          {"n_neg", a.n_neg}, {"seed", seed.value}};
}

// ---------------------------------------------------------------- roc

json run_roc(const Common& c, const std::string& decisions, std::ostream& out) {
  std::ifstream in(decisions);
  if (!in) throw IoError("cannot read " + decisions);
  std::string line;
  if (!std::getline(in, line)) throw InvalidConfig(decisions + " is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  int post_col = -1, truth_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "posterior") post_col = static_cast<int>(i);
    if (header[i] == "truth") truth_col = static_cast<int>(i);
  }
  if (post_col < 0 || truth_col < 0) throw InvalidConfig(decisions + " lacks posterior/truth columns");
  std::vector<double> scores;
  std::vector<bool> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw InvalidConfig(decisions + ": ragged row");
    scores.push_back(std::stod(cells[post_col]));
    const std::string& t = cells[truth_col];
    if (t != "correlated" && t != "uncorrelated")
      throw InvalidConfig(decisions + ": truth must be correlated or uncorrelated, got '" + t + "'");
    labels.push_back(t == "correlated");
  }
  auto curve = roc_sweep(scores, labels);
  write_roc_csv(curve, ensure_dir(c.out) / "roc.csv");
  out << "auc " << roc_auc(curve) << " over " << scores.size() << " pairs\n";
  return {{"decisions", decisions}};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early flow correlation toolkit", "earlycorr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  SynthArgs synth_args;
  ExtractArgs extract_args;
  ExperimentArgs exp_args;
  SynthArgs exp_synth;
  TrainArgs train_args;
  CorrelateArgs corr_args;
  std::string decisions;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic correlated-flow dataset");
  add_common(synth, common);
  add_synth_flags(synth, synth_args);

  auto* extract = app.add_subcommand("extract", "Assemble flows from pcap captures");
  add_common(extract, common);
  extract->add_option("--entry", extract_args.entry, "Entry-side capture")->required()->check(CLI::ExistingFile);
  extract->add_option("--exit", extract_args.exit, "Exit-side capture")->check(CLI::ExistingFile);
  extract->add_option("--pairs", extract_args.pairs, "CSV of entry_flow_id,exit_flow_id pairs")
      ->check(CLI::ExistingFile);
  extract->add_option("--link", extract_args.link, "Link type")->check(CLI::IsMember({"ethernet", "raw"}));
  extract->add_option("--min-packets", extract_args.min_packets, "Drop shorter flows");

  auto* train = app.add_subcommand("train", "Train one embedding model");
  add_common(train, common);
  ExperimentArgs train_exp;
  train_exp.opts["data"] = train->add_option("--data", train_exp.data, "Dataset directory")->required();
  train->add_option("--view", train_args.view, "raw+ipd, raw, ipd or hdr:<kind>");
  train->add_option("--arch", train_args.arch, "early_mfc or early_mfc_plus");
  train->add_option("--packets", train_args.packets, "Truncation variants used for training");
  add_training_flags(train, train_exp);

  auto* correlate = app.add_subcommand("correlate", "Score candidate pairs with a trained model");
  add_common(correlate, common);
  correlate->add_option("--checkpoint", corr_args.checkpoint, "Checkpoint directory")->required();
  correlate->add_option("--data", corr_args.data, "Dataset directory")->required();
  correlate->add_option("--likelihood", corr_args.likelihood, "Fitted likelihood JSON")
      ->check(CLI::ExistingFile);
  correlate->add_option("--policy", corr_args.policy, "bayes or vote:<m>");
  correlate->add_option("--n-neg", corr_args.n_neg, "Decoys per entry")->check(CLI::PositiveNumber);
  corr_args.tau_opt = correlate->add_option("--tau", corr_args.tau, "Fixed threshold (default: fit on validation)");

  auto* eval = app.add_subcommand("eval", "Run the experiment grid and write metrics.csv");
  add_common(eval, common);
  add_experiment_flags(eval, exp_args, exp_synth);
  ExperimentArgs ablate_args;
  SynthArgs ablate_synth;
  auto* ablate = app.add_subcommand("ablate", "Compare input views of the embedding model");
  add_common(ablate, common);
  add_experiment_flags(ablate, ablate_args, ablate_synth);

  auto* roc = app.add_subcommand("roc", "ROC curve from a decisions.csv");
  add_common(roc, common);
  roc->add_option("--decisions", decisions, "decisions.csv written by eval or correlate")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (common.jobs > 0) omp_set_num_threads(common.jobs);
  CLI::App* verb = app.get_subcommands().front();
  const auto t0 = std::chrono::steady_clock::now();
  json manifest = {{"verb", verb->get_name()}, {"started", utc_now()}, {"versions", versions()}};
  json argv_json = json::array();
  for (int i = 0; i < argc; ++i) argv_json.push_back(argv[i]);
  manifest["argv"] = argv_json;

  int status = 0;
  try {
    json resolved;
    if (verb == synth) resolved = run_synth(common, synth_args, out);
    else if (verb == extract) resolved = run_extract(common, extract_args, out);
    else if (verb == train) resolved = run_train(common, train_exp, train_args, out);
    else if (verb == correlate) resolved = run_correlate(common, corr_args, out);
    else if (verb == eval) resolved = run_eval(common, exp_args, exp_synth, false, out);
    else if (verb == ablate) resolved = run_eval(common, ablate_args, ablate_synth, true, out);
    else resolved = run_roc(common, decisions, out);
    manifest["resolved"] = resolved;
    manifest["status"] = "ok";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    status = 1;
  }
  manifest["jobs"] = common.jobs > 0 ? common.jobs : omp_get_max_threads();
  manifest["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_json(manifest, ensure_dir(common.out) / "run_manifest.json");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    status = 1;
  }
  return status;
}

}  // namespace earlycorr::cli
