#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlycorr/correlate.hpp"
#include "earlycorr/eval.hpp"
#include "earlycorr/model.hpp"
#include "earlycorr/synth.hpp"
#include "earlycorr/train.hpp"

namespace earlycorr {

nlohmann::json windows_to_json(const WindowOptions& w);
/// Missing keys keep their defaults.
WindowOptions windows_from_json(const nlohmann::json& j);

/// One cell of the experiment grid. Embedding methods carry the views
/// "raw+ipd", "raw", "ipd" or "hdr:<kind>"; the statistical baselines use
/// view "ipd" and policy "threshold".
struct ExperimentConfig {
  std::filesystem::path data_dir;  // empty: generate from `synth` into <out>/data
  SynthConfig synth;
  std::filesystem::path out_dir = ".";
  std::vector<std::string> methods{"early_mfc", "raptor", "cta"};
  std::vector<std::string> views{"raw+ipd"};
  std::vector<int> n_neg{9, 99, 190};
  std::vector<int> plus_packet_counts{20, 100, 180};
  std::vector<std::string> policies{"bayes"};
  ModelConfig model;
  TrainConfig train;
  WindowOptions windows;
  int cta_dim = 50;
  int baseline_length = 200;  // delays compared by raptor and cta
  std::uint64_t seed = 1;
  bool reuse_checkpoints = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct MetricRow {
  std::string method;
  std::string view;
  int n_neg = 0;
  std::string policy;
  Confusion confusion;
  Rates rates;
  double tau = 0.0;
};

struct ExperimentReport {
  std::vector<MetricRow> rows;
  nlohmann::json report;
};

inline constexpr const char* kMetricsHeader = "method,view,n_neg,policy,acc,tpr,fpr,tau";

std::string format_metric_row(const MetricRow& row);
void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

/// Trains (or reuses) every model the grid needs, evaluates all cells on
/// the test split and writes metrics.csv, report.json, roc.csv,
/// decisions.csv and per-model checkpoints under out_dir. On failure the
/// rows finished so far are flushed with a failure marker in report.json
/// before the error propagates.
ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Seeded shuffle of the training pair ids; the first
/// floor(fraction * n) become the validation split.
void split_validation(const std::vector<std::string>& train_ids, double fraction, std::uint64_t seed,
                      std::vector<std::string>& fit, std::vector<std::string>& val);

/// Pairs the dataset's entry and exit flows by pair id, keeping `ids` order.
/// Throws InvalidConfig when a pair lacks either side.
std::vector<std::pair<const Flow*, const Flow*>> pair_flows(const std::vector<Flow>& flows,
                                                            const std::vector<std::string>& ids);

/// Training samples for one set of pairs. Each entry of `max_packets` is one
/// variant (0 keeps whole flows).
std::vector<TrainPair> build_train_pairs(const std::vector<std::pair<const Flow*, const Flow*>>& pairs,
                                         const std::vector<int>& max_packets,
                                         const WindowOptions& windows);

}  // namespace earlycorr
