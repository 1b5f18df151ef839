#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "earlycorr/flow.hpp"

namespace earlycorr {

/// Parameters of the correlated entry/exit flow generator. Delays are in
/// seconds; probabilities in [0, 1].
struct SynthConfig {
  int n_pairs = 100;
  int min_packets = 200;
  int max_packets = 400;
  // Log-normal inter-arrival process of the entry side: log(iat) ~ N(mu, sigma).
  double iat_log_mu = -3.9;  // median ~20 ms
  double iat_log_sigma = 1.0;
  double latency_shift = 0.15;
  double jitter_scale = 0.005;
  double repacket_prob = 0.1;
  double payload_flip_prob = 0.05;
  bool iat_mode = false;
  double iat_extra_delay_max = 0.01;
  // Share of non-empty packets (ACK-like packets carry no payload).
  double payload_prob = 0.7;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

/// Byte mapping applied to entry payloads to obtain exit payloads before
/// per-byte randomization.
std::uint8_t substitute_byte(std::uint8_t b);

std::string pair_id_for(int pair_index);

/// Deterministic in (config.seed, pair_index).
std::pair<Flow, Flow> generate_pair(const SynthConfig& config, int pair_index);

struct DatasetManifest {
  nlohmann::json config;
  std::size_t pairs = 0;
  std::size_t flows = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// 80/20 split of pair ids, seeded; train gets floor(0.8 * n).
void split_pairs(const std::vector<std::string>& pair_ids, std::uint64_t seed,
                 std::vector<std::string>& train, std::vector<std::string>& test);

/// Entry then exit flow for each pair, in pair order.
std::vector<Flow> generate_flows(const SynthConfig& config);

/// Writes <out_dir>/dataset.jsonl and <out_dir>/manifest.json.
DatasetManifest generate_dataset(const SynthConfig& config,
                                 const std::filesystem::path& out_dir);

struct Dataset {
  std::vector<Flow> flows;
  DatasetManifest manifest;
};

/// Reads a directory written by generate_dataset (or by the extract verb).
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

}  // namespace earlycorr
