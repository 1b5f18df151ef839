#include "earlycorr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "earlycorr/dataset_io.hpp"
#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPairStream = 0x5041495253ULL;   // "PAIRS"
constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;  // "SPLIT"
constexpr std::uint8_t kSubstitutionKey = 0xff;
constexpr double kMaxPayloadLen = 1448.0;

std::array<std::uint8_t, 16> v4(std::uint8_t a, std::uint8_t b, std::uint8_t c,
                                std::uint8_t d) {
  std::array<std::uint8_t, 16> addr{};
  addr[10] = addr[11] = 0xff;
  addr[12] = a;
  addr[13] = b;
  addr[14] = c;
  addr[15] = d;
  return addr;
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidConfig(std::string(name) + " must be in [0,1], got " + std::to_string(p));
}

void stamp_tuple(Flow& flow, const FiveTuple& forward) {
  FiveTuple backward = forward.reversed();
  for (auto& p : flow.packets) p.five_tuple = p.direction ? backward : forward;
}

void sort_by_time(std::vector<PacketRecord>& pkts) {
  std::stable_sort(pkts.begin(), pkts.end(),
                   [](const PacketRecord& a, const PacketRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
}

// Exit-side cell repacketization. Only interior packets are touched so the
// first and last timestamps (and hence the flow duration) are preserved;
// merges and splits are equally likely.
std::vector<PacketRecord> repacketize(const std::vector<PacketRecord>& in,
                                      double prob, int min_packets, Rng& rng) {
  std::vector<PacketRecord> out;
  out.reserve(in.size() + in.size() / 8);
  long balance = 0;
  const long n = static_cast<long>(in.size());
  for (long i = 0; i < n; ++i) {
    const PacketRecord& p = in[i];
    bool interior = i > 0 && i + 1 < n;
    if (!interior || !rng.bernoulli(prob)) {
      out.push_back(p);
      continue;
    }
    if (rng.bernoulli(0.5)) {
      // Merge into the previous packet; its (earlier) timestamp is kept.
      if (n + balance - 1 < min_packets) {
        out.push_back(p);
        continue;
      }
      auto& prev = out.back();
      prev.payload.insert(prev.payload.end(), p.payload.begin(), p.payload.end());
      --balance;
    } else {
      std::size_t cut = rng.uniform_int(p.payload.size() + 1);
      PacketRecord head = p;
      PacketRecord tail = p;
      head.payload.assign(p.payload.begin(), p.payload.begin() + cut);
      tail.payload.assign(p.payload.begin() + cut, p.payload.end());
      tail.timestamp = p.timestamp + rng.uniform() * (in[i + 1].timestamp - p.timestamp);
      out.push_back(std::move(head));
      out.push_back(std::move(tail));
      ++balance;
    }
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_pairs < 0) throw InvalidConfig("n_pairs must be >= 0");
  if (min_packets < 8) throw InvalidConfig("min_packets must be >= 8");
  if (max_packets < min_packets) throw InvalidConfig("max_packets must be >= min_packets");
  if (!(iat_log_sigma >= 0.0)) throw InvalidConfig("iat_log_sigma must be >= 0");
  if (!std::isfinite(iat_log_mu)) throw InvalidConfig("iat_log_mu must be finite");
  if (!(latency_shift >= 0.0)) throw InvalidConfig("latency_shift must be >= 0");
  if (!(jitter_scale >= 0.0)) throw InvalidConfig("jitter_scale must be >= 0");
  if (!(iat_extra_delay_max >= 0.0)) throw InvalidConfig("iat_extra_delay_max must be >= 0");
  check_prob(repacket_prob, "repacket_prob");
  check_prob(payload_flip_prob, "payload_flip_prob");
  check_prob(payload_prob, "payload_prob");
}

json SynthConfig::to_json() const {
  return {{"n_pairs", n_pairs},
          {"packets_per_flow", {min_packets, max_packets}},
          {"base_iat_lognormal", {iat_log_mu, iat_log_sigma}},
          {"latency_shift", latency_shift},
          {"jitter_scale", jitter_scale},
          {"repacket_prob", repacket_prob},
          {"payload_flip_prob", payload_flip_prob},
          {"iat_mode", iat_mode ? "on" : "off"},
          {"iat_extra_delay_max", iat_extra_delay_max},
          {"payload_prob", payload_prob},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  try {
    if (j.contains("n_pairs")) c.n_pairs = j.at("n_pairs").get<int>();
    if (j.contains("packets_per_flow")) {
      c.min_packets = j.at("packets_per_flow").at(0).get<int>();
      c.max_packets = j.at("packets_per_flow").at(1).get<int>();
    }
    if (j.contains("base_iat_lognormal")) {
      c.iat_log_mu = j.at("base_iat_lognormal").at(0).get<double>();
      c.iat_log_sigma = j.at("base_iat_lognormal").at(1).get<double>();
    }
    if (j.contains("latency_shift")) c.latency_shift = j.at("latency_shift").get<double>();
    if (j.contains("jitter_scale")) c.jitter_scale = j.at("jitter_scale").get<double>();
    if (j.contains("repacket_prob")) c.repacket_prob = j.at("repacket_prob").get<double>();
    if (j.contains("payload_flip_prob"))
      c.payload_flip_prob = j.at("payload_flip_prob").get<double>();
    if (j.contains("iat_mode")) {
      const auto& m = j.at("iat_mode");
      if (m.is_boolean()) {
        c.iat_mode = m.get<bool>();
      } else {
        auto s = m.get<std::string>();
        if (s != "on" && s != "off") throw InvalidConfig("iat_mode must be \"on\" or \"off\"");
        c.iat_mode = s == "on";
      }
    }
    if (j.contains("iat_extra_delay_max"))
      c.iat_extra_delay_max = j.at("iat_extra_delay_max").get<double>();
    if (j.contains("payload_prob")) c.payload_prob = j.at("payload_prob").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("synth config: ") + e.what());
  }
  return c;
}

std::uint8_t substitute_byte(std::uint8_t b) {
  return static_cast<std::uint8_t>(b ^ kSubstitutionKey);
}

std::string pair_id_for(int pair_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%06d", pair_index);
  return buf;
}

std::pair<Flow, Flow> generate_pair(const SynthConfig& config, int pair_index) {
  config.validate();
  Rng rng(derive_seed(config.seed, kPairStream, static_cast<std::uint64_t>(pair_index)));
  const std::string pid = pair_id_for(pair_index);

  Flow entry;
  entry.flow_id = pid + "-entry";
  entry.role = FlowRole::kEntry;
  entry.pair_id = pid;
  const int n = config.min_packets +
                static_cast<int>(rng.uniform_int(config.max_packets - config.min_packets + 1));
  const auto idx = static_cast<std::uint32_t>(pair_index);
  const std::uint32_t window_base = 16384u << rng.uniform_int(3);

  double t = 1000.0 + 40.0 * pair_index;
  std::uint8_t dir = 0;
  entry.packets.resize(n);
  for (int i = 0; i < n; ++i) {
    PacketRecord& p = entry.packets[i];
    if (i > 0) {
      t += rng.lognormal(config.iat_log_mu, config.iat_log_sigma);
      if (rng.bernoulli(0.35)) dir ^= 1;
    }
    p.timestamp = t;
    p.direction = dir;
    p.tcp_window = window_base + static_cast<std::uint32_t>(rng.uniform_int(4096));
    if (rng.bernoulli(config.payload_prob)) {
      double len = std::clamp(std::round(rng.lognormal(std::log(150.0), 0.8)), 6.0,
                              kMaxPayloadLen);
      p.payload.resize(static_cast<std::size_t>(len));
      // TLS application-data record header, then ciphertext-like bytes.
      p.payload[0] = 0x17;
      p.payload[1] = 0x03;
      p.payload[2] = 0x03;
      p.payload[3] = static_cast<std::uint8_t>((p.payload.size() - 5) >> 8);
      p.payload[4] = static_cast<std::uint8_t>(p.payload.size() - 5);
      for (std::size_t b = 5; b < p.payload.size(); ++b)
        p.payload[b] = static_cast<std::uint8_t>(rng.next_u64());
    }
  }

  Flow exit;
  exit.flow_id = pid + "-exit";
  exit.role = FlowRole::kExit;
  exit.pair_id = pid;
  exit.packets = entry.packets;
  const std::uint32_t exit_window_base = 16384u << rng.uniform_int(3);
  for (auto& p : exit.packets) {
    p.timestamp += config.latency_shift;
    p.timestamp += rng.laplace(config.jitter_scale);
    p.tcp_window = exit_window_base + static_cast<std::uint32_t>(rng.uniform_int(4096));
    for (auto& b : p.payload) {
      b = substitute_byte(b);
      if (rng.bernoulli(config.payload_flip_prob))
        b = static_cast<std::uint8_t>(rng.next_u64());
    }
  }
  sort_by_time(exit.packets);
  if (config.repacket_prob > 0.0)
    exit.packets = repacketize(exit.packets, config.repacket_prob, 8, rng);

  if (config.iat_mode) {
    for (auto* flow : {&entry, &exit}) {
      for (auto& p : flow->packets) p.timestamp += rng.uniform(0.0, config.iat_extra_delay_max);
      sort_by_time(flow->packets);
    }
  }

  FiveTuple entry_tuple;
  entry_tuple.src_addr = v4(10, static_cast<std::uint8_t>(idx >> 16),
                            static_cast<std::uint8_t>(idx >> 8), static_cast<std::uint8_t>(idx));
  entry_tuple.dst_addr = v4(198, 51, 100, static_cast<std::uint8_t>(1 + idx % 250));
  entry_tuple.src_port = static_cast<std::uint16_t>(32768 + idx % 28000);
  entry_tuple.dst_port = 443;
  FiveTuple exit_tuple;
  exit_tuple.src_addr = v4(203, 0, 113, static_cast<std::uint8_t>(1 + idx % 250));
  exit_tuple.dst_addr = v4(172, 16 + static_cast<std::uint8_t>((idx >> 16) & 15),
                           static_cast<std::uint8_t>(idx >> 8), static_cast<std::uint8_t>(idx));
  exit_tuple.src_port = static_cast<std::uint16_t>(40000 + idx % 25000);
  exit_tuple.dst_port = 443;
  stamp_tuple(entry, entry_tuple);
  stamp_tuple(exit, exit_tuple);
  return {std::move(entry), std::move(exit)};
}

json DatasetManifest::to_json() const {
  return {{"config", config},
          {"counts",
           {{"pairs", pairs},
            {"flows", flows},
            {"train_pairs", train.size()},
            {"test_pairs", test.size()}}},
          {"split", {{"train", train}, {"test", test}}}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  try {
    m.config = j.value("config", json::object());
    m.pairs = j.at("counts").at("pairs").get<std::size_t>();
    m.flows = j.at("counts").at("flows").get<std::size_t>();
    m.train = j.at("split").at("train").get<std::vector<std::string>>();
    m.test = j.at("split").at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("manifest: ") + e.what());
  }
  return m;
}

void split_pairs(const std::vector<std::string>& pair_ids, std::uint64_t seed,
                 std::vector<std::string>& train, std::vector<std::string>& test) {
  std::vector<std::string> order = pair_ids;
  Rng rng(derive_seed(seed, kSplitStream));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  std::size_t n_train = order.size() * 4 / 5;
  train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  test.assign(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

std::vector<Flow> generate_flows(const SynthConfig& config) {
  config.validate();
  std::vector<Flow> flows(2 * static_cast<std::size_t>(config.n_pairs));
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < config.n_pairs; ++i) {
    auto [entry, exit] = generate_pair(config, i);
    flows[2 * i] = std::move(entry);
    flows[2 * i + 1] = std::move(exit);
  }
  return flows;
}

DatasetManifest generate_dataset(const SynthConfig& config,
                                 const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  auto flows = generate_flows(config);
  write_dataset(out_dir / kDatasetFile, flows);

  DatasetManifest manifest;
  manifest.config = config.to_json();
  manifest.pairs = static_cast<std::size_t>(config.n_pairs);
  manifest.flows = flows.size();
  std::vector<std::string> ids;
  ids.reserve(manifest.pairs);
  for (int i = 0; i < config.n_pairs; ++i) ids.push_back(pair_id_for(i));
  split_pairs(ids, config.seed, manifest.train, manifest.test);

  auto path = out_dir / kManifestFile;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  auto mpath = dir / kManifestFile;
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open " + mpath.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
  ds.manifest = DatasetManifest::from_json(j);
  ds.flows = read_dataset(dir / kDatasetFile);
  return ds;
}

}  // namespace earlycorr
