#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "earlycorr/capture.hpp"
#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"
#include "earlycorr/synth.hpp"

using namespace earlycorr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("earlycorr_synth_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig random_config(Rng& rng) {
  SynthConfig c;
  c.n_pairs = static_cast<int>(rng.uniform_int(12));
  c.min_packets = 8 + static_cast<int>(rng.uniform_int(40));
  c.max_packets = c.min_packets + static_cast<int>(rng.uniform_int(40));
  c.latency_shift = rng.uniform(0.0, 0.3);
  c.jitter_scale = rng.uniform(0.0, 0.02);
  c.repacket_prob = rng.uniform();
  c.payload_flip_prob = rng.uniform();
  c.iat_mode = rng.bernoulli(0.5);
  c.iat_extra_delay_max = rng.uniform(0.0, 0.05);
  c.payload_prob = rng.uniform();
  c.seed = rng.next_u64();
  return c;
}

}  // namespace

TEST_CASE("generate_pair is deterministic in seed and index") {
  SynthConfig c;
  auto a = generate_pair(c, 17);
  auto b = generate_pair(c, 17);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  auto other = generate_pair(c, 18);
  CHECK_FALSE(other.first == a.first);
  c.seed = 2;
  CHECK_FALSE(generate_pair(c, 17).first == a.first);
}

TEST_CASE("noise-free pairs differ only by shift and substitution") {
  SynthConfig c;
  c.jitter_scale = 0;
  c.repacket_prob = 0;
  c.payload_flip_prob = 0;
  c.iat_mode = false;
  c.latency_shift = 0.05;
  for (int i = 0; i < 5; ++i) {
    auto [entry, exit] = generate_pair(c, i);
    REQUIRE(entry.packets.size() == exit.packets.size());
    for (std::size_t k = 0; k < entry.packets.size(); ++k) {
      CHECK(exit.packets[k].timestamp == entry.packets[k].timestamp + 0.05);
      REQUIRE(exit.packets[k].payload.size() == entry.packets[k].payload.size());
      for (std::size_t b = 0; b < entry.packets[k].payload.size(); ++b)
        CHECK(exit.packets[k].payload[b] == substitute_byte(entry.packets[k].payload[b]));
    }
    CHECK(entry.role == FlowRole::kEntry);
    CHECK(exit.role == FlowRole::kExit);
    CHECK(entry.pair_id == exit.pair_id);
  }
}

TEST_CASE("substitution is a fixed bijection") {
  std::set<int> image;
  for (int b = 0; b < 256; ++b) image.insert(substitute_byte(static_cast<std::uint8_t>(b)));
  CHECK(image.size() == 256);
  CHECK(substitute_byte(0x00) != 0x00);
}

TEST_CASE("exit and entry inter-packet delays agree on average") {
  // Pooled over 10,000 default pairs; standard error from the sample variances.
  SynthConfig c;
  double sum_in = 0, sq_in = 0, sum_out = 0, sq_out = 0;
  double n_in = 0, n_out = 0;
  for (int i = 0; i < 10000; ++i) {
    auto [entry, exit] = generate_pair(c, i);
    for (std::size_t k = 1; k < entry.packets.size(); ++k) {
      double d = entry.packets[k].timestamp - entry.packets[k - 1].timestamp;
      sum_in += d;
      sq_in += d * d;
      n_in += 1;
    }
    for (std::size_t k = 1; k < exit.packets.size(); ++k) {
      double d = exit.packets[k].timestamp - exit.packets[k - 1].timestamp;
      sum_out += d;
      sq_out += d * d;
      n_out += 1;
    }
  }
  const double m_in = sum_in / n_in, m_out = sum_out / n_out;
  const double v_in = sq_in / n_in - m_in * m_in, v_out = sq_out / n_out - m_out * m_out;
  const double se = std::sqrt(v_in / n_in + v_out / n_out);
  CHECK(std::fabs(m_out - m_in) <= 3 * se);
}

TEST_CASE("config validation and json") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    SynthConfig x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), InvalidConfig);
  };
  bad([](SynthConfig& x) { x.repacket_prob = 1.5; });
  bad([](SynthConfig& x) { x.payload_flip_prob = -0.1; });
  bad([](SynthConfig& x) { x.min_packets = 7; });
  bad([](SynthConfig& x) { x.jitter_scale = -1; });
  bad([](SynthConfig& x) { x.max_packets = 5; });
  bad([](SynthConfig& x) { x.n_pairs = -1; });
  CHECK_THROWS_AS(generate_pair([] { SynthConfig x; x.payload_prob = 2; return x; }(), 0), InvalidConfig);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    SynthConfig r = random_config(rng);
    SynthConfig back = SynthConfig::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
  }
  CHECK_THROWS_AS(SynthConfig::from_json({{"iat_mode", "maybe"}}), InvalidConfig);
  CHECK_THROWS_AS(SynthConfig::from_json({{"n_pairs", "many"}}), InvalidConfig);
}

TEST_CASE("generate_dataset: counts, split and determinism") {
  fs::path dir = scratch("ten");
  SynthConfig c;
  c.n_pairs = 10;
  DatasetManifest m = generate_dataset(c, dir);
  CHECK(m.pairs == 10);
  CHECK(m.flows == 20);
  CHECK(m.train.size() == 8);
  CHECK(m.test.size() == 2);
  auto j = nlohmann::json::parse(slurp(dir / kManifestFile));
  CHECK(j["counts"]["train_pairs"] == 8);
  CHECK(j["counts"]["test_pairs"] == 2);
  Dataset ds = load_dataset(dir);
  CHECK(ds.flows.size() == 20);
  CHECK(ds.manifest.train == m.train);

  fs::path again = scratch("ten_again");
  generate_dataset(c, again);
  CHECK(slurp(dir / kDatasetFile) == slurp(again / kDatasetFile));
  CHECK(slurp(dir / kManifestFile) == slurp(again / kManifestFile));

  fs::path empty = scratch("zero");
  c.n_pairs = 0;
  DatasetManifest e = generate_dataset(c, empty);
  CHECK(e.pairs == 0);
  CHECK(slurp(empty / kDatasetFile).empty());
  CHECK(load_dataset(empty).flows.empty());

  fs::remove_all(dir);
  fs::remove_all(again);
  fs::remove_all(empty);
  CHECK_THROWS_AS(load_dataset("/nonexistent/dataset"), IoError);
}

TEST_CASE("property: every exit pairs with exactly one entry") {
  Rng rng(41);
  for (int c = 0; c < 200; ++c) {
    SynthConfig cfg = random_config(rng);
    auto flows = generate_flows(cfg);
    REQUIRE(flows.size() == 2 * static_cast<std::size_t>(cfg.n_pairs));
    std::map<std::string, int> entries;
    std::set<std::string> ids;
    for (const auto& f : flows) {
      CHECK(ids.insert(f.flow_id).second);
      if (f.role == FlowRole::kEntry) ++entries[*f.pair_id];
    }
    for (const auto& f : flows)
      if (f.role == FlowRole::kExit) CHECK(entries[*f.pair_id] == 1);
  }
}

TEST_CASE("property: split is disjoint and exhaustive") {
  Rng rng(42);
  for (int c = 0; c < 200; ++c) {
    std::vector<std::string> ids;
    const auto n = rng.uniform_int(200);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(pair_id_for(static_cast<int>(i)));
    std::vector<std::string> train, test;
    split_pairs(ids, rng.next_u64(), train, test);
    CHECK(train.size() == n * 4 / 5);
    std::set<std::string> all(train.begin(), train.end());
    for (const auto& t : test) CHECK(all.insert(t).second);
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  }
}

TEST_CASE("property: without repacketization packet counts match") {
  Rng rng(43);
  for (int c = 0; c < 200; ++c) {
    SynthConfig cfg = random_config(rng);
    cfg.repacket_prob = 0;
    auto [entry, exit] = generate_pair(cfg, static_cast<int>(rng.uniform_int(1000)));
    CHECK(entry.packets.size() == exit.packets.size());
  }
}

TEST_CASE("property: generated flows are well formed and pass the length filter") {
  Rng rng(44);
  for (int c = 0; c < 200; ++c) {
    SynthConfig cfg = random_config(rng);
    auto [entry, exit] = generate_pair(cfg, static_cast<int>(rng.uniform_int(1000)));
    CHECK(filter_flows({entry, exit}, 8).size() == 2);
    for (const Flow* f : {&entry, &exit}) {
      const auto& t0 = f->packets.front().five_tuple;
      for (std::size_t k = 0; k < f->packets.size(); ++k) {
        const auto& p = f->packets[k];
        if (k > 0) CHECK(f->packets[k - 1].timestamp <= p.timestamp);
        CHECK(p.direction <= 1);
        CHECK((p.five_tuple == t0 || p.five_tuple == t0.reversed()));
        if (p.five_tuple.protocol == Transport::kUdp) CHECK(p.tcp_window == 0);
      }
    }
  }
}
