#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "earlycorr/capture.hpp"
#include "earlycorr/dataset_io.hpp"
#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

using namespace earlycorr;

namespace {

using Bytes = std::vector<std::uint8_t>;

void le32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void be32(Bytes& b, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void be16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

Bytes global_header(bool big_endian = false, std::uint32_t link = 1) {
  Bytes b;
  auto put = [&](std::uint32_t v) { big_endian ? be32(b, v) : le32(b, v); };
  put(0xa1b2c3d4);
  if (big_endian) {
    be16(b, 2);
    be16(b, 4);
  } else {
    b.insert(b.end(), {2, 0, 4, 0});
  }
  put(0);
  put(0);
  put(65535);
  put(link);
  return b;
}

void record(Bytes& b, std::uint32_t sec, std::uint32_t usec, const Bytes& frame, bool big_endian = false) {
  auto put = [&](std::uint32_t v) { big_endian ? be32(b, v) : le32(b, v); };
  put(sec);
  put(usec);
  put(static_cast<std::uint32_t>(frame.size()));
  put(static_cast<std::uint32_t>(frame.size()));
  b.insert(b.end(), frame.begin(), frame.end());
}

// Ethernet II + IPv4 (no options) + TCP (no options), written field by field.
Bytes eth_ipv4_tcp(const Bytes& payload, std::uint16_t window, std::uint16_t sport = 443,
                   std::uint16_t dport = 51000) {
  Bytes f{0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb};
  be16(f, 0x0800);
  be16(f, 0x4500);  // version 4, IHL 5, TOS 0
  be16(f, static_cast<std::uint16_t>(20 + 20 + payload.size()));
  be16(f, 0x1234);  // id
  be16(f, 0x4000);  // DF, offset 0
  f.push_back(64);  // TTL
  f.push_back(6);   // TCP
  be16(f, 0);       // checksum
  f.insert(f.end(), {10, 0, 0, 1, 10, 0, 0, 2});
  be16(f, sport);
  be16(f, dport);
  be32(f, 1000);  // seq
  be32(f, 2000);  // ack
  f.push_back(0x50);
  f.push_back(0x18);
  be16(f, window);
  be16(f, 0);
  be16(f, 0);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

Bytes eth_ipv4_udp(const Bytes& payload) {
  Bytes f(12, 0);
  be16(f, 0x0800);
  be16(f, 0x4500);
  be16(f, static_cast<std::uint16_t>(20 + 8 + payload.size()));
  be16(f, 0);
  be16(f, 0);
  f.push_back(64);
  f.push_back(17);
  be16(f, 0);
  f.insert(f.end(), {192, 168, 1, 1, 192, 168, 1, 2});
  be16(f, 5353);
  be16(f, 53);
  be16(f, static_cast<std::uint16_t>(8 + payload.size()));
  be16(f, 0);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

Bytes raw_ipv6_tcp(const Bytes& payload, std::uint16_t window) {
  Bytes f{0x60, 0, 0, 0};
  be16(f, static_cast<std::uint16_t>(20 + payload.size()));
  f.push_back(6);
  f.push_back(64);
  for (int i = 0; i < 16; ++i) f.push_back(i == 0 ? 0x20 : static_cast<std::uint8_t>(i));
  for (int i = 0; i < 16; ++i) f.push_back(i == 0 ? 0x20 : static_cast<std::uint8_t>(100 + i));
  be16(f, 1234);
  be16(f, 80);
  be32(f, 0);
  be32(f, 0);
  f.push_back(0x50);
  f.push_back(0x10);
  be16(f, window);
  be16(f, 0);
  be16(f, 0);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

Bytes arp_frame() {
  Bytes f(12, 0xff);
  be16(f, 0x0806);
  f.insert(f.end(), 28, 0);
  return f;
}

FiveTuple tuple_v4(std::uint8_t a, std::uint8_t b, std::uint16_t sp, std::uint16_t dp, Transport t) {
  FiveTuple ft;
  ft.src_addr[10] = ft.src_addr[11] = 0xff;
  ft.dst_addr[10] = ft.dst_addr[11] = 0xff;
  ft.src_addr[12] = 10;
  ft.src_addr[15] = a;
  ft.dst_addr[12] = 10;
  ft.dst_addr[15] = b;
  ft.src_port = sp;
  ft.dst_port = dp;
  ft.protocol = t;
  return ft;
}

PacketRecord make_record(double t, const FiveTuple& ft, Bytes payload, std::uint32_t win) {
  PacketRecord r;
  r.timestamp = t;
  r.five_tuple = ft;
  r.payload = std::move(payload);
  r.tcp_window = ft.protocol == Transport::kUdp ? 0 : win;
  return r;
}

// Random records over a handful of conversations, timestamps on the
// microsecond grid so that pcap encoding is exact.
std::vector<PacketRecord> random_records(Rng& rng, int n, int conversations) {
  std::vector<FiveTuple> tuples;
  for (int c = 0; c < conversations; ++c)
    tuples.push_back(tuple_v4(static_cast<std::uint8_t>(1 + c), 200,
                              static_cast<std::uint16_t>(1000 + c), 443,
                              rng.bernoulli(0.3) ? Transport::kUdp : Transport::kTcp));
  std::vector<PacketRecord> out;
  double t = 1.7e9;
  for (int i = 0; i < n; ++i) {
    t += static_cast<double>(rng.uniform_int(50000)) * 1e-6;
    const FiveTuple& base = tuples[rng.uniform_int(tuples.size())];
    Bytes payload(rng.uniform_int(120));
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    out.push_back(make_record(t, rng.bernoulli(0.5) ? base : base.reversed(), payload,
                              static_cast<std::uint32_t>(rng.uniform_int(65536))));
  }
  return out;
}

}  // namespace

TEST_CASE("parse_pcap: valid header without packets yields nothing") {
  auto res = parse_pcap_bytes(global_header(), LinkType::kEthernet);
  CHECK(res.records.empty());
  CHECK(res.skipped == 0);
}

TEST_CASE("parse_pcap: hand-built ethernet/ipv4/tcp packet") {
  for (bool big : {false, true}) {
    Bytes pcap = global_header(big);
    record(pcap, 100, 250000, eth_ipv4_tcp({0xDE, 0xAD, 0xBE, 0xEF}, 1024), big);
    auto res = parse_pcap_bytes(pcap, LinkType::kEthernet);
    REQUIRE(res.records.size() == 1);
    const auto& r = res.records[0];
    CHECK(r.payload_len() == 4);
    CHECK(r.payload == Bytes{0xDE, 0xAD, 0xBE, 0xEF});
    CHECK(r.tcp_window == 1024);
    CHECK(r.timestamp == doctest::Approx(100.25).epsilon(1e-12));
    CHECK(r.five_tuple.src_port == 443);
    CHECK(r.five_tuple.dst_port == 51000);
    CHECK(r.five_tuple.protocol == Transport::kTcp);
    CHECK(format_address(r.five_tuple.src_addr) == "10.0.0.1");
    CHECK(format_address(r.five_tuple.dst_addr) == "10.0.0.2");
  }
}

TEST_CASE("parse_pcap: udp carries a zero window and ipv6 is supported") {
  Bytes pcap = global_header();
  record(pcap, 1, 0, eth_ipv4_udp({1, 2, 3}));
  auto res = parse_pcap_bytes(pcap, LinkType::kEthernet);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].tcp_window == 0);
  CHECK(res.records[0].five_tuple.protocol == Transport::kUdp);
  CHECK(res.records[0].payload == Bytes{1, 2, 3});

  Bytes v6 = global_header(false, 101);
  record(v6, 2, 5, raw_ipv6_tcp({9, 9}, 777));
  auto r6 = parse_pcap_bytes(v6, LinkType::kRawIp);
  REQUIRE(r6.records.size() == 1);
  CHECK(r6.records[0].tcp_window == 777);
  CHECK(r6.records[0].payload == Bytes{9, 9});
  CHECK(r6.records[0].five_tuple.dst_port == 80);
}

TEST_CASE("parse_pcap: non-ip frames are skipped and counted") {
  Bytes pcap = global_header();
  record(pcap, 1, 0, arp_frame());
  auto res = parse_pcap_bytes(pcap, LinkType::kEthernet);
  CHECK(res.records.empty());
  CHECK(res.skipped == 1);

  // A truncated IPv4 frame next to a good one.
  Bytes bad = eth_ipv4_tcp({1, 2, 3, 4}, 10);
  bad.resize(30);
  Bytes mixed = global_header();
  record(mixed, 1, 0, bad);
  record(mixed, 2, 0, eth_ipv4_tcp({5}, 10));
  auto m = parse_pcap_bytes(mixed, LinkType::kEthernet);
  CHECK(m.records.size() == 1);
  CHECK(m.skipped == 1);
}

TEST_CASE("parse_pcap: malformed global header") {
  Bytes short_header(10, 0);
  CHECK_THROWS_AS(parse_pcap_bytes(short_header, LinkType::kEthernet), MalformedCapture);
  Bytes bad = global_header();
  bad[0] = 0x00;
  CHECK_THROWS_AS(parse_pcap_bytes(bad, LinkType::kEthernet), MalformedCapture);
  CHECK_THROWS_AS(parse_pcap("/nonexistent/file.pcap", LinkType::kEthernet), IoError);
}

TEST_CASE("assemble_flows: empty input") { CHECK(assemble_flows({}).empty()); }

TEST_CASE("assemble_flows: interleaved directions in time order") {
  FiveTuple ab = tuple_v4(1, 2, 5000, 443, Transport::kTcp);
  FiveTuple ba = ab.reversed();
  // Supplied out of order; A speaks first at t=0.
  std::vector<PacketRecord> recs{make_record(0.3, ba, {}, 1), make_record(0.0, ab, {}, 1),
                                 make_record(0.1, ab, {}, 1), make_record(0.4, ba, {}, 1),
                                 make_record(0.2, ab, {}, 1)};
  auto flows = assemble_flows(recs);
  REQUIRE(flows.size() == 1);
  REQUIRE(flows[0].packets.size() == 5);
  std::vector<int> dirs;
  for (const auto& p : flows[0].packets) dirs.push_back(p.direction);
  CHECK(dirs == std::vector<int>{0, 0, 0, 1, 1});
  for (std::size_t i = 1; i < 5; ++i)
    CHECK(flows[0].packets[i - 1].timestamp <= flows[0].packets[i].timestamp);
  CHECK(flows[0].role == FlowRole::kUnknown);
  CHECK_FALSE(flows[0].pair_id.has_value());
}

TEST_CASE("assemble_flows: distinct port pairs give distinct flows") {
  std::vector<PacketRecord> recs{make_record(0, tuple_v4(1, 2, 5000, 443, Transport::kTcp), {}, 1),
                                 make_record(1, tuple_v4(1, 2, 5001, 443, Transport::kTcp), {}, 1),
                                 make_record(2, tuple_v4(1, 2, 5000, 443, Transport::kTcp), {}, 1)};
  auto flows = assemble_flows(recs);
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].packets.size() == 2);
  CHECK(flows[1].packets.size() == 1);
  CHECK(flows[0].flow_id != flows[1].flow_id);
}

TEST_CASE("filter_flows: minimum length is inclusive") {
  Flow seven, eight;
  seven.packets.resize(7);
  eight.packets.resize(8);
  seven.flow_id = "a";
  eight.flow_id = "b";
  auto out = filter_flows({seven, eight}, 8);
  REQUIRE(out.size() == 1);
  CHECK(out[0].flow_id == "b");
  CHECK(filter_flows({seven, eight}, 1).size() == 2);
  CHECK_THROWS_AS(filter_flows({seven}, 0), InvalidConfig);
}

TEST_CASE("property: capture round trip through pcap and the dataset format") {
  Rng rng(11);
  for (int c = 0; c < 200; ++c) {
    auto recs = random_records(rng, 1 + static_cast<int>(rng.uniform_int(40)), 1 + static_cast<int>(rng.uniform_int(4)));
    const LinkType link = rng.bernoulli(0.5) ? LinkType::kEthernet : LinkType::kRawIp;
    auto parsed = parse_pcap_bytes(encode_pcap(recs, link), link);
    REQUIRE(parsed.records.size() == recs.size());
    CHECK(parsed.skipped == 0);
    auto flows = assemble_flows(parsed.records);
    std::size_t seen = 0;
    for (const auto& f : flows) {
      Flow back = flow_from_jsonl(flow_to_jsonl(f), 1);
      REQUIRE(back.packets.size() == f.packets.size());
      for (std::size_t i = 0; i < f.packets.size(); ++i) {
        CHECK(back.packets[i].payload == f.packets[i].payload);
        CHECK(std::fabs(back.packets[i].timestamp - f.packets[i].timestamp) <= 1e-6);
      }
      seen += back.packets.size();
    }
    CHECK(seen == recs.size());
    // Parsed values against the originals: order is preserved by the reader.
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(parsed.records[i].payload == recs[i].payload);
      CHECK(std::fabs(parsed.records[i].timestamp - recs[i].timestamp) <= 1e-6);
      CHECK(parsed.records[i].tcp_window == recs[i].tcp_window);
      CHECK(parsed.records[i].five_tuple == recs[i].five_tuple);
    }
  }
}

TEST_CASE("property: assemble_flows preserves the record multiset") {
  Rng rng(12);
  auto key = [](const PacketRecord& r) {
    return std::make_tuple(r.timestamp, r.five_tuple, r.payload, r.tcp_window);
  };
  for (int c = 0; c < 200; ++c) {
    auto recs = random_records(rng, static_cast<int>(rng.uniform_int(60)), 1 + static_cast<int>(rng.uniform_int(5)));
    auto flows = assemble_flows(recs);
    std::vector<decltype(key(recs[0]))> in, out;
    for (const auto& r : recs) in.push_back(key(r));
    for (const auto& f : flows) {
      for (const auto& p : f.packets) {
        out.push_back(key(p));
        // One tuple per flow up to reversal.
        const auto& t0 = f.packets.front().five_tuple;
        CHECK((p.five_tuple == t0 || p.five_tuple == t0.reversed()));
        CHECK(p.direction == (p.five_tuple == t0 ? 0 : 1));
      }
    }
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());
    CHECK(in == out);
  }
}

TEST_CASE("property: filter_flows is idempotent and order preserving") {
  Rng rng(13);
  for (int c = 0; c < 200; ++c) {
    std::vector<Flow> flows(rng.uniform_int(30));
    for (std::size_t i = 0; i < flows.size(); ++i) {
      flows[i].flow_id = "f" + std::to_string(i);
      flows[i].packets.resize(1 + rng.uniform_int(20));
    }
    const std::size_t m = 1 + rng.uniform_int(15);
    auto once = filter_flows(flows, m);
    CHECK(filter_flows(once, m) == once);
    std::size_t expected = 0;
    for (const auto& f : flows) expected += f.packets.size() >= m;
    CHECK(once.size() == expected);
    for (std::size_t i = 1; i < once.size(); ++i)
      CHECK(std::stoi(once[i - 1].flow_id.substr(1)) < std::stoi(once[i].flow_id.substr(1)));
  }
}
