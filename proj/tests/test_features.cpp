#include <doctest.h>

#include <cmath>
#include <set>

#include "earlycorr/error.hpp"
#include "earlycorr/features.hpp"
#include "earlycorr/rng.hpp"

using namespace earlycorr;

namespace {

Flow flow_with_times(const std::vector<double>& ts) {
  Flow f;
  f.flow_id = "f";
  for (double t : ts) {
    PacketRecord p;
    p.timestamp = t;
    f.packets.push_back(p);
  }
  return f;
}

Flow random_flow(Rng& rng, int n, int max_payload = 120) {
  Flow f;
  f.flow_id = "r";
  double t = rng.uniform(0.0, 100.0);
  for (int i = 0; i < n; ++i) {
    PacketRecord p;
    t += rng.lognormal(-4.0, 1.5);
    p.timestamp = t;
    p.direction = static_cast<std::uint8_t>(rng.uniform_int(2));
    p.payload.resize(rng.uniform_int(max_payload + 1));
    for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    p.tcp_window = static_cast<std::uint32_t>(rng.uniform_int(65536));
    p.five_tuple.protocol = Transport::kTcp;
    f.packets.push_back(std::move(p));
  }
  return f;
}

}  // namespace

TEST_CASE("extract_raw: scaling, zero padding and truncation") {
  Flow f = flow_with_times({0, 1, 2});
  f.packets[0].payload.assign(80, 0xFF);
  f.packets[1].payload = {0x00, 0x80};
  RawView v = extract_raw(f);
  REQUIRE(v.values.size() == 800);
  for (int c = 0; c < 80; ++c) CHECK(v.at(0, c) == 1.0f);
  CHECK(v.at(1, 0) == 0.0f);
  CHECK(v.at(1, 1) == doctest::Approx(128.0 / 255.0));
  for (int r = 3; r < 10; ++r)
    for (int c = 0; c < 80; ++c) CHECK(v.at(r, c) == 0.0f);

  Flow a = flow_with_times({0});
  a.packets[0].payload.assign(100, 7);
  Flow b = a;
  for (int i = 80; i < 100; ++i) b.packets[0].payload[i] = static_cast<std::uint8_t>(i);
  CHECK(extract_raw(a) == extract_raw(b));

  CHECK_THROWS_AS(extract_raw(Flow{}), EmptyFlow);
}

TEST_CASE("extract_ipds: millisecond quantization, clamp and errors") {
  IpdView v = extract_ipds(flow_with_times({0.0, 0.1, 0.25}));
  REQUIRE(v.values.size() == 200);
  CHECK(v.values[0] == 100);
  CHECK(v.values[1] == 150);
  CHECK(v.values[2] == 0);
  CHECK(v.valid_len == 2);
  CHECK(extract_ipds(flow_with_times({5.0, 5.0})).values[0] == 0);
  CHECK(extract_ipds(flow_with_times({0.0, 60.0})).values[0] == 9999);
  CHECK_THROWS_AS(extract_ipds(flow_with_times({1.0})), TooShort);
  // Longer flows are truncated at the sequence length.
  std::vector<double> ts;
  for (int i = 0; i < 300; ++i) ts.push_back(i * 0.002);
  IpdView long_view = extract_ipds(flow_with_times(ts));
  CHECK(long_view.valid_len == 200);
  CHECK(long_view.values[199] == 2);
}

TEST_CASE("extract_hdr: header sequences") {
  Flow f = flow_with_times({0, 1, 2});
  f.packets[0].direction = 0;
  f.packets[1].direction = 1;
  f.packets[2].direction = 0;
  auto d = extract_hdr(f, HdrKind::kDirection);
  CHECK(d.values[0] == 0.0);
  CHECK(d.values[1] == 1.0);
  CHECK(d.values[2] == 0.0);
  CHECK(d.values[3] == 0.0);
  CHECK(d.valid_len == 3);

  Flow udp = f;
  for (auto& p : udp.packets) {
    p.five_tuple.protocol = Transport::kUdp;
    p.tcp_window = 5000;  // ignored for UDP
  }
  auto w = extract_hdr(udp, HdrKind::kTcpWindow);
  for (int i = 0; i < w.valid_len; ++i) CHECK(w.values[i] == 0.0);

  f.packets[0].payload.resize(4);
  f.packets[1].payload.clear();
  f.packets[2].payload.resize(1448);
  auto pb = extract_hdr(f, HdrKind::kPayloadBytes);
  CHECK(pb.values[0] == 4.0);
  CHECK(pb.values[1] == 0.0);
  CHECK(pb.values[2] == 1448.0);
  CHECK(pb.values[3] == 0.0);
  CHECK_THROWS_AS(extract_hdr(Flow{}, HdrKind::kIpd), EmptyFlow);
}

TEST_CASE("hdr kinds and second views parse by name") {
  for (auto k : {HdrKind::kPayloadBytes, HdrKind::kTcpWindow, HdrKind::kIpd, HdrKind::kDirection})
    CHECK(hdr_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(hdr_kind_from_string("ttl"), InvalidConfig);
  CHECK(SecondView::parse("ipd").source == SecondView::Source::kIpd);
  SecondView hv = SecondView::parse("hdr:direction");
  CHECK(hv.source == SecondView::Source::kHdr);
  CHECK(hv.hdr_kind == HdrKind::kDirection);
  CHECK(SecondView::parse(hv.name()) == hv);
  CHECK_THROWS_AS(SecondView::parse("bytes"), InvalidConfig);
}

TEST_CASE("window_flow: geometry on a 12 second flow") {
  std::vector<double> ts;
  for (int i = 0; i <= 120; ++i) ts.push_back(i * 0.1);
  Flow f = flow_with_times(ts);
  auto ws = window_flow(f, 5, 1.0 / 3.0);
  REQUIRE(ws.size() == 5);
  const double bounds[5][2] = {{0, 4}, {2, 6}, {4, 8}, {6, 10}, {8, 12}};
  for (int i = 0; i < 5; ++i) {
    CHECK(ws[i].window_index == i);
    CHECK(ws[i].flow_id == "f");
    REQUIRE_FALSE(ws[i].packets.empty());
    CHECK(ws[i].packets.front().timestamp == doctest::Approx(bounds[i][0]));
    CHECK(ws[i].packets.back().timestamp == doctest::Approx(bounds[i][1]));
  }
  auto one = window_flow(f, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].packets == f.packets);
}

TEST_CASE("window_flow: degenerate and invalid inputs") {
  Flow same = flow_with_times({3.0, 3.0, 3.0});
  auto ws = window_flow(same, 4);
  REQUIRE(ws.size() == 4);
  for (const auto& w : ws) CHECK(w.packets == same.packets);
  CHECK_THROWS_AS(window_flow(same, 0), InvalidConfig);
  CHECK_THROWS_AS(window_flow(same, 3, 0.0), InvalidConfig);
  CHECK_THROWS_AS(window_flow(Flow{}, 3), EmptyFlow);
}

TEST_CASE("make_sample tolerates short windows") {
  SampleOptions opts;
  MultiViewSample empty = make_sample(Flow{}, opts);
  CHECK(empty.raw.values.size() == 800);
  CHECK(empty.ipd.values.size() == 200);
  CHECK(empty.ipd.valid_len == 0);
  MultiViewSample single = make_sample(flow_with_times({1.0}), opts);
  CHECK(single.ipd.valid_len == 0);

  Flow f = flow_with_times({0, 0.01, 0.02});
  f.packets[1].direction = 1;
  opts.second_view = SecondView::parse("hdr:direction");
  MultiViewSample hs = make_sample(f, opts);
  CHECK(hs.ipd.valid_len == 3);
  CHECK(hs.ipd.values[1] == 1);
}

TEST_CASE("window_samples truncates before windowing") {
  Rng rng(5);
  Flow f = random_flow(rng, 300);
  auto a = window_samples(f, 50, 5, 1.0 / 3.0, {});
  auto b = window_samples(truncate_flow(f, 50), 0, 5, 1.0 / 3.0, {});
  REQUIRE(a.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i].raw == b[i].raw);
    CHECK(a[i].ipd == b[i].ipd);
    CHECK(a[i].window_index == i);
  }
}

TEST_CASE("property: truncation invariance") {
  Rng rng(21);
  for (int c = 0; c < 200; ++c) {
    const int np = 1 + static_cast<int>(rng.uniform_int(12));
    const int nb = 1 + static_cast<int>(rng.uniform_int(100));
    const int len = 1 + static_cast<int>(rng.uniform_int(60));
    Flow a = random_flow(rng, 2 + static_cast<int>(rng.uniform_int(80)));
    Flow b = a;
    // Change everything past the views' reach.
    for (std::size_t i = 0; i < b.packets.size(); ++i) {
      auto& p = b.packets[i];
      if (static_cast<int>(i) >= np) p.payload.assign(rng.uniform_int(50), 0xAB);
      else if (static_cast<int>(p.payload.size()) > nb)
        for (std::size_t j = nb; j < p.payload.size(); ++j) p.payload[j] ^= 0x5A;
    }
    for (int i = 0; i < 10; ++i) {
      PacketRecord extra;
      extra.timestamp = b.packets.back().timestamp + rng.uniform(0.0, 1.0);
      b.packets.push_back(extra);
    }
    CHECK(extract_raw(a, np, nb) == extract_raw(b, np, nb));
    const int nipd = std::min<int>(len, static_cast<int>(a.packets.size()) - 1);
    IpdView ia = extract_ipds(a, len), ib = extract_ipds(b, len);
    for (int j = 0; j < nipd; ++j) CHECK(ia.values[j] == ib.values[j]);
    if (static_cast<int>(a.packets.size()) > len) CHECK(ia == ib);
  }
}

TEST_CASE("property: padding leaves valid regions unchanged") {
  Rng rng(22);
  for (int c = 0; c < 200; ++c) {
    Flow f = random_flow(rng, 2 + static_cast<int>(rng.uniform_int(30)));
    const int short_len = static_cast<int>(f.packets.size()) - 1;
    const int long_len = short_len + 1 + static_cast<int>(rng.uniform_int(100));
    IpdView a = extract_ipds(f, short_len), b = extract_ipds(f, long_len);
    CHECK(a.valid_len == b.valid_len);
    for (int j = 0; j < a.valid_len; ++j) CHECK(a.values[j] == b.values[j]);
    for (int j = b.valid_len; j < long_len; ++j) CHECK(b.values[j] == 0);

    RawView r1 = extract_raw(f, static_cast<int>(f.packets.size()), 40);
    RawView r2 = extract_raw(f, static_cast<int>(f.packets.size()) + 5, 40);
    for (int r = 0; r < r1.n_packets; ++r)
      for (int col = 0; col < 40; ++col) CHECK(r1.at(r, col) == r2.at(r, col));
    for (int r = r1.n_packets; r < r2.n_packets; ++r)
      for (int col = 0; col < 40; ++col) CHECK(r2.at(r, col) == 0.0f);

    auto kind = static_cast<HdrKind>(rng.uniform_int(4));
    HdrView h1 = extract_hdr(f, kind, 10), h2 = extract_hdr(f, kind, 250);
    for (int j = 0; j < h1.valid_len; ++j) CHECK(h1.values[j] == h2.values[j]);
    for (int j = h2.valid_len; j < 250; ++j) CHECK(h2.values[j] == 0.0);
    if (kind == HdrKind::kDirection)
      for (double v : h2.values) CHECK((v == 0.0 || v == 1.0));
    else
      for (double v : h2.values) CHECK(v >= 0.0);
  }
}

TEST_CASE("property: windows cover every packet when width >= 1/k") {
  Rng rng(23);
  for (int c = 0; c < 200; ++c) {
    Flow f = random_flow(rng, 2 + static_cast<int>(rng.uniform_int(200)), 4);
    const int k = 1 + static_cast<int>(rng.uniform_int(8));
    const double width = rng.uniform(1.0 / k, 1.0);
    auto ws = window_flow(f, k, width);
    REQUIRE(static_cast<int>(ws.size()) == k);
    std::multiset<double> seen;
    for (const auto& w : ws)
      for (const auto& p : w.packets) seen.insert(p.timestamp);
    for (const auto& p : f.packets) CHECK(seen.count(p.timestamp) > 0);
    // Window members stay in time order and inside the flow.
    for (const auto& w : ws)
      for (std::size_t i = 1; i < w.packets.size(); ++i)
        CHECK(w.packets[i - 1].timestamp <= w.packets[i].timestamp);
  }
}

TEST_CASE("property: uniformly spaced packets are covered by the default windows") {
  Rng rng(24);
  for (int c = 0; c < 200; ++c) {
    const int n = 2 + static_cast<int>(rng.uniform_int(300));
    const double dt = rng.uniform(1e-4, 0.5);
    const double t0 = rng.uniform(0.0, 1e4);
    std::vector<double> ts;
    for (int i = 0; i < n; ++i) ts.push_back(t0 + i * dt);
    Flow f = flow_with_times(ts);
    std::set<double> seen;
    for (const auto& w : window_flow(f, 5, 1.0 / 3.0))
      for (const auto& p : w.packets) seen.insert(p.timestamp);
    CHECK(seen.size() == static_cast<std::size_t>(n));
  }
}

TEST_CASE("property: ipds are invariant to a constant time shift") {
  Rng rng(25);
  for (int c = 0; c < 200; ++c) {
    Flow f = random_flow(rng, 2 + static_cast<int>(rng.uniform_int(100)));
    Flow g = f;
    const double shift = rng.uniform(-50.0, 1e4);
    for (auto& p : g.packets) p.timestamp += shift;
    CHECK(extract_ipds(f) == extract_ipds(g));
  }
}
