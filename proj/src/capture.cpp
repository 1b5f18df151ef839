#include "earlycorr/capture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>

#include "earlycorr/error.hpp"

namespace earlycorr {

namespace {

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;

std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

struct ByteOrder {
  bool swapped = false;
  std::uint32_t u32(const std::uint8_t* p) const {
    std::uint32_t le = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                       (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
    return swapped ? __builtin_bswap32(le) : le;
  }
};

// Parses the transport header starting at `l4`; `l4_len` is bounded by both
// the IP length field and the captured length.
bool parse_transport(std::uint8_t proto, const std::uint8_t* l4,
                     std::size_t l4_len, PacketRecord& rec) {
  if (proto == 6) {
    if (l4_len < 20) return false;
    std::size_t off = static_cast<std::size_t>(l4[12] >> 4) * 4;
    if (off < 20 || off > l4_len) return false;
    rec.five_tuple.protocol = Transport::kTcp;
    rec.five_tuple.src_port = be16(l4);
    rec.five_tuple.dst_port = be16(l4 + 2);
    rec.tcp_window = be16(l4 + 14);
    rec.payload.assign(l4 + off, l4 + l4_len);
    return true;
  }
  if (proto == 17) {
    if (l4_len < 8) return false;
    rec.five_tuple.protocol = Transport::kUdp;
    rec.five_tuple.src_port = be16(l4);
    rec.five_tuple.dst_port = be16(l4 + 2);
    rec.tcp_window = 0;
    rec.payload.assign(l4 + 8, l4 + l4_len);
    return true;
  }
  return false;
}

bool parse_ipv4(const std::uint8_t* p, std::size_t len, PacketRecord& rec) {
  if (len < 20 || (p[0] >> 4) != 4) return false;
  std::size_t ihl = static_cast<std::size_t>(p[0] & 0x0f) * 4;
  std::size_t total = be16(p + 2);
  if (ihl < 20 || total < ihl || total > len) return false;
  // Non-first fragments carry no transport header.
  if ((be16(p + 6) & 0x1fff) != 0) return false;
  rec.five_tuple.src_addr = {};
  rec.five_tuple.dst_addr = {};
  rec.five_tuple.src_addr[10] = rec.five_tuple.src_addr[11] = 0xff;
  rec.five_tuple.dst_addr[10] = rec.five_tuple.dst_addr[11] = 0xff;
  std::copy(p + 12, p + 16, rec.five_tuple.src_addr.begin() + 12);
  std::copy(p + 16, p + 20, rec.five_tuple.dst_addr.begin() + 12);
  return parse_transport(p[9], p + ihl, total - ihl, rec);
}

bool parse_ipv6(const std::uint8_t* p, std::size_t len, PacketRecord& rec) {
  if (len < 40 || (p[0] >> 4) != 6) return false;
  std::size_t total = 40 + be16(p + 4);
  if (total > len) return false;
  std::copy(p + 8, p + 24, rec.five_tuple.src_addr.begin());
  std::copy(p + 24, p + 40, rec.five_tuple.dst_addr.begin());
  std::uint8_t next = p[6];
  std::size_t off = 40;
  // Hop-by-hop, routing and destination options share the length encoding.
  while (next == 0 || next == 43 || next == 60) {
    if (off + 8 > total) return false;
    std::size_t ext = (static_cast<std::size_t>(p[off + 1]) + 1) * 8;
    next = p[off];
    off += ext;
    if (off > total) return false;
  }
  return parse_transport(next, p + off, total - off, rec);
}

bool parse_frame(const std::uint8_t* p, std::size_t len, LinkType link,
                 PacketRecord& rec) {
  if (link == LinkType::kRawIp) {
    if (len < 1) return false;
    switch (p[0] >> 4) {
      case 4: return parse_ipv4(p, len, rec);
      case 6: return parse_ipv6(p, len, rec);
      default: return false;
    }
  }
  if (len < 14) return false;
  std::size_t off = 12;
  std::uint16_t ether_type = be16(p + off);
  if (ether_type == kEtherVlan) {
    if (len < 18) return false;
    off += 4;
    ether_type = be16(p + off);
  }
  off += 2;
  if (ether_type == kEtherIpv4) return parse_ipv4(p + off, len - off, rec);
  if (ether_type == kEtherIpv6) return parse_ipv6(p + off, len - off, rec);
  return false;
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

bool is_v4_mapped(const std::array<std::uint8_t, 16>& a) {
  for (int i = 0; i < 10; ++i)
    if (a[i] != 0) return false;
  return a[10] == 0xff && a[11] == 0xff;
}

std::vector<std::uint8_t> build_frame(const PacketRecord& rec, LinkType link) {
  const FiveTuple& ft = rec.five_tuple;
  std::vector<std::uint8_t> l4;
  if (ft.protocol == Transport::kTcp) {
    put16(l4, ft.src_port);
    put16(l4, ft.dst_port);
    l4.insert(l4.end(), 8, 0);  // seq, ack
    l4.push_back(0x50);         // data offset 5
    l4.push_back(0x18);         // PSH|ACK
    put16(l4, static_cast<std::uint16_t>(rec.tcp_window));
    l4.insert(l4.end(), 4, 0);  // checksum, urgent
  } else {
    put16(l4, ft.src_port);
    put16(l4, ft.dst_port);
    put16(l4, static_cast<std::uint16_t>(8 + rec.payload.size()));
    put16(l4, 0);
  }
  l4.insert(l4.end(), rec.payload.begin(), rec.payload.end());

  std::vector<std::uint8_t> l3;
  bool v4 = is_v4_mapped(ft.src_addr) && is_v4_mapped(ft.dst_addr);
  std::uint8_t proto = static_cast<std::uint8_t>(ft.protocol);
  if (v4) {
    l3.push_back(0x45);
    l3.push_back(0);
    put16(l3, static_cast<std::uint16_t>(20 + l4.size()));
    l3.insert(l3.end(), {0, 0, 0x40, 0, 64, proto, 0, 0});
    l3.insert(l3.end(), ft.src_addr.begin() + 12, ft.src_addr.end());
    l3.insert(l3.end(), ft.dst_addr.begin() + 12, ft.dst_addr.end());
  } else {
    l3.insert(l3.end(), {0x60, 0, 0, 0});
    put16(l3, static_cast<std::uint16_t>(l4.size()));
    l3.push_back(proto);
    l3.push_back(64);
    l3.insert(l3.end(), ft.src_addr.begin(), ft.src_addr.end());
    l3.insert(l3.end(), ft.dst_addr.begin(), ft.dst_addr.end());
  }
  l3.insert(l3.end(), l4.begin(), l4.end());

  if (link == LinkType::kRawIp) return l3;
  std::vector<std::uint8_t> frame{0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01};
  put16(frame, v4 ? kEtherIpv4 : kEtherIpv6);
  frame.insert(frame.end(), l3.begin(), l3.end());
  return frame;
}

}  // namespace

CaptureResult parse_pcap_bytes(std::span<const std::uint8_t> bytes,
                               LinkType link_type) {
  if (bytes.size() < kGlobalHeaderLen)
    throw MalformedCapture("truncated global header (" +
                           std::to_string(bytes.size()) + " bytes)");
  ByteOrder order;
  std::uint32_t magic = order.u32(bytes.data());
  bool nanos = false;
  if (magic == kMagicMicros || magic == kMagicNanos) {
    nanos = magic == kMagicNanos;
  } else if (__builtin_bswap32(magic) == kMagicMicros ||
             __builtin_bswap32(magic) == kMagicNanos) {
    order.swapped = true;
    nanos = __builtin_bswap32(magic) == kMagicNanos;
  } else {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw MalformedCapture(std::string("bad magic ") + buf);
  }

  CaptureResult result;
  std::size_t pos = kGlobalHeaderLen;
  const double frac_scale = nanos ? 1e-9 : 1e-6;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < kRecordHeaderLen) {
      ++result.skipped;  // truncated trailing record header
      break;
    }
    const std::uint8_t* hdr = bytes.data() + pos;
    std::uint32_t sec = order.u32(hdr);
    std::uint32_t frac = order.u32(hdr + 4);
    std::uint32_t incl = order.u32(hdr + 8);
    pos += kRecordHeaderLen;
    if (incl > bytes.size() - pos) {
      ++result.skipped;
      break;
    }
    PacketRecord rec;
    rec.timestamp = static_cast<double>(sec) + static_cast<double>(frac) * frac_scale;
    if (parse_frame(bytes.data() + pos, incl, link_type, rec)) {
      result.records.push_back(std::move(rec));
    } else {
      ++result.skipped;
    }
    pos += incl;
  }
  return result;
}

CaptureResult parse_pcap(const std::filesystem::path& path, LinkType link_type) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_pcap_bytes(bytes, link_type);
  } catch (const MalformedCapture& e) {
    throw MalformedCapture(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pcap(const std::vector<PacketRecord>& records,
                                      LinkType link_type) {
  std::vector<std::uint8_t> out;
  put_le32(out, kMagicMicros);
  out.insert(out.end(), {2, 0, 4, 0});  // version 2.4
  put_le32(out, 0);                     // thiszone
  put_le32(out, 0);                     // sigfigs
  put_le32(out, 65535);                 // snaplen
  put_le32(out, link_type == LinkType::kEthernet ? 1 : 101);
  for (const auto& rec : records) {
    auto frame = build_frame(rec, link_type);
    double whole = std::floor(rec.timestamp);
    auto sec = static_cast<std::uint32_t>(whole);
    auto usec = static_cast<std::uint32_t>(std::llround((rec.timestamp - whole) * 1e6));
    if (usec >= 1000000) {
      ++sec;
      usec -= 1000000;
    }
    put_le32(out, sec);
    put_le32(out, usec);
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

void write_pcap(const std::filesystem::path& path,
                const std::vector<PacketRecord>& records, LinkType link_type) {
  auto bytes = encode_pcap(records, link_type);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& records) {
  // Canonical key: the lexicographically smaller orientation of the tuple.
  std::map<FiveTuple, std::size_t> index;
  std::vector<Flow> flows;
  std::vector<FiveTuple> initiator;
  for (const auto& rec : records) {
    FiveTuple rev = rec.five_tuple.reversed();
    const FiveTuple& key = std::min(rec.five_tuple, rev);
    auto [it, inserted] = index.try_emplace(key, flows.size());
    if (inserted) {
      Flow flow;
      flow.flow_id = format_address(rec.five_tuple.src_addr) + ":" +
                     std::to_string(rec.five_tuple.src_port) + "-" +
                     format_address(rec.five_tuple.dst_addr) + ":" +
                     std::to_string(rec.five_tuple.dst_port) + "/" +
                     (rec.five_tuple.protocol == Transport::kTcp ? "tcp" : "udp");
      flows.push_back(std::move(flow));
      initiator.push_back(rec.five_tuple);
    }
    flows[it->second].packets.push_back(rec);
  }
  for (std::size_t i = 0; i < flows.size(); ++i) {
    auto& pkts = flows[i].packets;
    std::stable_sort(pkts.begin(), pkts.end(),
                     [](const PacketRecord& a, const PacketRecord& b) {
                       return a.timestamp < b.timestamp;
                     });
    // After sorting, the earliest packet's sender is the initiator.
    initiator[i] = pkts.front().five_tuple;
    for (auto& p : pkts) p.direction = p.five_tuple == initiator[i] ? 0 : 1;
  }
  return flows;
}

std::vector<Flow> filter_flows(const std::vector<Flow>& flows,
                               std::size_t min_packets) {
  if (min_packets < 1) throw InvalidConfig("min_packets must be >= 1");
  std::vector<Flow> out;
  for (const auto& f : flows)
    if (f.packets.size() >= min_packets) out.push_back(f);
  return out;
}

}  // namespace earlycorr
