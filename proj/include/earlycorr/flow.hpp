#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace earlycorr {

enum class Transport : std::uint8_t { kTcp = 6, kUdp = 17 };

/// Addresses are kept as 16 raw bytes; IPv4 uses the IPv4-mapped IPv6 form.
struct FiveTuple {
  std::array<std::uint8_t, 16> src_addr{};
  std::array<std::uint8_t, 16> dst_addr{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Transport protocol = Transport::kTcp;

  /// Same tuple with the endpoints swapped.
  FiveTuple reversed() const;
  auto operator<=>(const FiveTuple&) const = default;
};

std::string format_address(const std::array<std::uint8_t, 16>& addr);

struct PacketRecord {
  double timestamp = 0.0;  // seconds
  std::uint8_t direction = 0;  // 0 = initiator -> responder
  std::vector<std::uint8_t> payload;
  std::uint32_t tcp_window = 0;  // 0 for UDP
  FiveTuple five_tuple;

  std::size_t payload_len() const { return payload.size(); }
  bool operator==(const PacketRecord&) const = default;
};

enum class FlowRole : std::uint8_t { kUnknown, kEntry, kExit };

const char* to_string(FlowRole role);
FlowRole role_from_string(const std::string& s);

struct Flow {
  std::string flow_id;
  FlowRole role = FlowRole::kUnknown;
  std::optional<std::string> pair_id;
  std::vector<PacketRecord> packets;
  // Set on flows produced by window_flow; -1 for whole flows.
  int window_index = -1;

  std::size_t size() const { return packets.size(); }
  bool empty() const { return packets.empty(); }
  double duration() const {
    return packets.empty() ? 0.0
                           : packets.back().timestamp - packets.front().timestamp;
  }
  bool operator==(const Flow&) const = default;
};

/// Copy of the flow keeping only its first `n` packets.
Flow truncate_flow(const Flow& flow, std::size_t n);

}  // namespace earlycorr
