#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "earlycorr/flow.hpp"

namespace earlycorr {

enum class LinkType { kEthernet, kRawIp };

struct CaptureResult {
  std::vector<PacketRecord> records;
  // Non-IP, non-TCP/UDP or truncated frames.
  std::size_t skipped = 0;
};

/// Reads a classic (non-ng) pcap file of either byte order.
/// Throws MalformedCapture on a bad magic or truncated global header.
CaptureResult parse_pcap(const std::filesystem::path& path, LinkType link_type);
CaptureResult parse_pcap_bytes(std::span<const std::uint8_t> bytes,
                               LinkType link_type);

/// Writes little-endian microsecond pcap. Frames are synthesized from the
/// records' five-tuple, payload and window; used for round-trip tests and
/// for exporting synthetic flows.
void write_pcap(const std::filesystem::path& path,
                const std::vector<PacketRecord>& records, LinkType link_type);
std::vector<std::uint8_t> encode_pcap(const std::vector<PacketRecord>& records,
                                      LinkType link_type);

/// Groups records by direction-agnostic five-tuple. The first sender of a
/// flow owns direction 0. Flow order follows first appearance.
std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& records);

std::vector<Flow> filter_flows(const std::vector<Flow>& flows,
                               std::size_t min_packets = 8);

}  // namespace earlycorr
