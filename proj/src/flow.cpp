#include "earlycorr/flow.hpp"

#include <arpa/inet.h>

#include "earlycorr/error.hpp"

namespace earlycorr {

FiveTuple FiveTuple::reversed() const {
  FiveTuple r = *this;
  std::swap(r.src_addr, r.dst_addr);
  std::swap(r.src_port, r.dst_port);
  return r;
}

std::string format_address(const std::array<std::uint8_t, 16>& addr) {
  char buf[INET6_ADDRSTRLEN];
  bool mapped = true;
  for (int i = 0; i < 10; ++i) mapped = mapped && addr[i] == 0;
  mapped = mapped && addr[10] == 0xff && addr[11] == 0xff;
  if (mapped) {
    inet_ntop(AF_INET, addr.data() + 12, buf, sizeof buf);
    return buf;
  }
  inet_ntop(AF_INET6, addr.data(), buf, sizeof buf);
  return std::string("[") + buf + "]";
}

const char* to_string(FlowRole role) {
  switch (role) {
    case FlowRole::kEntry: return "entry";
    case FlowRole::kExit: return "exit";
    case FlowRole::kUnknown: break;
  }
  return "unknown";
}

FlowRole role_from_string(const std::string& s) {
  if (s == "entry") return FlowRole::kEntry;
  if (s == "exit") return FlowRole::kExit;
  if (s == "unknown") return FlowRole::kUnknown;
  throw InvalidConfig("unknown flow role '" + s + "'");
}

Flow truncate_flow(const Flow& flow, std::size_t n) {
  Flow out;
  out.flow_id = flow.flow_id;
  out.role = flow.role;
  out.pair_id = flow.pair_id;
  out.window_index = flow.window_index;
  std::size_t keep = std::min(n, flow.packets.size());
  out.packets.assign(flow.packets.begin(), flow.packets.begin() + keep);
  return out;
}

}  // namespace earlycorr
