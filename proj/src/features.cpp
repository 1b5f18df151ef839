#include "earlycorr/features.hpp"

#include <algorithm>
#include <cmath>

#include "earlycorr/error.hpp"

namespace earlycorr {

const char* to_string(HdrKind kind) {
  switch (kind) {
    case HdrKind::kPayloadBytes: return "payload_bytes";
    case HdrKind::kTcpWindow: return "tcp_window";
    case HdrKind::kIpd: return "ipd";
    case HdrKind::kDirection: return "direction";
  }
  return "?";
}

HdrKind hdr_kind_from_string(const std::string& s) {
  if (s == "payload_bytes") return HdrKind::kPayloadBytes;
  if (s == "tcp_window") return HdrKind::kTcpWindow;
  if (s == "ipd") return HdrKind::kIpd;
  if (s == "direction") return HdrKind::kDirection;
  throw InvalidConfig("unknown HDR kind '" + s + "'");
}

std::string SecondView::name() const {
  if (source == Source::kIpd) return "ipd";
  return std::string("hdr:") + to_string(hdr_kind);
}

SecondView SecondView::parse(const std::string& s) {
  SecondView v;
  if (s == "ipd") return v;
  if (s.rfind("hdr:", 0) == 0) {
    v.source = Source::kHdr;
    v.hdr_kind = hdr_kind_from_string(s.substr(4));
    return v;
  }
  throw InvalidConfig("unknown second view '" + s + "'");
}

RawView extract_raw(const Flow& flow, int n_packets, int n_bytes) {
  if (flow.empty()) throw EmptyFlow("flow '" + flow.flow_id + "' has no packets");
  RawView view;
  view.n_packets = n_packets;
  view.n_bytes = n_bytes;
  view.values.assign(static_cast<std::size_t>(n_packets) * n_bytes, 0.0f);
  int rows = std::min<int>(n_packets, static_cast<int>(flow.packets.size()));
  for (int i = 0; i < rows; ++i) {
    const auto& payload = flow.packets[i].payload;
    int cols = std::min<int>(n_bytes, static_cast<int>(payload.size()));
    for (int j = 0; j < cols; ++j)
      view.values[i * n_bytes + j] = static_cast<float>(payload[j]) / 255.0f;
  }
  return view;
}

std::int32_t quantize_delay(double seconds, double quantum_ms, std::int32_t vocab) {
  double q = std::floor(seconds * 1000.0 / quantum_ms + 1e-6);
  if (!(q > 0.0)) return 0;
  if (q >= static_cast<double>(vocab - 1)) return vocab - 1;
  return static_cast<std::int32_t>(q);
}

IpdView extract_ipds(const Flow& flow, int length, double quantum_ms,
                     std::int32_t vocab) {
  if (flow.packets.size() < 2)
    throw TooShort("flow '" + flow.flow_id + "' needs at least 2 packets for IPDs");
  IpdView view;
  view.values.assign(length, 0);
  view.valid_len = std::min<int>(static_cast<int>(flow.packets.size()) - 1, length);
  for (int j = 0; j < view.valid_len; ++j) {
    double dt = flow.packets[j + 1].timestamp - flow.packets[j].timestamp;
    view.values[j] = quantize_delay(dt, quantum_ms, vocab);
  }
  return view;
}

HdrView extract_hdr(const Flow& flow, HdrKind kind, int length) {
  if (flow.empty()) throw EmptyFlow("flow '" + flow.flow_id + "' has no packets");
  HdrView view;
  view.kind = kind;
  view.values.assign(length, 0.0);
  view.valid_len = std::min<int>(static_cast<int>(flow.packets.size()), length);
  for (int i = 0; i < view.valid_len; ++i) {
    const auto& p = flow.packets[i];
    switch (kind) {
      case HdrKind::kPayloadBytes:
        view.values[i] = static_cast<double>(p.payload.size());
        break;
      case HdrKind::kTcpWindow:
        view.values[i] =
            p.five_tuple.protocol == Transport::kUdp ? 0.0 : static_cast<double>(p.tcp_window);
        break;
      case HdrKind::kIpd:
        view.values[i] = i == 0 ? 0.0 : p.timestamp - flow.packets[i - 1].timestamp;
        break;
      case HdrKind::kDirection:
        view.values[i] = p.direction ? 1.0 : 0.0;
        break;
    }
  }
  return view;
}

IpdView hdr_tokens(const HdrView& view, double quantum_ms, std::int32_t vocab) {
  IpdView out;
  out.values.assign(view.values.size(), 0);
  out.valid_len = view.valid_len;
  for (int i = 0; i < view.valid_len; ++i) {
    double v = view.values[i];
    if (view.kind == HdrKind::kIpd) {
      out.values[i] = quantize_delay(v, quantum_ms, vocab);
    } else {
      out.values[i] = static_cast<std::int32_t>(
          std::clamp(v, 0.0, static_cast<double>(vocab - 1)));
    }
  }
  return out;
}

std::vector<Flow> window_flow(const Flow& flow, int k, double width_frac) {
  if (k < 1) throw InvalidConfig("window count must be >= 1");
  if (!(width_frac > 0.0 && width_frac <= 1.0))
    throw InvalidConfig("window width fraction must be in (0, 1]");
  if (flow.empty()) throw EmptyFlow("flow '" + flow.flow_id + "' has no packets");

  const double t0 = flow.packets.front().timestamp;
  const double total = flow.duration();
  std::vector<Flow> windows;
  windows.reserve(k);
  auto make_window = [&](int index) {
    Flow w;
    w.flow_id = flow.flow_id;
    w.role = flow.role;
    w.pair_id = flow.pair_id;
    w.window_index = index;
    return w;
  };

  if (!(total > 0.0)) {
    for (int i = 0; i < k; ++i) {
      Flow w = make_window(i);
      w.packets = flow.packets;
      windows.push_back(std::move(w));
    }
    return windows;
  }

  const double width = k == 1 ? total : width_frac * total;
  const double stride = k == 1 ? 0.0 : (total - width) / (k - 1);
  for (int i = 0; i < k; ++i) {
    const double lo = i * stride;
    const double hi = i == k - 1 ? total : lo + width;
    Flow w = make_window(i);
    for (const auto& p : flow.packets) {
      double rel = p.timestamp - t0;
      if (rel >= lo && rel <= hi) w.packets.push_back(p);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

MultiViewSample make_sample(const Flow& flow, const SampleOptions& opts) {
  MultiViewSample s;
  s.flow_id = flow.flow_id;
  s.window_index = std::max(flow.window_index, 0);
  if (flow.empty()) {
    s.raw.n_packets = opts.n_packets;
    s.raw.n_bytes = opts.n_bytes;
    s.raw.values.assign(static_cast<std::size_t>(opts.n_packets) * opts.n_bytes, 0.0f);
  } else {
    s.raw = extract_raw(flow, opts.n_packets, opts.n_bytes);
  }

  if (opts.second_view.source == SecondView::Source::kIpd) {
    if (flow.packets.size() >= 2) {
      s.ipd = extract_ipds(flow, opts.seq_length, opts.quantum_ms, opts.vocab);
    } else {
      s.ipd.values.assign(opts.seq_length, 0);
    }
  } else if (flow.empty()) {
    s.ipd.values.assign(opts.seq_length, 0);
  } else {
    s.ipd = hdr_tokens(extract_hdr(flow, opts.second_view.hdr_kind, opts.seq_length),
                       opts.quantum_ms, opts.vocab);
  }
  return s;
}

std::vector<MultiViewSample> window_samples(const Flow& flow, int max_packets, int k,
                                            double width_frac, const SampleOptions& opts) {
  std::vector<MultiViewSample> out;
  out.reserve(k);
  const Flow cut = max_packets > 0 ? truncate_flow(flow, max_packets) : flow;
  for (const Flow& w : window_flow(cut, k, width_frac)) out.push_back(make_sample(w, opts));
  return out;
}

}  // namespace earlycorr
