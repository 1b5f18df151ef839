#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "earlycorr/flow.hpp"

namespace earlycorr {

/// N_p x N_b payload bytes scaled to [0,1], row-major. Rows past the last
/// packet and columns past each payload's end are zero.
struct RawView {
  int n_packets = 10;
  int n_bytes = 80;
  std::vector<float> values;

  float at(int row, int col) const { return values[row * n_bytes + col]; }
  bool operator==(const RawView&) const = default;
};

/// Quantized inter-packet delays; entries at or past valid_len are zero.
struct IpdView {
  std::vector<std::int32_t> values;
  int valid_len = 0;
  bool operator==(const IpdView&) const = default;
};

enum class HdrKind { kPayloadBytes, kTcpWindow, kIpd, kDirection };

const char* to_string(HdrKind kind);
HdrKind hdr_kind_from_string(const std::string& s);

/// Per-packet header scalar; kIpd holds the delay to the previous packet in
/// seconds (0 for the first packet).
struct HdrView {
  HdrKind kind = HdrKind::kPayloadBytes;
  std::vector<double> values;
  int valid_len = 0;
};

struct MultiViewSample {
  RawView raw;
  // Token sequence consumed by the recurrent branch. Holds quantized IPDs for
  // the default second view and quantized header values for HDR views.
  IpdView ipd;
  std::string flow_id;
  int window_index = 0;
};

RawView extract_raw(const Flow& flow, int n_packets = 10, int n_bytes = 80);

/// floor(delay_ms / quantum_ms) clamped to [0, vocab-1]. A 1 ns tolerance
/// absorbs floating-point error in timestamp differences.
std::int32_t quantize_delay(double seconds, double quantum_ms = 1.0,
                            std::int32_t vocab = 10000);

IpdView extract_ipds(const Flow& flow, int length = 200, double quantum_ms = 1.0,
                     std::int32_t vocab = 10000);

HdrView extract_hdr(const Flow& flow, HdrKind kind, int length = 200);

/// k windows of width width_frac*T with equal stride over the flow's
/// duration T. A flow whose packets share one timestamp yields k copies of
/// itself.
std::vector<Flow> window_flow(const Flow& flow, int k = 5,
                              double width_frac = 1.0 / 3.0);

/// Which sequence feeds the recurrent branch.
struct SecondView {
  enum class Source { kIpd, kHdr } source = Source::kIpd;
  HdrKind hdr_kind = HdrKind::kIpd;

  std::string name() const;
  static SecondView parse(const std::string& s);
  bool operator==(const SecondView&) const = default;
};

struct SampleOptions {
  int n_packets = 10;
  int n_bytes = 80;
  int seq_length = 200;
  double quantum_ms = 1.0;
  std::int32_t vocab = 10000;
  SecondView second_view;
};

/// Builds the model input for one (window) flow. Unlike the extractors it
/// tolerates flows too short for a view and returns zero views instead.
MultiViewSample make_sample(const Flow& flow, const SampleOptions& opts = {});

/// Truncates the flow to max_packets (0 keeps all), windows it and builds one
/// sample per window.
std::vector<MultiViewSample> window_samples(const Flow& flow, int max_packets, int k,
                                            double width_frac, const SampleOptions& opts);

/// Quantizes an HDR view into tokens for the recurrent branch.
IpdView hdr_tokens(const HdrView& view, double quantum_ms = 1.0,
                   std::int32_t vocab = 10000);

}  // namespace earlycorr
