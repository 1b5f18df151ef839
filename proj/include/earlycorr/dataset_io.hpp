#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "earlycorr/flow.hpp"

namespace earlycorr {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// One flow per line:
/// {"flow_id","role","pair_id","packets":[{"t","dir","win","len","payload"}]}
std::string flow_to_jsonl(const Flow& flow);
Flow flow_from_jsonl(const std::string& line, std::size_t line_no);

void write_dataset(std::ostream& out, const std::vector<Flow>& flows);
void write_dataset(const std::filesystem::path& path, const std::vector<Flow>& flows);
std::vector<Flow> read_dataset(std::istream& in);
std::vector<Flow> read_dataset(const std::filesystem::path& path);

}  // namespace earlycorr
