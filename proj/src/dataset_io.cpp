#include "earlycorr/dataset_io.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "earlycorr/error.hpp"

namespace earlycorr {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> decode_table() {
  std::array<int, 256> t{};
  t.fill(-1);
  for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
  return t;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  static const auto table = decode_table();
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      char c = text[i + j];
      int d;
      if (c == '=') {
        // Padding only in the last quantum's final two positions.
        if (i + 4 != text.size() || j < 2) throw std::invalid_argument("misplaced base64 padding");
        d = 0;
        ++pad;
      } else {
        if (pad) throw std::invalid_argument("data after base64 padding");
        d = table[static_cast<unsigned char>(c)];
        if (d < 0) throw std::invalid_argument("invalid base64 character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::string flow_to_jsonl(const Flow& flow) {
  json j;
  j["flow_id"] = flow.flow_id;
  j["role"] = to_string(flow.role);
  j["pair_id"] = flow.pair_id ? json(*flow.pair_id) : json(nullptr);
  json pkts = json::array();
  for (const auto& p : flow.packets) {
    pkts.push_back({{"t", p.timestamp},
                    {"dir", p.direction},
                    {"win", p.tcp_window},
                    {"len", p.payload.size()},
                    {"payload", base64_encode(p.payload)}});
  }
  j["packets"] = std::move(pkts);
  return j.dump();
}

Flow flow_from_jsonl(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaViolation(line_no, "record is not an object");
  auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaViolation(line_no, std::string("missing \"") + key + "\"");
    return *it;
  };

  Flow flow;
  const json& id = require("flow_id");
  if (!id.is_string()) throw SchemaViolation(line_no, "\"flow_id\" must be a string");
  flow.flow_id = id.get<std::string>();

  const json& role = require("role");
  if (!role.is_string()) throw SchemaViolation(line_no, "\"role\" must be a string");
  try {
    flow.role = role_from_string(role.get<std::string>());
  } catch (const InvalidConfig&) {
    throw SchemaViolation(line_no, "unknown role '" + role.get<std::string>() + "'");
  }

  const json& pair = require("pair_id");
  if (pair.is_string()) {
    flow.pair_id = pair.get<std::string>();
  } else if (!pair.is_null()) {
    throw SchemaViolation(line_no, "\"pair_id\" must be a string or null");
  }

  const json& pkts = require("packets");
  if (!pkts.is_array()) throw SchemaViolation(line_no, "\"packets\" must be an array");
  flow.packets.reserve(pkts.size());
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    const json& p = pkts[i];
    auto where = "packet " + std::to_string(i) + ": ";
    if (!p.is_object()) throw SchemaViolation(line_no, where + "not an object");
    for (const char* key : {"t", "dir", "win", "len", "payload"})
      if (!p.contains(key))
        throw SchemaViolation(line_no, where + "missing \"" + key + "\"");
    if (!p["t"].is_number()) throw SchemaViolation(line_no, where + "\"t\" must be a number");
    if (!p["dir"].is_number_unsigned() || p["dir"].get<unsigned>() > 1)
      throw SchemaViolation(line_no, where + "\"dir\" must be 0 or 1");
    if (!p["win"].is_number_unsigned())
      throw SchemaViolation(line_no, where + "\"win\" must be a non-negative integer");
    if (!p["len"].is_number_unsigned())
      throw SchemaViolation(line_no, where + "\"len\" must be a non-negative integer");
    if (!p["payload"].is_string())
      throw SchemaViolation(line_no, where + "\"payload\" must be a base64 string");

    PacketRecord rec;
    rec.timestamp = p["t"].get<double>();
    rec.direction = static_cast<std::uint8_t>(p["dir"].get<unsigned>());
    rec.tcp_window = p["win"].get<std::uint32_t>();
    try {
      rec.payload = base64_decode(p["payload"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw SchemaViolation(line_no, where + e.what());
    }
    if (rec.payload.size() != p["len"].get<std::size_t>())
      throw SchemaViolation(line_no, where + "\"len\" disagrees with payload size");
    if (!flow.packets.empty() && rec.timestamp < flow.packets.back().timestamp)
      throw SchemaViolation(line_no, where + "timestamps not sorted");
    flow.packets.push_back(std::move(rec));
  }
  return flow;
}

void write_dataset(std::ostream& out, const std::vector<Flow>& flows) {
  for (const auto& f : flows) out << flow_to_jsonl(f) << '\n';
}

void write_dataset(const std::filesystem::path& path, const std::vector<Flow>& flows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset(out, flows);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Flow> read_dataset(std::istream& in) {
  std::vector<Flow> flows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    flows.push_back(flow_from_jsonl(line, line_no));
  }
  return flows;
}

std::vector<Flow> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_dataset(in);
  } catch (const SchemaViolation& e) {
    throw SchemaViolation(e.line(), path.string() + ": " + e.detail());
  }
}

}  // namespace earlycorr
