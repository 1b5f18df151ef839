#include "earlycorr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "earlycorr/error.hpp"

namespace earlycorr {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");

void save_checkpoint(Model<float>& model, const json& metadata, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json table = json::array();
  const auto params = model.params();
  for (const auto* p : params)
    table.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  json manifest = {{"format", "earlycorr-checkpoint-1"},
                   {"model", model.config().to_json()},
                   {"metadata", metadata},
                   {"params", table}};

  auto blob_path = dir / kCheckpointParams;
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot write " + blob_path.string());
  for (const auto* p : params)
    blob.write(reinterpret_cast<const char*>(p->value.data()),
               static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  if (!blob) throw IoError("write failed for " + blob_path.string());

  auto manifest_path = dir / kCheckpointManifest;
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + manifest_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelConfig* expected) {
  auto manifest_path = dir / kCheckpointManifest;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  ModelConfig cfg = ModelConfig::from_json(manifest.value("model", json::object()));
  if (expected && !(*expected == cfg))
    throw CheckpointMismatch("model config in " + manifest_path.string() +
                             " differs from the requested one");

  Checkpoint ck;
  ck.model = std::make_unique<Model<float>>(cfg);
  ck.metadata = manifest.value("metadata", json::object());
  const auto params = ck.model->params();
  const json& table = manifest.at("params");
  if (!table.is_array() || table.size() != params.size())
    throw CheckpointMismatch("parameter table has " + std::to_string(table.size()) +
                             " entries, model has " + std::to_string(params.size()));

  auto blob_path = dir / kCheckpointParams;
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open " + blob_path.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    const json& row = table[i];
    if (row.value("name", "") != p->name || row.value("rows", -1L) != p->value.rows() ||
        row.value("cols", -1L) != p->value.cols())
      throw CheckpointMismatch("parameter " + std::to_string(i) + " ('" + p->name +
                               "') does not match the stored table");
    blob.read(reinterpret_cast<char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!blob) throw CheckpointMismatch("parameter blob " + blob_path.string() + " is truncated");
  }
  if (blob.peek() != std::char_traits<char>::eof())
    throw CheckpointMismatch("parameter blob " + blob_path.string() + " has trailing data");
  return ck;
}

}  // namespace earlycorr
