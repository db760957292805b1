#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fabtwin/networks.hpp"
#include "fabtwin/png.hpp"

namespace fabtwin {

// GFCK layout (all integers little-endian):
//   "GFCK" | u32 format_version | u64 header_len | header JSON | payload
// The header holds the architecture and a tensor directory
// [{name, shape, offset}] with byte offsets into the payload. The payload is
// raw little-endian float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind { GenFab, UNet, McDropout, Ensemble };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

/// One or more generator-family networks sharing one architecture.
struct ModelCheckpoint {
  ModelKind kind = ModelKind::GenFab;
  GeneratorConfig generator;
  double dropout_p = 0.0;
  std::vector<nn::UNetGenerator<float>> members;
  nlohmann::json metadata = nlohmann::json::object();
};

Bytes serialize_checkpoint(ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fabtwin
