#include "fabtwin/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "fabtwin/error.hpp"

namespace fabtwin {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_le(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

std::string member_prefix(const ModelCheckpoint& c, std::size_t k) {
  return c.members.size() > 1 || c.kind == ModelKind::Ensemble ? "member" + std::to_string(k) + "/" : "";
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GenFab: return "genfab";
    case ModelKind::UNet: return "unet";
    case ModelKind::McDropout: return "mcdropout";
    case ModelKind::Ensemble: return "ensemble";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "genfab") return ModelKind::GenFab;
  if (s == "unet") return ModelKind::UNet;
  if (s == "mcdropout") return ModelKind::McDropout;
  if (s == "ensemble") return ModelKind::Ensemble;
  throw InvalidInput("unknown model kind '" + s + "'");
}

Bytes serialize_checkpoint(ModelCheckpoint& ckpt) {
  if (ckpt.members.empty()) throw InvalidInput("checkpoint has no models");
  nlohmann::json dir = nlohmann::json::array();
  Bytes payload;
  for (std::size_t k = 0; k < ckpt.members.size(); ++k) {
    for (auto* p : ckpt.members[k].parameters()) {
      dir.push_back({{"name", member_prefix(ckpt, k) + p->name}, {"shape", p->shape}, {"offset", payload.size()}});
      const auto* bytes = reinterpret_cast<const std::uint8_t*>(p->value.data());
      payload.insert(payload.end(), bytes, bytes + p->value.size() * sizeof(float));
    }
  }
  nlohmann::json header = {{"kind", to_string(ckpt.kind)},
                           {"generator", to_json(ckpt.generator)},
                           {"dropout_p", ckpt.dropout_p},
                           {"members", ckpt.members.size()},
                           {"metadata", ckpt.metadata},
                           {"tensors", dir}};
  const std::string h = header.dump();

  Bytes out = {'G', 'F', 'C', 'K'};
  put_le(out, kCheckpointVersion, 4);
  put_le(out, h.size(), 8);
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "GFCK", 4) != 0) {
    throw UnsupportedFormat("not a GFCK checkpoint");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes.data() + 4, 4));
  if (version != kCheckpointVersion) throw UnsupportedFormat("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = get_le(bytes.data() + 8, 8);
  if (16 + hlen > bytes.size()) throw UnsupportedFormat("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw UnsupportedFormat(std::string("corrupt checkpoint header: ") + e.what());
  }
  const auto payload = bytes.subspan(16 + hlen);

  ModelCheckpoint ckpt;
  try {
    ckpt.kind = parse_model_kind(header.at("kind").get<std::string>());
    ckpt.generator = generator_config_from_json(header.at("generator"));
    ckpt.dropout_p = header.at("dropout_p").get<double>();
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
    const auto members = header.at("members").get<std::size_t>();
    for (std::size_t k = 0; k < members; ++k) ckpt.members.emplace_back(ckpt.generator, ckpt.dropout_p);

    std::size_t idx = 0;
    const auto& dir = header.at("tensors");
    for (std::size_t k = 0; k < members; ++k) {
      for (auto* p : ckpt.members[k].parameters()) {
        if (idx >= dir.size()) throw UnsupportedFormat("checkpoint tensor directory is too short");
        const auto& entry = dir[idx++];
        if (entry.at("name").get<std::string>() != member_prefix(ckpt, k) + p->name ||
            entry.at("shape").get<std::vector<int>>() != p->shape) {
          throw UnsupportedFormat("checkpoint tensor " + entry.at("name").get<std::string>() +
                                  " does not match the architecture");
        }
        const auto off = entry.at("offset").get<std::size_t>();
        const std::size_t nbytes = p->value.size() * sizeof(float);
        if (off + nbytes > payload.size()) throw UnsupportedFormat("checkpoint payload is truncated");
        std::memcpy(p->value.data(), payload.data() + off, nbytes);
      }
    }
    if (idx != dir.size()) throw UnsupportedFormat("checkpoint has unexpected extra tensors");
  } catch (const nlohmann::json::exception& e) {
    throw UnsupportedFormat(std::string("malformed checkpoint header: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw UnsupportedFormat(std::string("bad architecture in checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, ModelCheckpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace fabtwin
