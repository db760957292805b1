#include "fabtwin/manifest.hpp"

#include <fstream>
#include <optional>

#include "fabtwin/error.hpp"
#include "fabtwin/png.hpp"

namespace fabtwin {

namespace fs = std::filesystem;

fs::path DatasetManifest::resolve(const std::string& p) const {
  fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) {
    pairs.push_back({{"layout_path", p.layout_path},
                     {"fabricated_paths", p.fabricated_paths},
                     {"structure_id", p.structure_id},
                     {"seed", p.seed}});
  }
  return {{"format_version", m.format_version},
          {"resolution_nm_per_px", m.resolution_nm_per_px},
          {"pairs", pairs}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j, fs::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    m.format_version = j.at("format_version").get<int>();
    m.resolution_nm_per_px = j.value("resolution_nm_per_px", 1.0);
    for (const auto& p : j.at("pairs")) {
      ManifestPair pair;
      pair.layout_path = p.at("layout_path").get<std::string>();
      pair.fabricated_paths = p.at("fabricated_paths").get<std::vector<std::string>>();
      pair.structure_id = p.value("structure_id", std::string{});
      pair.seed = p.value("seed", std::uint64_t{0});
      m.pairs.push_back(std::move(pair));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

std::vector<ManifestViolation> validate_manifest(const DatasetManifest& manifest) {
  std::vector<ManifestViolation> out;
  if (manifest.format_version != kManifestFormatVersion) {
    out.push_back({-1, "unsupported format_version " + std::to_string(manifest.format_version)});
  }
  if (!(manifest.resolution_nm_per_px > 0.0)) out.push_back({-1, "resolution_nm_per_px must be positive"});
  if (manifest.pairs.empty()) {
    out.push_back({-1, "pairs must be non-empty"});
    return out;
  }

  auto try_load = [&](int idx, const std::string& p) -> std::optional<BitMask> {
    const auto path = manifest.resolve(p);
    if (!fs::exists(path)) {
      out.push_back({idx, "missing file: " + p});
      return std::nullopt;
    }
    try {
      return load_mask(path);
    } catch (const std::exception& e) {
      out.push_back({idx, "unreadable file " + p + ": " + e.what()});
      return std::nullopt;
    }
  };

  for (int i = 0; i < static_cast<int>(manifest.pairs.size()); ++i) {
    const auto& pair = manifest.pairs[static_cast<std::size_t>(i)];
    if (pair.fabricated_paths.empty()) {
      out.push_back({i, "fabricated_paths must be non-empty"});
    }
    auto layout = try_load(i, pair.layout_path);
    for (const auto& fp : pair.fabricated_paths) {
      auto fab = try_load(i, fp);
      if (layout && fab && !same_dims(*layout, *fab)) {
        out.push_back({i, "dimension mismatch: layout " + std::to_string(layout->width()) + "x" +
                              std::to_string(layout->height()) + " vs " + fp + " " +
                              std::to_string(fab->width()) + "x" + std::to_string(fab->height())});
      }
    }
  }
  return out;
}

std::string describe(const ManifestViolation& v) {
  if (v.pair_index < 0) return v.rule;
  return "pair " + std::to_string(v.pair_index) + ": " + v.rule;
}

}  // namespace fabtwin
