#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fabtwin {

inline constexpr int kManifestFormatVersion = 1;

struct ManifestPair {
  std::string layout_path;
  std::vector<std::string> fabricated_paths;
  std::string structure_id;
  std::uint64_t seed = 0;
};

/// Paired layout / fabricated-outcome dataset. Relative paths resolve
/// against `base_dir` (the manifest's own directory when loaded from disk).
struct DatasetManifest {
  int format_version = kManifestFormatVersion;
  double resolution_nm_per_px = 1.0;
  std::vector<ManifestPair> pairs;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

struct ManifestViolation {
  int pair_index = -1;  // -1 for manifest-level rules
  std::string rule;
};

nlohmann::json to_json(const DatasetManifest& m);
/// Throws InvalidInput on structurally malformed JSON.
DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Empty iff every manifest invariant holds. Unreadable files are reported,
/// never thrown.
std::vector<ManifestViolation> validate_manifest(const DatasetManifest& manifest);

std::string describe(const ManifestViolation& v);

}  // namespace fabtwin
