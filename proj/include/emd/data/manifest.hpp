#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace emd::data {

enum class Role { clean, noise };
enum class Split { train, eval };

struct ManifestEntry {
  std::string path;
  Role role = Role::clean;
  Split split = Split::train;
  std::string emb;  // optional EMB1 path for clean entries
};

// JSON-lines manifest: {"path": ..., "role": "clean"|"noise",
// "split": "train"|"eval", "emb": optional}.
struct Manifest {
  std::vector<ManifestEntry> entries;

  // Throws ConfigError on duplicate paths.
  void validate() const;
  std::vector<ManifestEntry> select(Role role, Split split) const;
};

// Relative paths are resolved against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::string to_string(Role r);
std::string to_string(Split s);

}  // namespace emd::data
