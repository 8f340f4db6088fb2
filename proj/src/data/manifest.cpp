#include "emd/data/manifest.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "emd/common/error.hpp"

namespace emd::data {

std::string to_string(Role r) { return r == Role::clean ? "clean" : "noise"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "eval"; }

void Manifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.path.empty()) throw ConfigError("manifest entry with empty path");
    if (!seen.insert(e.path).second) throw ConfigError("manifest lists " + e.path + " twice");
  }
}

std::vector<ManifestEntry> Manifest::select(Role role, Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.role == role && e.split == split) out.push_back(e);
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() || base.empty() ? fp : base / fp).lexically_normal().string();
  };
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": invalid JSON: " + e.what());
    }
    ManifestEntry e;
    try {
      e.path = resolve(j.at("path").get<std::string>());
      const std::string role = j.value("role", std::string("clean"));
      if (role == "clean") {
        e.role = Role::clean;
      } else if (role == "noise") {
        e.role = Role::noise;
      } else {
        throw ConfigError(where + ": role must be clean or noise, got " + role);
      }
      const std::string split = j.value("split", std::string("train"));
      if (split == "train") {
        e.split = Split::train;
      } else if (split == "eval") {
        e.split = Split::eval;
      } else {
        throw ConfigError(where + ": split must be train or eval, got " + split);
      }
      if (j.contains("emb")) e.emb = resolve(j.at("emb").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(where + ": " + ex.what());
    }
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  m.validate();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : m.entries) {
    nlohmann::json j = {{"path", e.path}, {"role", to_string(e.role)}, {"split", to_string(e.split)}};
    if (!e.emb.empty()) j["emb"] = e.emb;
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace emd::data
