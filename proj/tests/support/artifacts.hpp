#pragma once

#include <filesystem>
#include <json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kdqa/cli.hpp"
#include "tempdir.hpp"

namespace kdqa::testing {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run_kdqa(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Manifest with the fields that legitimately differ between reruns removed.
inline nlohmann::json stable_manifest(const std::filesystem::path& file) {
  auto j = nlohmann::json::parse(read_file(file));
  j.erase("started_at");
  j.erase("finished_at");
  j.erase("out");
  if (j.contains("results") && j["results"].is_object()) j["results"].erase("wall_seconds");
  return j;
}

/// Names of files that differ between two artifact directories, or that
/// exist in only one of them. Manifests are compared without timestamps.
inline std::vector<std::string> differing_files(const std::filesystem::path& a,
                                                const std::filesystem::path& b) {
  std::set<std::string> names;
  for (const auto& dir : {a, b}) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) names.insert(e.path().filename().string());
  }
  std::vector<std::string> diff;
  for (const auto& n : names) {
    if (!std::filesystem::exists(a / n) || !std::filesystem::exists(b / n)) {
      diff.push_back(n);
    } else if (n == "manifest.json") {
      if (stable_manifest(a / n) != stable_manifest(b / n)) diff.push_back(n);
    } else if (read_file(a / n) != read_file(b / n)) {
      diff.push_back(n);
    }
  }
  return diff;
}

}  // namespace kdqa::testing
