#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

namespace mladi {

inline constexpr char kToolVersion[] = "0.1.0";

// Every artifact-producing run writes exactly one of these next to its
// outputs: resolved config, seeds, input checksums, thresholds as exact
// rationals, and timestamps.
struct RunManifest {
  std::string subcommand;
  nlohmann::json resolved_config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> input_checksums;

  void add_input(const std::string& name, const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace mladi
