#include "mladi/manifest.hpp"

#include <chrono>
#include <ctime>

#include "mladi/io.hpp"
#include "mladi/rational.hpp"

namespace mladi {

using nlohmann::json;

void RunManifest::add_input(const std::string& name, const std::filesystem::path& path) {
  input_checksums[name] = file_checksum(path);
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json RunManifest::to_json() const {
  json j;
  j["tool"] = "mladi";
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["timestamp"] = utc_now();
  j["config"] = resolved_config;
  j["seeds"] = seeds;
  j["thresholds"] = {{"msa", kMsaThreshold.str()},
                     {"high_dialectness", kHighDialectnessThreshold.str()},
                     {"low_mid_boundary", kLowMidBoundary.str()}};
  j["inputs"] = input_checksums;
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
  atomic_write(path, to_json().dump(2) + "\n");
}

}  // namespace mladi
