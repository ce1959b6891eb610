#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mladi {

// Shortest round-tripping decimal form of a double (via std::to_chars).
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);

std::vector<std::string> split_tabs(std::string_view line);
std::string join_tabs(const std::vector<std::string>& fields);

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Write via temp file + rename so partially written artifacts never appear
// under the final name.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// FNV-1a 64 over raw bytes, hex-encoded. Used for input checksums in manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string checksum_hex(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace mladi
