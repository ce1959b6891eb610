#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mladi {

// The 18 country-level dialects, ISO 3166-1 alpha-2, in canonical
// (alphabetical) order. Every serialized vector uses this order.
inline constexpr std::size_t kNumDialects = 18;

inline constexpr std::array<std::string_view, kNumDialects> kDialectCodes = {
    "AE", "BH", "DZ", "EG", "IQ", "JO", "KW", "LB", "LY",
    "MA", "OM", "PS", "QA", "SA", "SD", "SY", "TN", "YE"};

// English country names, aligned with kDialectCodes.
inline constexpr std::array<std::string_view, kNumDialects> kDialectNames = {
    "UAE",     "Bahrain", "Algeria", "Egypt",   "Iraq",  "Jordan",
    "Kuwait",  "Lebanon", "Libya",   "Morocco", "Oman",  "Palestine",
    "Qatar",   "Saudi Arabia", "Sudan", "Syria", "Tunisia", "Yemen"};

class DialectLabel {
 public:
  DialectLabel() = default;
  constexpr explicit DialectLabel(std::size_t index) : index_(index) {}

  static std::optional<DialectLabel> from_code(std::string_view code);
  static std::optional<DialectLabel> from_name(std::string_view name);

  constexpr std::size_t index() const { return index_; }
  std::string_view code() const { return kDialectCodes[index_]; }
  std::string_view name() const { return kDialectNames[index_]; }

  friend constexpr bool operator==(DialectLabel a, DialectLabel b) { return a.index_ == b.index_; }
  friend constexpr bool operator!=(DialectLabel a, DialectLabel b) { return a.index_ != b.index_; }
  friend constexpr bool operator<(DialectLabel a, DialectLabel b) { return a.index_ < b.index_; }

 private:
  std::size_t index_ = 0;
};

std::vector<DialectLabel> all_dialects();

// 18-bit binary acceptability vector in canonical label order.
class LabelVector {
 public:
  LabelVector() = default;

  bool get(DialectLabel d) const { return bits_[d.index()]; }
  void set(DialectLabel d, bool v = true) { bits_[d.index()] = v; }
  bool get(std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_[i] = v; }

  std::size_t cardinality() const { return bits_.count(); }

  static LabelVector all_ones() {
    LabelVector v;
    v.bits_.set();
    return v;
  }

  // "010..." string, index 0 = first canonical label.
  std::string to_bitstring() const;
  static LabelVector from_bitstring(std::string_view s);

  std::vector<DialectLabel> active() const;

  friend bool operator==(const LabelVector& a, const LabelVector& b) { return a.bits_ == b.bits_; }
  friend bool operator!=(const LabelVector& a, const LabelVector& b) { return a.bits_ != b.bits_; }

 private:
  std::bitset<kNumDialects> bits_;
};

}  // namespace mladi
