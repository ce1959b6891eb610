#include "mladi/labels.hpp"

#include "mladi/errors.hpp"

namespace mladi {

std::optional<DialectLabel> DialectLabel::from_code(std::string_view code) {
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (kDialectCodes[i] == code) return DialectLabel(i);
  }
  return std::nullopt;
}

std::optional<DialectLabel> DialectLabel::from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (kDialectNames[i] == name) return DialectLabel(i);
  }
  return std::nullopt;
}

std::vector<DialectLabel> all_dialects() {
  std::vector<DialectLabel> v;
  v.reserve(kNumDialects);
  for (std::size_t i = 0; i < kNumDialects; ++i) v.emplace_back(i);
  return v;
}

std::string LabelVector::to_bitstring() const {
  std::string s(kNumDialects, '0');
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (bits_[i]) s[i] = '1';
  }
  return s;
}

LabelVector LabelVector::from_bitstring(std::string_view s) {
  if (s.size() != kNumDialects) {
    throw DataError("label bitstring must have exactly 18 characters, got " +
                    std::to_string(s.size()));
  }
  LabelVector v;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (s[i] == '1') {
      v.bits_[i] = true;
    } else if (s[i] != '0') {
      throw DataError("label bitstring may contain only 0/1");
    }
  }
  return v;
}

std::vector<DialectLabel> LabelVector::active() const {
  std::vector<DialectLabel> out;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (bits_[i]) out.emplace_back(i);
  }
  return out;
}

}  // namespace mladi
