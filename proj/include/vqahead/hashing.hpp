#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vqahead {

// Incremental FNV-1a 64-bit hash, used to fingerprint configuration data
// (rule tables, vocabularies) in file metadata.
class Fnv1a64 {
 public:
  Fnv1a64& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash_ ^= c;
      hash_ *= 0x100000001B3ULL;
    }
    return *this;
  }

  Fnv1a64& update_sep() { return update(std::string_view("\x1e", 1)); }

  std::uint64_t value() const { return hash_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = hash_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xF];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

}  // namespace vqahead
