#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vqahead/atomic_file.hpp"
#include "vqahead/binary_io.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/utf8.hpp"

namespace vqahead {

// CFV1 feature container, little-endian throughout:
//   magic   "CFV1" (43 46 56 31)
//   u32     version, must be 1
//   u32     dim D
//   u64     record count
// then per record:
//   u16     key byte length
//   bytes   key (UTF-8)
//   u32     variant (0 = canonical, >=1 = augmentation variants)
//   f32*D   values
// Records are stored sorted by (key, variant) so identical contents
// always produce identical bytes.

struct FeatureRecord {
  std::string key;
  std::uint32_t variant = 0;
  std::vector<float> values;
};

class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(std::uint32_t dim) : dim_(dim), dim_set_(true) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  // Caller-supplied records are validated as inputs, not file contents.
  void insert(FeatureRecord rec) {
    if (!is_valid_utf8(rec.key)) throw validation_error("feature key is not valid UTF-8");
    if (rec.key.size() > 0xFFFF)
      throw validation_error("feature key exceeds 65535 bytes: " + rec.key.substr(0, 64));
    if (dim_set_ && rec.values.size() != dim_)
      throw validation_error("feature '" + rec.key + "' has dimension " +
                             std::to_string(rec.values.size()) + ", expected " +
                             std::to_string(dim_));
    for (float v : rec.values)
      if (!std::isfinite(v))
        throw validation_error("non-finite value in feature '" + rec.key + "'");
    if (find(rec.key, rec.variant) != nullptr)
      throw validation_error("duplicate record (" + rec.key + ", variant " +
                             std::to_string(rec.variant) + ")");
    if (!dim_set_) {
      dim_ = static_cast<std::uint32_t>(rec.values.size());
      dim_set_ = true;
    }
    by_key_[rec.key].emplace(rec.variant, std::move(rec.values));
    ++count_;
  }

  const std::vector<float>* find(const std::string& key, std::uint32_t variant) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return nullptr;
    auto vit = it->second.find(variant);
    return vit == it->second.end() ? nullptr : &vit->second;
  }

  // All variants of one key, ordered by variant id; nullptr if unknown.
  const std::map<std::uint32_t, std::vector<float>>* find_variants(const std::string& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::map<std::uint32_t, std::vector<float>>>& by_key() const {
    return by_key_;
  }

  std::size_t unique_keys() const { return by_key_.size(); }

 private:
  std::uint32_t dim_ = 0;
  bool dim_set_ = false;
  std::size_t count_ = 0;
  std::map<std::string, std::map<std::uint32_t, std::vector<float>>> by_key_;
};

inline FeatureSet read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::byte_reader r(bytes);
  const std::string where = path.string();
  if (r.remaining() < 4)
    throw feature_file_error(feature_file_errc::truncated, where + ": truncated header");
  if (r.bytes(4) != std::string_view("CFV1"))
    throw feature_file_error(feature_file_errc::bad_magic, where + ": bad magic, not a CFV1 file");
  if (r.remaining() < 4 + 4 + 8)
    throw feature_file_error(feature_file_errc::truncated, where + ": truncated header");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw feature_file_error(feature_file_errc::bad_version,
                             where + ": unsupported CFV1 version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();

  FeatureSet set(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (r.remaining() < 2)
      throw feature_file_error(feature_file_errc::truncated,
                               where + ": truncated at record " + std::to_string(i));
    const std::uint16_t key_len = r.u16();
    if (r.remaining() < static_cast<std::size_t>(key_len) + 4 + 4ull * dim)
      throw feature_file_error(feature_file_errc::truncated,
                               where + ": truncated at record " + std::to_string(i));
    FeatureRecord rec;
    rec.key = std::string(r.bytes(key_len));
    rec.variant = r.u32();
    rec.values.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) rec.values[d] = r.f32();
    if (!is_valid_utf8(rec.key))
      throw feature_file_error(feature_file_errc::invalid_key,
                               where + ": record " + std::to_string(i) +
                                   " key is not valid UTF-8");
    for (float v : rec.values)
      if (!std::isfinite(v))
        throw feature_file_error(feature_file_errc::non_finite_value,
                                 where + ": non-finite value in feature '" + rec.key + "'");
    if (set.find(rec.key, rec.variant) != nullptr)
      throw feature_file_error(feature_file_errc::duplicate_record,
                               where + ": duplicate record (" + rec.key + ", variant " +
                                   std::to_string(rec.variant) + ")");
    set.insert(std::move(rec));
  }
  if (r.remaining() != 0)
    throw feature_file_error(feature_file_errc::trailing_data,
                             where + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after last record");
  return set;
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureSet& set) {
  std::string out;
  out.reserve(20 + set.size() * (8 + 4ull * set.dim()));
  out += "CFV1";
  detail::put_u32(out, 1);
  detail::put_u32(out, set.dim());
  detail::put_u64(out, set.size());
  for (const auto& [key, variants] : set.by_key()) {
    for (const auto& [variant, values] : variants) {
      detail::put_u16(out, static_cast<std::uint16_t>(key.size()));
      out += key;
      detail::put_u32(out, variant);
      for (float v : values) detail::put_f32(out, v);
    }
  }
  write_file_atomic(path, out);
}

// Validates and canonicalizes a record list, then writes it.
inline void write_feature_file(const std::filesystem::path& path,
                               std::span<const FeatureRecord> records) {
  FeatureSet set;
  for (const auto& rec : records) set.insert(rec);
  write_feature_file(path, set);
}

}  // namespace vqahead
