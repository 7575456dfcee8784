#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vqahead {

// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a domain rule (bad dimensions, out-of-range target,
// malformed field, hash mismatch). CLI maps these to exit code 1.
class validation_error : public error {
 public:
  using error::error;
};

// File cannot be opened, read, written, or its binary container is
// unusable. CLI maps these to exit code 2.
class io_error : public error {
 public:
  using error::error;
};

// JSON (or other text) input failed to parse; carries the byte offset
// of the first offending position.
class parse_error : public validation_error {
 public:
  parse_error(const std::string& what, std::size_t byte_offset)
      : validation_error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

enum class feature_file_errc {
  bad_magic,
  bad_version,
  truncated,
  trailing_data,
  duplicate_record,
  non_finite_value,
  dimension_mismatch,
  invalid_key,
  key_too_long,
};

// Feature-file specific failure with a machine-checkable code.
class feature_file_error : public io_error {
 public:
  feature_file_error(feature_file_errc code, const std::string& what)
      : io_error(what), code_(code) {}
  feature_file_errc code() const noexcept { return code_; }

 private:
  feature_file_errc code_;
};

}  // namespace vqahead
