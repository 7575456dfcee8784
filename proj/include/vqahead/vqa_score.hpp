#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "vqahead/errors.hpp"

namespace vqahead {

enum class ScoreMode { simple, leave_one_out };

inline const char* to_string(ScoreMode m) {
  return m == ScoreMode::simple ? "simple" : "leave_one_out";
}

inline ScoreMode score_mode_from_string(std::string_view s) {
  if (s == "simple") return ScoreMode::simple;
  if (s == "leave_one_out") return ScoreMode::leave_one_out;
  throw validation_error("unknown score mode '" + std::string(s) +
                         "' (expected simple or leave_one_out)");
}

// Crowd-agreement score as an exact integer ratio. simple mode scores
// min(matches, 3) / 3. leave_one_out averages the simple score over the
// subsets formed by deleting each crowd entry in turn, so the ratio is
// sum_i min(matches_i, 3) over 3*n. Integer arithmetic keeps equal scores
// exactly equal, which the vocabulary tie-breaking relies on.
inline std::pair<std::uint64_t, std::uint64_t> vqa_score_ratio(
    std::string_view candidate, std::span<const std::string> crowd, ScoreMode mode) {
  if (crowd.empty()) throw validation_error("vqa_score over an empty crowd");
  std::uint64_t matches = 0;
  for (const auto& a : crowd) matches += (a == candidate) ? 1 : 0;
  if (mode == ScoreMode::simple) return {std::min<std::uint64_t>(matches, 3), 3};

  std::uint64_t numerator = 0;
  for (std::size_t i = 0; i < crowd.size(); ++i) {
    const std::uint64_t m = matches - ((crowd[i] == candidate) ? 1 : 0);
    numerator += std::min<std::uint64_t>(m, 3);
  }
  return {numerator, 3 * static_cast<std::uint64_t>(crowd.size())};
}

// Score in [0, 1]. Candidate and crowd must already be normalized.
inline double vqa_score(std::string_view candidate, std::span<const std::string> crowd,
                        ScoreMode mode) {
  const auto [num, den] = vqa_score_ratio(candidate, crowd, mode);
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace vqahead
