#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqahead/errors.hpp"
#include "vqahead/utf8.hpp"

namespace vqahead {

// Edit distance over Unicode scalar values, two-row dynamic programming.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::u32string ua = decode_utf8(a);
  const std::u32string ub = decode_utf8(b);
  const std::u32string& s = ua.size() <= ub.size() ? ua : ub;
  const std::u32string& t = ua.size() <= ub.size() ? ub : ua;
  const std::size_t m = s.size(), n = t.size();
  if (m == 0) return n;

  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t subst = prev[j - 1] + (t[i - 1] == s[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// The candidate minimizing the summed edit distance to all other
// candidates; ties resolve to the lexicographically smallest string.
inline std::string medoid(std::span<const std::string> candidates) {
  if (candidates.empty()) throw validation_error("medoid of an empty candidate set");
  const std::size_t n = candidates.size();
  if (n == 1) return candidates[0];

  std::vector<std::size_t> sums(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t d = levenshtein(candidates[i], candidates[j]);
      sums[i] += d;
      sums[j] += d;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (sums[i] < sums[best] || (sums[i] == sums[best] && candidates[i] < candidates[best]))
      best = i;
  }
  return candidates[best];
}

}  // namespace vqahead
