#pragma once

#include <string>
#include <string_view>

namespace vqahead {

// Canonical answer-string form used before any counting or comparison:
// ASCII lowercase, outer whitespace stripped, inner whitespace runs
// collapsed to a single space, trailing sentence punctuation (. ? !)
// removed. Total over arbitrary UTF-8 input; bytes above 0x7F pass
// through untouched.
inline std::string normalize_answer(std::string_view raw) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  // Stripping punctuation can expose a collapsed space and vice versa, so
  // take both in one loop to reach a fixed point.
  while (!out.empty() &&
         (out.back() == '.' || out.back() == '?' || out.back() == '!' || out.back() == ' '))
    out.pop_back();
  return out;
}

}  // namespace vqahead
