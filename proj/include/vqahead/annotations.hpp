#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vqahead/binary_io.hpp"
#include "vqahead/errors.hpp"

namespace vqahead {

// One image-question pair with its crowd answers.
struct AnnotatedSample {
  std::string sample_id;  // image file name
  std::string question;
  std::vector<std::string> answers;  // raw strings, order preserved
  int answerable = 1;
  bool has_answerable = false;  // whether the source carried the field
};

enum class ParseMode { train, infer };

// Parses a UTF-8 JSON array of {image, question, answers?, answerable?}
// objects. Unknown fields are ignored. In train mode every sample must
// carry exactly n_ans answers; infer mode accepts any count including
// none. Duplicate or empty sample ids are rejected in both modes.
inline std::vector<AnnotatedSample> parse_annotations(const std::filesystem::path& path,
                                                      ParseMode mode,
                                                      std::size_t n_ans = 10) {
  const std::string bytes = detail::read_file_bytes(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("malformed JSON in " + path.string() + " at byte " +
                          std::to_string(e.byte) + ": " + e.what(),
                      e.byte);
  }
  if (!doc.is_array())
    throw validation_error("annotation file must be a JSON array: " + path.string());

  std::vector<AnnotatedSample> samples;
  samples.reserve(doc.size());
  std::unordered_set<std::string> seen;
  seen.reserve(doc.size());

  for (std::size_t idx = 0; idx < doc.size(); ++idx) {
    const auto& obj = doc[idx];
    const std::string where = path.string() + " entry " + std::to_string(idx);
    if (!obj.is_object()) throw validation_error(where + ": expected an object");
    if (!obj.contains("image") || !obj["image"].is_string())
      throw validation_error(where + ": missing string field 'image'");
    if (!obj.contains("question") || !obj["question"].is_string())
      throw validation_error(where + ": missing string field 'question'");

    AnnotatedSample s;
    s.sample_id = obj["image"].get<std::string>();
    s.question = obj["question"].get<std::string>();
    if (s.sample_id.empty()) throw validation_error(where + ": empty sample id");
    if (!seen.insert(s.sample_id).second)
      throw validation_error(where + ": duplicate sample id '" + s.sample_id + "'");

    if (obj.contains("answers")) {
      const auto& arr = obj["answers"];
      if (!arr.is_array()) throw validation_error(where + ": 'answers' must be an array");
      s.answers.reserve(arr.size());
      for (const auto& a : arr) {
        if (!a.is_object() || !a.contains("answer") || !a["answer"].is_string())
          throw validation_error(where + ": each answer needs a string field 'answer'");
        s.answers.push_back(a["answer"].get<std::string>());
      }
    }
    if (obj.contains("answerable")) {
      const auto& v = obj["answerable"];
      if (v.is_boolean()) {
        s.answerable = v.get<bool>() ? 1 : 0;
      } else if (v.is_number_integer()) {
        int x = v.get<int>();
        if (x != 0 && x != 1) throw validation_error(where + ": 'answerable' must be 0 or 1");
        s.answerable = x;
      } else {
        throw validation_error(where + ": 'answerable' must be 0 or 1");
      }
      s.has_answerable = true;
    }

    if (mode == ParseMode::train && s.answers.size() != n_ans)
      throw validation_error("sample '" + s.sample_id + "' has " +
                             std::to_string(s.answers.size()) + " answers, expected " +
                             std::to_string(n_ans));
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace vqahead
