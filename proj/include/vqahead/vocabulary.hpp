#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vqahead/annotations.hpp"
#include "vqahead/answer_types.hpp"
#include "vqahead/atomic_file.hpp"
#include "vqahead/binary_io.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/hashing.hpp"
#include "vqahead/levenshtein.hpp"
#include "vqahead/normalize.hpp"
#include "vqahead/vqa_score.hpp"

namespace vqahead {

// The fixed answer-class set used by the classifier, with per-class answer
// types and the global answer frequencies the selection used.
struct Vocabulary {
  std::vector<std::string> classes;  // normalized, unique, lexicographically sorted
  std::unordered_map<std::string, std::int32_t> index_of;
  std::vector<std::string> type_names;   // ordered type list, defines T
  std::vector<std::int32_t> class_type;  // per class, index into type_names
  std::map<std::string, std::uint64_t> global_freq;
  ScoreMode score_mode = ScoreMode::simple;
  std::string rule_table_hash;

  std::size_t size() const { return classes.size(); }
  std::size_t type_count() const { return type_names.size(); }

  std::int32_t index(const std::string& answer) const {
    auto it = index_of.find(answer);
    return it == index_of.end() ? -1 : it->second;
  }

  // Fingerprint of the class list and type assignment; checkpoints store
  // it so evaluation can refuse a silently misaligned vocabulary.
  std::string hash() const {
    Fnv1a64 h;
    for (const auto& t : type_names) h.update(t).update_sep();
    h.update("\x1f");
    for (std::size_t i = 0; i < classes.size(); ++i) {
      h.update(classes[i]).update_sep();
      h.update(type_names[static_cast<std::size_t>(class_type[i])]).update_sep();
    }
    return h.hex();
  }
};

// How global_freq is counted: over every crowd answer (default) or over
// the selected target answers (second pass re-selects with the new
// frequencies).
enum class FreqMode { crowd, selected };

inline const char* to_string(FreqMode m) { return m == FreqMode::crowd ? "crowd" : "selected"; }

inline FreqMode freq_mode_from_string(std::string_view s) {
  if (s == "crowd") return FreqMode::crowd;
  if (s == "selected") return FreqMode::selected;
  throw validation_error("unknown global_freq mode '" + std::string(s) +
                         "' (expected crowd or selected)");
}

// Greedy per-sample target selection in three stages: highest crowd score,
// then highest global frequency, then the Levenshtein medoid of the
// remaining survivors (lexicographic on a final tie). Crowd entries must
// be normalized; unseen answers count as frequency 0.
inline std::string select_target_answer(std::span<const std::string> crowd,
                                        const std::map<std::string, std::uint64_t>& global_freq,
                                        ScoreMode mode) {
  if (crowd.empty()) throw validation_error("select_target_answer over an empty crowd");

  std::map<std::string, std::uint64_t> counts;
  for (const auto& a : crowd) ++counts[a];

  // Stage 1: keep the max-score set. Scores share one denominator per
  // mode, so comparing integer numerators is exact.
  std::uint64_t best_num = 0;
  std::vector<std::string> survivors;
  for (const auto& [answer, n] : counts) {
    (void)n;
    const auto [num, den] = vqa_score_ratio(answer, crowd, mode);
    (void)den;
    if (num > best_num) {
      best_num = num;
      survivors.clear();
    }
    if (num == best_num) survivors.push_back(answer);
  }
  if (survivors.size() == 1) return survivors.front();

  // Stage 2: keep the max global-frequency set.
  std::uint64_t best_freq = 0;
  std::vector<std::string> frequent;
  for (const auto& answer : survivors) {
    auto it = global_freq.find(answer);
    const std::uint64_t f = it == global_freq.end() ? 0 : it->second;
    if (f > best_freq) {
      best_freq = f;
      frequent.clear();
    }
    if (f == best_freq) frequent.push_back(answer);
  }
  if (frequent.size() == 1) return frequent.front();

  // Stage 3: most representative of the still-tied survivors.
  return medoid(frequent);
}

struct VocabBuildResult {
  Vocabulary vocab;
  std::unordered_map<std::string, std::int32_t> targets;  // sample_id -> class index
};

// Builds the answer vocabulary: one target answer per sample by the
// three-stage rule, classes = sorted unique targets, one answer type per
// class from the rule table.
inline VocabBuildResult build_vocabulary(std::span<const AnnotatedSample> samples,
                                         ScoreMode mode = ScoreMode::simple,
                                         const TypeRuleTable& table = TypeRuleTable::default_instance(),
                                         FreqMode freq_mode = FreqMode::crowd) {
  std::vector<std::vector<std::string>> normalized(samples.size());
  std::map<std::string, std::uint64_t> crowd_freq;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    normalized[i].reserve(samples[i].answers.size());
    for (const auto& a : samples[i].answers) {
      normalized[i].push_back(normalize_answer(a));
      ++crowd_freq[normalized[i].back()];
    }
  }

  const auto select_all = [&](const std::map<std::string, std::uint64_t>& freq) {
    std::vector<std::string> targets(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (normalized[i].empty())
        throw validation_error("sample '" + samples[i].sample_id + "' has no answers");
      targets[i] = select_target_answer(normalized[i], freq, mode);
    }
    return targets;
  };

  std::vector<std::string> selected = select_all(crowd_freq);
  std::map<std::string, std::uint64_t> freq;
  if (freq_mode == FreqMode::selected) {
    std::map<std::string, std::uint64_t> target_freq;
    for (const auto& t : selected) ++target_freq[t];
    selected = select_all(target_freq);
    for (const auto& t : selected) ++freq[t];  // counts of the final selection
  } else {
    freq = std::move(crowd_freq);
  }

  VocabBuildResult result;
  result.vocab.score_mode = mode;
  result.vocab.rule_table_hash = table.hash();
  result.vocab.type_names = table.type_names();
  result.vocab.global_freq = std::move(freq);

  std::vector<std::string> classes(selected.begin(), selected.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  result.vocab.classes = std::move(classes);
  result.vocab.index_of.reserve(result.vocab.classes.size());
  for (std::size_t i = 0; i < result.vocab.classes.size(); ++i)
    result.vocab.index_of[result.vocab.classes[i]] = static_cast<std::int32_t>(i);
  result.vocab.class_type.reserve(result.vocab.classes.size());
  for (const auto& cls : result.vocab.classes)
    result.vocab.class_type.push_back(table.assign(cls));

  result.targets.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    result.targets[samples[i].sample_id] = result.vocab.index_of[selected[i]];
  return result;
}

inline nlohmann::json vocabulary_to_json(const Vocabulary& vocab) {
  nlohmann::json types = nlohmann::json::array();
  for (std::int32_t t : vocab.class_type)
    types.push_back(vocab.type_names[static_cast<std::size_t>(t)]);
  nlohmann::json freq = nlohmann::json::object();
  for (const auto& [answer, count] : vocab.global_freq) freq[answer] = count;
  return {{"classes", vocab.classes},
          {"types", types},
          {"global_freq", freq},
          {"score_mode", to_string(vocab.score_mode)},
          {"rule_table_hash", vocab.rule_table_hash}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j, const TypeRuleTable& table) {
  for (const char* key : {"classes", "types", "global_freq", "score_mode", "rule_table_hash"})
    if (!j.contains(key)) throw validation_error(std::string("vocabulary JSON missing '") + key + "'");
  Vocabulary v;
  v.rule_table_hash = j["rule_table_hash"].get<std::string>();
  if (v.rule_table_hash != table.hash())
    throw validation_error("vocabulary was built with a different type rule table (hash " +
                           v.rule_table_hash + " != " + table.hash() + ")");
  v.score_mode = score_mode_from_string(j["score_mode"].get<std::string>());
  v.type_names = table.type_names();
  v.classes = j["classes"].get<std::vector<std::string>>();
  const auto type_strs = j["types"].get<std::vector<std::string>>();
  if (type_strs.size() != v.classes.size())
    throw validation_error("vocabulary 'types' and 'classes' lengths differ");
  if (!std::is_sorted(v.classes.begin(), v.classes.end()) ||
      std::adjacent_find(v.classes.begin(), v.classes.end()) != v.classes.end())
    throw validation_error("vocabulary classes must be sorted and unique");
  v.class_type.reserve(type_strs.size());
  for (const auto& name : type_strs) {
    const int idx = table.type_index(name);
    if (idx < 0) throw validation_error("vocabulary type '" + name + "' not in the rule table");
    v.class_type.push_back(idx);
  }
  v.index_of.reserve(v.classes.size());
  for (std::size_t i = 0; i < v.classes.size(); ++i)
    v.index_of[v.classes[i]] = static_cast<std::int32_t>(i);
  for (const auto& [answer, count] : j["global_freq"].items())
    v.global_freq[answer] = count.get<std::uint64_t>();
  return v;
}

inline void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  write_file_atomic(path, vocabulary_to_json(vocab).dump(2) + "\n");
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path,
                                  const TypeRuleTable& table = TypeRuleTable::default_instance()) {
  const std::string bytes = detail::read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("malformed JSON in " + path.string() + " at byte " +
                          std::to_string(e.byte) + ": " + e.what(),
                      e.byte);
  }
  return vocabulary_from_json(j, table);
}

}  // namespace vqahead
