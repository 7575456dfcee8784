#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "vqahead/rng.hpp"
#include "vqahead/vocabulary.hpp"

using namespace vqahead;
using testutil::TempDir;
using testutil::slurp;

namespace {
std::vector<std::string> repeat(std::initializer_list<std::pair<const char*, int>> spec) {
  std::vector<std::string> out;
  for (const auto& [word, n] : spec)
    for (int i = 0; i < n; ++i) out.emplace_back(word);
  return out;
}

AnnotatedSample sample(std::string id, std::vector<std::string> answers) {
  AnnotatedSample s;
  s.sample_id = std::move(id);
  s.question = "q";
  s.answers = std::move(answers);
  return s;
}

std::map<std::string, std::uint64_t> freq_of(std::span<const AnnotatedSample> samples) {
  std::map<std::string, std::uint64_t> f;
  for (const auto& s : samples)
    for (const auto& a : s.answers) ++f[normalize_answer(a)];
  return f;
}
}  // namespace

TEST(SelectTarget, UniqueTopScore) {
  const auto crowd = repeat({{"yes", 5}, {"no", 3}, {"maybe", 2}});
  const std::map<std::string, std::uint64_t> freq{{"yes", 5}, {"no", 3}, {"maybe", 2}};
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::simple), "yes");
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::leave_one_out), "yes");
}

TEST(SelectTarget, FrequencyBreaksScoreTie) {
  // yes, no, red all have >= 3 matches so every simple score saturates at
  // 1.0; the global frequency then singles out "yes".
  const auto crowd = repeat({{"yes", 3}, {"no", 3}, {"red", 4}});
  const std::map<std::string, std::uint64_t> freq{{"red", 10}, {"yes", 9000}, {"no", 8000}};
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::simple), "yes");
}

TEST(SelectTarget, MedoidBreaksFrequencyTie) {
  const auto crowd = repeat({{"ab", 3}, {"ac", 3}, {"ad", 3}, {"x", 1}});
  const std::map<std::string, std::uint64_t> freq{{"ab", 3}, {"ac", 3}, {"ad", 3}, {"x", 1}};
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::simple), "ab");
}

TEST(SelectTarget, EmptyCrowdThrows) {
  EXPECT_THROW(select_target_answer({}, {}, ScoreMode::simple), validation_error);
}

TEST(SelectTarget, LeaveOneOutSeparatesSaturatedCounts) {
  // Simple mode caps at 3 matches, tying a(4) with b(3) and c(3) and
  // handing the choice to frequency; leave-one-out still prefers the
  // 4-count answer because deleting one of its copies leaves 3.
  const auto crowd = repeat({{"a", 4}, {"b", 3}, {"c", 3}});
  const std::map<std::string, std::uint64_t> freq{{"a", 4}, {"b", 900}, {"c", 3}};
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::simple), "b");
  EXPECT_EQ(select_target_answer(crowd, freq, ScoreMode::leave_one_out), "a");
}

TEST(SelectTarget, AlwaysReturnsCrowdMember) {
  SplitMix64 rng(0x5eedf00dULL);
  const std::vector<std::string> words{"a", "b", "ab", "ba", "abc", "x"};
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<std::string> crowd;
    const std::size_t n = 1 + rng.next_below(10);
    for (std::size_t i = 0; i < n; ++i)
      crowd.push_back(words[static_cast<std::size_t>(rng.next_below(words.size()))]);
    std::map<std::string, std::uint64_t> freq;
    for (const auto& w : words) freq[w] = rng.next_below(5);
    const ScoreMode mode = rng.next_below(2) ? ScoreMode::leave_one_out : ScoreMode::simple;
    const std::string chosen = select_target_answer(crowd, freq, mode);
    EXPECT_NE(std::find(crowd.begin(), crowd.end(), chosen), crowd.end()) << chosen;
  }
}

TEST(BuildVocabulary, SingletonUnanimous) {
  const std::vector<AnnotatedSample> samples{sample("img1", repeat({{"yes", 10}}))};
  const auto r = build_vocabulary(samples);
  ASSERT_EQ(r.vocab.classes, std::vector<std::string>{"yes"});
  EXPECT_EQ(r.targets.at("img1"), 0);
  EXPECT_EQ(r.vocab.global_freq.at("yes"), 10u);
  EXPECT_EQ(r.vocab.type_names[static_cast<std::size_t>(r.vocab.class_type[0])], "yes");
}

TEST(BuildVocabulary, DisjointUnanimousSortedClasses) {
  const std::vector<AnnotatedSample> samples{sample("a", repeat({{"no", 10}})),
                                             sample("b", repeat({{"yes", 10}}))};
  const auto r = build_vocabulary(samples);
  EXPECT_EQ(r.vocab.classes, (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(r.targets.at("a"), 0);
  EXPECT_EQ(r.targets.at("b"), 1);
  EXPECT_EQ(r.vocab.index("no"), 0);
  EXPECT_EQ(r.vocab.index("yes"), 1);
  EXPECT_EQ(r.vocab.index("maybe"), -1);
}

TEST(BuildVocabulary, NormalizesBeforeCounting) {
  const std::vector<AnnotatedSample> samples{
      sample("a", {"Yes", "YES", "yes.", " yes ", "yes!", "no", "no", "NO", "blue", "blue"})};
  const auto r = build_vocabulary(samples);
  EXPECT_EQ(r.vocab.classes, std::vector<std::string>{"yes"});
  EXPECT_EQ(r.vocab.global_freq.at("yes"), 5u);
  EXPECT_EQ(r.vocab.global_freq.at("no"), 3u);
  EXPECT_EQ(r.vocab.global_freq.at("blue"), 2u);
}

TEST(BuildVocabulary, EngineeredFiveSampleFixture) {
  // Five samples exercising each selection stage at least once. The
  // expected values are re-derived by the brute-force oracle below and
  // checked against hand computation in the comments.
  const std::vector<AnnotatedSample> samples{
      // dog and cat both saturate min(count, 3); global freq decides:
      // dog 6+4+3=13 vs cat 4+4+4=12
      sample("s1", repeat({{"dog", 6}, {"cat", 4}})),
      // same tie, same winner; bird stays below saturation
      sample("s2", repeat({{"dog", 4}, {"cat", 4}, {"bird", 2}})),
      // score tie ab/ac/ad, freq tie (3 each), medoid lexicographic -> ab
      sample("s3", repeat({{"ab", 3}, {"ac", 3}, {"ad", 3}, {"x", 1}})),
      // three-way saturation tie; freq picks dog again (13 vs 12 vs 4)
      sample("s4", repeat({{"dog", 3}, {"cat", 4}, {"x", 3}})),
      // unanimity
      sample("s5", repeat({{"blue", 10}})),
  };
  const auto r = build_vocabulary(samples);

  std::vector<std::pair<std::string, std::vector<std::string>>> crowds;
  for (const auto& s : samples) {
    std::vector<std::string> c;
    for (const auto& a : s.answers) c.push_back(normalize_answer(a));
    crowds.emplace_back(s.sample_id, std::move(c));
  }
  const auto expected = oracle::build_vocab(crowds, false);

  EXPECT_EQ(r.vocab.classes, expected.classes);
  for (const auto& [id, target] : expected.target_of)
    EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at(id))], target) << id;

  // Hand-derived expectations, independent of both implementations.
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("s1"))], "dog");
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("s2"))], "dog");
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("s3"))], "ab");
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("s4"))], "dog");
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("s5"))], "blue");
  EXPECT_EQ(r.vocab.classes, (std::vector<std::string>{"ab", "blue", "dog"}));
}

TEST(BuildVocabulary, PermutationInvariant) {
  std::vector<AnnotatedSample> samples{
      sample("s1", repeat({{"dog", 6}, {"cat", 4}})),
      sample("s2", repeat({{"dog", 4}, {"cat", 4}, {"bird", 2}})),
      sample("s3", repeat({{"ab", 3}, {"ac", 3}, {"ad", 3}, {"x", 1}})),
      sample("s4", repeat({{"dog", 3}, {"cat", 4}, {"x", 3}})),
  };
  const auto base = build_vocabulary(samples);
  std::reverse(samples.begin(), samples.end());
  const auto flipped = build_vocabulary(samples);
  EXPECT_EQ(base.vocab.classes, flipped.vocab.classes);
  EXPECT_EQ(base.vocab.global_freq, flipped.vocab.global_freq);
  for (const auto& [id, cls] : base.targets) EXPECT_EQ(flipped.targets.at(id), cls) << id;
  EXPECT_EQ(base.vocab.hash(), flipped.vocab.hash());
}

TEST(BuildVocabulary, MatchesOracleOnRandomInstances) {
  SplitMix64 rng(0xabcdef12345ULL);
  const std::vector<std::string> pool{"a", "b", "ab", "ba", "aa", "bb"};  // <= 6 unique, tie-prone
  for (int iter = 0; iter < 60; ++iter) {
    const std::size_t n_samples = 1 + rng.next_below(6);
    std::vector<AnnotatedSample> samples;
    std::vector<std::pair<std::string, std::vector<std::string>>> crowds;
    for (std::size_t i = 0; i < n_samples; ++i) {
      std::vector<std::string> crowd;
      for (std::size_t k = 0; k < 10; ++k)
        crowd.push_back(pool[static_cast<std::size_t>(rng.next_below(pool.size()))]);
      samples.push_back(sample("s" + std::to_string(i), crowd));
      crowds.emplace_back("s" + std::to_string(i), crowd);
    }
    const bool loo = rng.next_below(2) == 1;
    const auto got = build_vocabulary(samples, loo ? ScoreMode::leave_one_out : ScoreMode::simple);
    const auto want = oracle::build_vocab(crowds, loo);
    ASSERT_EQ(got.vocab.classes, want.classes) << "iter " << iter;
    for (const auto& [id, target] : want.target_of)
      ASSERT_EQ(got.vocab.classes[static_cast<std::size_t>(got.targets.at(id))], target)
          << "iter " << iter << " " << id;
  }
}

TEST(BuildVocabulary, ScoreModeChangesSelection) {
  const std::vector<AnnotatedSample> samples{
      sample("tie", repeat({{"a", 4}, {"b", 3}, {"c", 3}})),
      sample("feed", repeat({{"b", 3}, {"d", 7}})),
  };
  const auto simple = build_vocabulary(samples, ScoreMode::simple);
  const auto loo = build_vocabulary(samples, ScoreMode::leave_one_out);
  // global freq: a=4, b=6, c=3, d=7. Simple ties {a,b,c}; b wins on freq.
  EXPECT_EQ(simple.vocab.classes[static_cast<std::size_t>(simple.targets.at("tie"))], "b");
  EXPECT_EQ(loo.vocab.classes[static_cast<std::size_t>(loo.targets.at("tie"))], "a");
  EXPECT_EQ(simple.vocab.score_mode, ScoreMode::simple);
  EXPECT_EQ(loo.vocab.score_mode, ScoreMode::leave_one_out);
}

TEST(BuildVocabulary, FreqModeSelectedReselects) {
  // Scattered "a" answers dominate the raw crowd counts (11 vs 10) without
  // ever winning a sample outright, while "b" is the unanimous target of
  // two samples. Crowd counting resolves the tied sample to "a"; counting
  // selected targets resolves it to "b".
  std::vector<AnnotatedSample> samples;
  for (int i = 0; i < 9; ++i) {
    const std::string filler = "w" + std::to_string(i);
    samples.push_back(sample("scatter" + std::to_string(i),
                             {"a", filler, filler, filler}));
  }
  samples.push_back(sample("solid1", repeat({{"b", 4}})));
  samples.push_back(sample("solid2", repeat({{"b", 4}})));
  samples.push_back(sample("tied", repeat({{"a", 2}, {"b", 2}})));

  const auto crowd_mode = build_vocabulary(samples, ScoreMode::simple,
                                           TypeRuleTable::default_instance(), FreqMode::crowd);
  const auto selected_mode = build_vocabulary(samples, ScoreMode::simple,
                                              TypeRuleTable::default_instance(), FreqMode::selected);

  EXPECT_EQ(crowd_mode.vocab.classes[static_cast<std::size_t>(crowd_mode.targets.at("tied"))], "a");
  EXPECT_EQ(
      selected_mode.vocab.classes[static_cast<std::size_t>(selected_mode.targets.at("tied"))],
      "b");

  // Crowd mode stores raw answer counts; selected mode stores counts of
  // the final per-sample selection.
  EXPECT_EQ(crowd_mode.vocab.global_freq.at("a"), 11u);
  EXPECT_EQ(crowd_mode.vocab.global_freq.at("b"), 10u);
  EXPECT_EQ(selected_mode.vocab.global_freq.at("b"), 3u);  // solid1, solid2, tied
  EXPECT_EQ(selected_mode.vocab.global_freq.count("a"), 0u);
  std::uint64_t total = 0;
  for (const auto& [ans, n] : selected_mode.vocab.global_freq) {
    (void)ans;
    total += n;
  }
  EXPECT_EQ(total, samples.size());
}

TEST(BuildVocabulary, AssignsTypesFromRuleTable) {
  const std::vector<AnnotatedSample> samples{
      sample("a", repeat({{"yes", 10}})),   sample("b", repeat({{"no", 10}})),
      sample("c", repeat({{"3", 10}})),     sample("d", repeat({{"blue", 10}})),
      sample("e", repeat({{"pizza", 10}})), sample("f", repeat({{"unanswerable", 10}})),
      sample("g", repeat({{"unsuitable image", 10}})),
  };
  const auto r = build_vocabulary(samples);
  const auto& table = TypeRuleTable::default_instance();
  ASSERT_EQ(r.vocab.classes.size(), 7u);
  for (std::size_t i = 0; i < r.vocab.classes.size(); ++i)
    EXPECT_EQ(r.vocab.class_type[i], table.assign(r.vocab.classes[i])) << r.vocab.classes[i];
  const auto type_name = [&](const std::string& cls) {
    const auto idx = static_cast<std::size_t>(
        r.vocab.class_type[static_cast<std::size_t>(r.vocab.index(cls))]);
    return r.vocab.type_names[idx];
  };
  EXPECT_EQ(type_name("yes"), "yes");
  EXPECT_EQ(type_name("no"), "no");
  EXPECT_EQ(type_name("3"), "number");
  EXPECT_EQ(type_name("blue"), "color");
  EXPECT_EQ(type_name("pizza"), "other");
  EXPECT_EQ(type_name("unanswerable"), "unanswerable");
  EXPECT_EQ(type_name("unsuitable image"), "unsuitable");
}

TEST(BuildVocabulary, EmptyAnswersThrow) {
  const std::vector<AnnotatedSample> samples{sample("a", {})};
  EXPECT_THROW(build_vocabulary(samples), validation_error);
}

TEST(VocabularyJson, RoundTripPreservesEverything) {
  const std::vector<AnnotatedSample> samples{
      sample("s1", repeat({{"dog", 6}, {"cat", 4}})),
      sample("s2", repeat({{"ab", 3}, {"ac", 3}, {"ad", 3}, {"x", 1}})),
      sample("s3", repeat({{"3", 10}})),
  };
  const auto r = build_vocabulary(samples, ScoreMode::leave_one_out);
  const auto j = vocabulary_to_json(r.vocab);
  const Vocabulary back = vocabulary_from_json(j, TypeRuleTable::default_instance());
  EXPECT_EQ(back.classes, r.vocab.classes);
  EXPECT_EQ(back.class_type, r.vocab.class_type);
  EXPECT_EQ(back.global_freq, r.vocab.global_freq);
  EXPECT_EQ(back.score_mode, r.vocab.score_mode);
  EXPECT_EQ(back.rule_table_hash, r.vocab.rule_table_hash);
  EXPECT_EQ(back.hash(), r.vocab.hash());
  EXPECT_EQ(back.index_of, r.vocab.index_of);
}

TEST(VocabularyJson, SaveLoadFile) {
  TempDir dir;
  const std::vector<AnnotatedSample> samples{sample("a", repeat({{"yes", 7}, {"no", 3}}))};
  const auto r = build_vocabulary(samples);
  const auto path = dir.file("vocab.json");
  save_vocabulary(path, r.vocab);
  const Vocabulary back = load_vocabulary(path);
  EXPECT_EQ(back.classes, r.vocab.classes);
  EXPECT_EQ(back.hash(), r.vocab.hash());
}

TEST(VocabularyJson, MalformedFileReportsByte) {
  TempDir dir;
  const auto path = dir.write("bad.json", "{\"classes\": [");
  try {
    load_vocabulary(path);
    FAIL() << "expected parse_error";
  } catch (const parse_error& e) {
    EXPECT_GT(e.byte_offset(), 0u);
  }
}

TEST(VocabularyJson, RejectsWrongRuleTableHash) {
  const std::vector<AnnotatedSample> samples{sample("a", repeat({{"yes", 10}}))};
  const auto r = build_vocabulary(samples);
  auto j = vocabulary_to_json(r.vocab);
  j["rule_table_hash"] = "0000000000000000";
  EXPECT_THROW(vocabulary_from_json(j, TypeRuleTable::default_instance()), validation_error);
}

TEST(VocabularyJson, RejectsUnsortedOrDuplicateClasses) {
  const std::vector<AnnotatedSample> samples{sample("a", repeat({{"no", 10}})),
                                             sample("b", repeat({{"yes", 10}}))};
  const auto r = build_vocabulary(samples);
  auto j = vocabulary_to_json(r.vocab);
  j["classes"] = std::vector<std::string>{"yes", "no"};
  EXPECT_THROW(vocabulary_from_json(j, TypeRuleTable::default_instance()), validation_error);
  j["classes"] = std::vector<std::string>{"no", "no"};
  EXPECT_THROW(vocabulary_from_json(j, TypeRuleTable::default_instance()), validation_error);
}

TEST(VocabularyJson, RejectsMissingKeysAndUnknownTypes) {
  const std::vector<AnnotatedSample> samples{sample("a", repeat({{"yes", 10}}))};
  const auto r = build_vocabulary(samples);
  for (const char* key : {"classes", "types", "global_freq", "score_mode", "rule_table_hash"}) {
    auto j = vocabulary_to_json(r.vocab);
    j.erase(key);
    EXPECT_THROW(vocabulary_from_json(j, TypeRuleTable::default_instance()), validation_error)
        << key;
  }
  auto j = vocabulary_to_json(r.vocab);
  j["types"] = std::vector<std::string>{"galaxy"};
  EXPECT_THROW(vocabulary_from_json(j, TypeRuleTable::default_instance()), validation_error);
}

TEST(VocabularyHash, SensitiveToClassesAndTypes) {
  const std::vector<AnnotatedSample> one{sample("a", repeat({{"yes", 10}}))};
  const std::vector<AnnotatedSample> two{sample("a", repeat({{"no", 10}}))};
  const auto ra = build_vocabulary(one);
  const auto rb = build_vocabulary(two);
  EXPECT_NE(ra.vocab.hash(), rb.vocab.hash());
  const auto again = build_vocabulary(one);
  EXPECT_EQ(ra.vocab.hash(), again.vocab.hash());
}

TEST(BuildVocabulary, GlobalFreqUsedAcrossSamples) {
  // The tied sample alone cannot distinguish "cat" from "dog"; the other
  // sample's answers tip the global counts toward "cat".
  const std::vector<AnnotatedSample> samples{
      sample("tied", repeat({{"cat", 3}, {"dog", 3}, {"x", 4}})),
      sample("boost", repeat({{"cat", 6}, {"dog", 4}})),
  };
  const auto r = build_vocabulary(samples);
  EXPECT_EQ(r.vocab.classes[static_cast<std::size_t>(r.targets.at("tied"))], "cat");
  const auto freq = freq_of(samples);
  EXPECT_EQ(r.vocab.global_freq, freq);
}
