#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "vqahead/answer_types.hpp"
#include "vqahead/levenshtein.hpp"
#include "vqahead/normalize.hpp"
#include "vqahead/rng.hpp"
#include "vqahead/utf8.hpp"
#include "vqahead/vqa_score.hpp"

using namespace vqahead;

TEST(Normalize, BasicForms) {
  EXPECT_EQ(normalize_answer("Yes"), "yes");
  EXPECT_EQ(normalize_answer("  no  answer. "), "no answer");
  EXPECT_EQ(normalize_answer("UNANSWERABLE!"), "unanswerable");
  EXPECT_EQ(normalize_answer("\tTwo\nWords \r\n"), "two words");
  EXPECT_EQ(normalize_answer("what?!"), "what");
  EXPECT_EQ(normalize_answer("..."), "");
  EXPECT_EQ(normalize_answer(""), "");
  EXPECT_EQ(normalize_answer("3.5"), "3.5");  // inner punctuation kept
}

TEST(Normalize, Idempotent) {
  SplitMix64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const std::string s = oracle::random_string(rng, "aB c.?!\t7", 12);
    const std::string once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << "input: " << s;
  }
}

TEST(Levenshtein, Fixtures) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("café", "cafe"), 1u);  // one scalar substitution, not bytes
}

TEST(Levenshtein, PropertiesAndOracle) {
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::string a = oracle::random_string(rng, "abc", 7);
    const std::string b = oracle::random_string(rng, "abc", 7);
    const std::string c = oracle::random_string(rng, "abc", 7);
    const auto dab = levenshtein(a, b);
    EXPECT_EQ(dab, levenshtein(b, a));
    EXPECT_EQ(dab, oracle::levenshtein(a, b));
    EXPECT_EQ(levenshtein(a, a), 0u);
    if (dab == 0) { EXPECT_EQ(a, b); }
    EXPECT_LE(levenshtein(a, c), dab + levenshtein(b, c));
  }
}

TEST(Medoid, Fixtures) {
  EXPECT_EQ(medoid(std::vector<std::string>{"cat"}), "cat");
  EXPECT_EQ(medoid(std::vector<std::string>{"cat", "cart", "at"}), "cat");
  EXPECT_EQ(medoid(std::vector<std::string>{"ab", "ac", "ad"}), "ab");
  EXPECT_THROW(medoid(std::vector<std::string>{}), validation_error);
}

TEST(Medoid, MatchesOracle) {
  SplitMix64 rng(17);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> cands;
    const std::size_t n = 1 + rng.next_below(5);
    for (std::size_t k = 0; k < n; ++k) cands.push_back(oracle::random_string(rng, "abcd", 5));
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    EXPECT_EQ(medoid(cands), oracle::medoid(cands));
  }
}

TEST(VqaScore, SimpleFixtures) {
  std::vector<std::string> crowd(10, "no");
  for (int i = 0; i < 4; ++i) crowd[static_cast<std::size_t>(i)] = "yes";
  EXPECT_DOUBLE_EQ(vqa_score("yes", crowd, ScoreMode::simple), 1.0);
  std::vector<std::string> crowd2(10, "no");
  crowd2[0] = crowd2[1] = "yes";
  EXPECT_DOUBLE_EQ(vqa_score("yes", crowd2, ScoreMode::simple), 2.0 / 3.0);
  EXPECT_THROW(vqa_score("yes", std::vector<std::string>{}, ScoreMode::simple), validation_error);
}

TEST(VqaScore, LeaveOneOutFixtureIsExact) {
  // 2 subsets (deleting an "a") give 1/3, 8 give 2/3 -> 18/30 == 0.6.
  std::vector<std::string> crowd{"a", "a", "b", "b", "b", "b", "b", "b", "b", "b"};
  const auto [num, den] = vqa_score_ratio("a", crowd, ScoreMode::leave_one_out);
  EXPECT_EQ(num, 18u);
  EXPECT_EQ(den, 30u);
  EXPECT_EQ(vqa_score("a", crowd, ScoreMode::leave_one_out), 0.6);  // bitwise
  EXPECT_DOUBLE_EQ(oracle::loo_bruteforce("a", crowd), 0.6);
}

TEST(VqaScore, LeaveOneOutMatchesBruteForceAndClosedForm) {
  SplitMix64 rng(23);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.next_below(10);
    std::vector<std::string> crowd;
    for (std::size_t k = 0; k < n; ++k)
      crowd.push_back(std::string(1, static_cast<char>('a' + rng.next_below(3))));
    const std::string cand(1, static_cast<char>('a' + rng.next_below(3)));
    const double lib = vqa_score(cand, crowd, ScoreMode::leave_one_out);
    EXPECT_DOUBLE_EQ(lib, oracle::loo_bruteforce(cand, crowd));
    std::uint64_t m = 0;
    for (const auto& c : crowd) m += c == cand;
    const auto [num, den] = oracle::loo_ratio(m, n);
    EXPECT_DOUBLE_EQ(lib, static_cast<double>(num) / static_cast<double>(den));
  }
}

TEST(VqaScore, SimpleMonotoneSaturating) {
  std::vector<std::string> crowd(10, "x");
  double prev = -1.0;
  for (int m = 0; m <= 10; ++m) {
    for (int i = 0; i < 10; ++i) crowd[static_cast<std::size_t>(i)] = i < m ? "yes" : "x";
    const double s = vqa_score("yes", crowd, ScoreMode::simple);
    EXPECT_GE(s, prev);
    if (m >= 3) { EXPECT_DOUBLE_EQ(s, 1.0); }
    prev = s;
  }
}

TEST(AnswerTypes, DefaultRules) {
  EXPECT_EQ(assign_answer_type("yes"), "yes");
  EXPECT_EQ(assign_answer_type("no"), "no");
  EXPECT_EQ(assign_answer_type("42"), "number");
  EXPECT_EQ(assign_answer_type("3.5"), "number");
  EXPECT_EQ(assign_answer_type("3,5"), "number");
  EXPECT_EQ(assign_answer_type("seven"), "number");
  EXPECT_EQ(assign_answer_type("unanswerable"), "unanswerable");
  EXPECT_EQ(assign_answer_type("unsuitable"), "unsuitable");
  EXPECT_EQ(assign_answer_type("unsuitable image"), "unsuitable");
  EXPECT_EQ(assign_answer_type("red"), "color");
  EXPECT_EQ(assign_answer_type("grey"), "color");
  EXPECT_EQ(assign_answer_type("gray"), "color");
  // Anchored: these must all fall through to "other".
  EXPECT_EQ(assign_answer_type("yes please"), "other");
  EXPECT_EQ(assign_answer_type("42nd street"), "other");
  EXPECT_EQ(assign_answer_type("reddish"), "other");
  EXPECT_EQ(assign_answer_type("pizza"), "other");
  EXPECT_EQ(assign_answer_type(""), "other");
}

TEST(AnswerTypes, TotalAndDeterministic) {
  const auto& table = TypeRuleTable::default_instance();
  SplitMix64 rng(31);
  for (int i = 0; i < 400; ++i) {
    const std::string s = oracle::random_string(rng, "abcyesno 0123", 8);
    const int t1 = table.assign(s);
    const int t2 = table.assign(s);
    EXPECT_EQ(t1, t2);
    ASSERT_GE(t1, 0);
    ASSERT_LT(static_cast<std::size_t>(t1), table.type_names().size());
  }
}

TEST(AnswerTypes, SevenDefaultTypes) {
  const auto& names = TypeRuleTable::default_instance().type_names();
  const std::vector<std::string> expected{"other", "number", "yes",         "no",
                                          "color", "unsuitable", "unanswerable"};
  EXPECT_EQ(std::vector<std::string>(names.begin(), names.end()), expected);
}

TEST(AnswerTypes, ConfigRoundTripPreservesHash) {
  const auto& table = TypeRuleTable::default_instance();
  const auto j = table.to_json();
  const TypeRuleTable back = TypeRuleTable::from_json(j);
  EXPECT_EQ(back.hash(), table.hash());
  EXPECT_EQ(back.assign("yes"), table.assign("yes"));
  EXPECT_EQ(back.assign("teal-ish thing"), table.assign("teal-ish thing"));
}

TEST(AnswerTypes, FirstMatchWinsInConfiguredOrder) {
  nlohmann::json j{{"types", {"other", "a", "b"}},
                   {"rules", nlohmann::json::array({
                                 nlohmann::json{{"pattern", "^x.*$"}, {"type", "a"}},
                                 nlohmann::json{{"pattern", "^xy$"}, {"type", "b"}},
                             })}};
  const TypeRuleTable t = TypeRuleTable::from_json(j);
  EXPECT_EQ(t.type_names()[static_cast<std::size_t>(t.assign("xy"))], "a");
}

TEST(AnswerTypes, RejectsBadConfig) {
  nlohmann::json no_other{{"types", {"a"}}, {"rules", nlohmann::json::array()}};
  EXPECT_THROW(TypeRuleTable::from_json(no_other), validation_error);
  nlohmann::json bad_type{{"types", {"other"}},
                          {"rules", nlohmann::json::array({nlohmann::json{
                                        {"pattern", "^x$"}, {"type", "missing"}}})}};
  EXPECT_THROW(TypeRuleTable::from_json(bad_type), validation_error);
  nlohmann::json bad_regex{{"types", {"other"}},
                           {"rules", nlohmann::json::array({nlohmann::json{
                                         {"pattern", "(["}, {"type", "other"}}})}};
  EXPECT_THROW(TypeRuleTable::from_json(bad_regex), validation_error);
}

TEST(Utf8, DecodeAndValidate) {
  EXPECT_TRUE(is_valid_utf8("plain ascii"));
  EXPECT_TRUE(is_valid_utf8("caf\xc3\xa9"));
  EXPECT_FALSE(is_valid_utf8("\xc3"));          // truncated sequence
  EXPECT_FALSE(is_valid_utf8("\xc0\xaf"));      // overlong
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));  // surrogate
  EXPECT_EQ(decode_utf8("caf\xc3\xa9").size(), 4u);
  EXPECT_EQ(decode_utf8("\xff").size(), 1u);  // malformed byte -> one replacement
  EXPECT_EQ(decode_utf8("\xff")[0], char32_t{0xFFFD});
}
