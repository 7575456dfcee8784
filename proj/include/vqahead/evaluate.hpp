#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqahead/answer_types.hpp"
#include "vqahead/checkpoint.hpp"
#include "vqahead/ensemble.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/head.hpp"
#include "vqahead/join.hpp"
#include "vqahead/metrics.hpp"
#include "vqahead/parallel.hpp"
#include "vqahead/vocabulary.hpp"

namespace vqahead {

struct Prediction {
  std::string sample_id;
  std::string answer;
  std::vector<std::pair<std::string, double>> top_answers;  // prob desc, index asc on ties
  double answerability = 1.0;
};

struct EvalOptions {
  AnswerabilityPolicy policy = AnswerabilityPolicy::type_based;
  EnsembleMode ensemble_mode = EnsembleMode::mean_prob;
  std::vector<double> weights;         // empty = uniform over checkpoints
  bool ap_positive_answerable = true;  // which answerability class counts as positive
  std::size_t top_k = 5;
  unsigned threads = 0;                // 0 = all cores
  const TypeRuleTable* rules = nullptr;  // null = default table
};

struct EvalReport {
  double vqa_accuracy = 0.0;
  std::optional<double> answerability_ap;
  std::string ap_note;  // reason when answerability_ap is absent
  std::map<std::string, double> per_type_accuracy;
  std::size_t sample_count = 0;
  std::size_t skipped_count = 0;
  std::string score_mode;
};

struct EvalResult {
  EvalReport report;
  std::vector<Prediction> predictions;
};

inline void ensure_checkpoint_matches(const LoadedCheckpoint& ck, const Vocabulary& vocab) {
  if (ck.vocab_hash() != vocab.hash())
    throw validation_error("checkpoint was trained against a different vocabulary (hash " +
                           ck.vocab_hash() + " != " + vocab.hash() + ")");
  if (ck.params.n_answers != vocab.size() || ck.params.n_types != vocab.type_count())
    throw validation_error("checkpoint dimensions do not match the vocabulary");
}

// Ensembled eval-mode predictions over joined samples, image variant 0.
inline std::vector<Prediction> predict_samples(std::span<const LoadedCheckpoint> checkpoints,
                                               std::span<const JoinedSample> joined,
                                               const Vocabulary& vocab,
                                               const EvalOptions& options = {}) {
  if (checkpoints.empty()) throw validation_error("predict requires at least one checkpoint");
  for (const auto& ck : checkpoints) ensure_checkpoint_matches(ck, vocab);
  const AnswerabilityContext ctx = make_answerability_context(vocab);
  const std::size_t d = checkpoints[0].params.input_dim();
  for (const auto& ck : checkpoints)
    if (ck.params.d_img != checkpoints[0].params.d_img ||
        ck.params.d_txt != checkpoints[0].params.d_txt)
      throw validation_error("ensemble checkpoints disagree on feature dimensions");

  std::vector<Prediction> predictions(joined.size());
  const unsigned threads = options.threads == 0 ? default_thread_count() : options.threads;
  parallel_for_chunks(joined.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<ModelOutput> outputs(checkpoints.size());
    for (std::size_t i = begin; i < end; ++i) {
      const JoinedSample& js = joined[i];
      const Vec x = concat_input(js.image(), js.text);
      if (x.size() != d)
        throw validation_error("features for sample '" + js.sample->sample_id +
                               "' do not match the checkpoint input dimension");
      for (std::size_t m = 0; m < checkpoints.size(); ++m) {
        const PredictOutput po = predict(checkpoints[m].params, x, ctx, options.policy);
        outputs[m] = ModelOutput{po.answer_probs, po.type_probs, po.answerability};
      }
      const ModelOutput combined =
          ensemble_predict(outputs, options.weights, options.ensemble_mode);

      Prediction& pred = predictions[i];
      pred.sample_id = js.sample->sample_id;
      pred.answerability = combined.answerability;
      pred.answer = vocab.classes[argmax(combined.answer_probs)];
      std::vector<std::size_t> order(combined.answer_probs.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return combined.answer_probs[a] > combined.answer_probs[b];
      });
      const std::size_t k = std::min(options.top_k, order.size());
      pred.top_answers.reserve(k);
      for (std::size_t r = 0; r < k; ++r)
        pred.top_answers.emplace_back(vocab.classes[order[r]], combined.answer_probs[order[r]]);
    }
  });
  return predictions;
}

// Full metric pass: ensembled predictions, VQA accuracy (overall and per
// ground-truth answer type), and answerability AP when the split carries
// labels for it.
inline EvalResult evaluate(std::span<const LoadedCheckpoint> checkpoints, const JoinResult& data,
                           const Vocabulary& vocab, const EvalOptions& options = {}) {
  if (data.joined.empty()) throw validation_error("no samples to evaluate");
  const TypeRuleTable& rules =
      options.rules ? *options.rules : TypeRuleTable::default_instance();
  if (rules.hash() != vocab.rule_table_hash)
    throw validation_error("evaluation rule table differs from the one the vocabulary was built with");

  EvalResult result;
  result.predictions = predict_samples(checkpoints, data.joined, vocab, options);
  EvalReport& report = result.report;
  report.sample_count = data.joined.size();
  report.skipped_count = data.skipped.size();
  report.score_mode = to_string(vocab.score_mode);

  double score_sum = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> per_type;  // type -> (sum, count)
  for (std::size_t i = 0; i < data.joined.size(); ++i) {
    const AnnotatedSample& sample = *data.joined[i].sample;
    std::vector<std::string> crowd;
    crowd.reserve(sample.answers.size());
    for (const auto& a : sample.answers) crowd.push_back(normalize_answer(a));
    const double score =
        vqa_score(normalize_answer(result.predictions[i].answer), crowd, vocab.score_mode);
    score_sum += score;
    const std::string target = select_target_answer(crowd, vocab.global_freq, vocab.score_mode);
    auto& bucket = per_type[rules.assign_name(target)];
    bucket.first += score;
    bucket.second += 1;
  }
  report.vqa_accuracy = score_sum / static_cast<double>(data.joined.size());
  for (const auto& [type, bucket] : per_type)
    report.per_type_accuracy[type] = bucket.first / static_cast<double>(bucket.second);

  std::vector<double> ap_scores;
  std::vector<int> ap_labels;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < data.joined.size(); ++i) {
    const AnnotatedSample& sample = *data.joined[i].sample;
    if (!sample.has_answerable) continue;
    const int label =
        options.ap_positive_answerable ? sample.answerable : 1 - sample.answerable;
    const double score = options.ap_positive_answerable
                             ? result.predictions[i].answerability
                             : 1.0 - result.predictions[i].answerability;
    ap_scores.push_back(score);
    ap_labels.push_back(label);
    positives += static_cast<std::size_t>(label);
  }
  if (ap_scores.empty())
    report.ap_note = "no answerability labels in the split";
  else if (positives == 0)
    report.ap_note = "no positive answerability labels in the split";
  else
    report.answerability_ap = average_precision(ap_scores, ap_labels);
  return result;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j{{"vqa_accuracy", r.vqa_accuracy},
                   {"per_type_accuracy", r.per_type_accuracy},
                   {"sample_count", r.sample_count},
                   {"skipped_count", r.skipped_count},
                   {"score_mode", r.score_mode}};
  if (r.answerability_ap)
    j["answerability_ap"] = *r.answerability_ap;
  else
    j["answerability_ap"] = nullptr;
  if (!r.ap_note.empty()) j["ap_note"] = r.ap_note;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.vqa_accuracy = j.at("vqa_accuracy").get<double>();
  if (j.contains("answerability_ap") && !j["answerability_ap"].is_null())
    r.answerability_ap = j["answerability_ap"].get<double>();
  if (j.contains("ap_note")) r.ap_note = j["ap_note"].get<std::string>();
  r.per_type_accuracy = j.at("per_type_accuracy").get<std::map<std::string, double>>();
  r.sample_count = j.at("sample_count").get<std::size_t>();
  r.skipped_count = j.at("skipped_count").get<std::size_t>();
  r.score_mode = j.value("score_mode", std::string());
  return r;
}

// Challenge submission shape: one object per sample, exactly these keys.
inline nlohmann::json predictions_to_json(std::span<const Prediction> predictions) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : predictions)
    arr.push_back({{"image", p.sample_id}, {"answer", p.answer}, {"answerability", p.answerability}});
  return arr;
}

}  // namespace vqahead
