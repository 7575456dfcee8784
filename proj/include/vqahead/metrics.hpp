#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqahead/annotations.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/normalize.hpp"
#include "vqahead/vqa_score.hpp"

namespace vqahead {

struct ScoredPrediction {
  std::string sample_id;
  std::string answer;
};

// Mean vqa_score of each prediction against its sample's crowd answers.
// Every prediction must resolve to a sample; answers are normalized on
// both sides before scoring.
inline double vqa_accuracy(std::span<const ScoredPrediction> predictions,
                           std::span<const AnnotatedSample> samples, ScoreMode mode) {
  if (predictions.empty()) throw validation_error("vqa_accuracy over no predictions");
  std::unordered_map<std::string_view, const AnnotatedSample*> by_id;
  by_id.reserve(samples.size());
  for (const auto& s : samples) by_id.emplace(s.sample_id, &s);

  double sum = 0.0;
  for (const auto& pred : predictions) {
    auto it = by_id.find(pred.sample_id);
    if (it == by_id.end())
      throw validation_error("prediction for unknown sample '" + pred.sample_id + "'");
    std::vector<std::string> crowd;
    crowd.reserve(it->second->answers.size());
    for (const auto& a : it->second->answers) crowd.push_back(normalize_answer(a));
    sum += vqa_score(normalize_answer(pred.answer), crowd, mode);
  }
  return sum / static_cast<double>(predictions.size());
}

// AP over a ranking by score descending, ties broken by original index
// ascending: (1/P) * sum over positive ranks k of precision@k.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw validation_error("average_precision: scores and labels differ in length");
  if (scores.empty()) throw validation_error("average_precision over no items");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw validation_error("average_precision labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0) throw validation_error("average_precision requires at least one positive");

  std::vector<std::size_t> rank(scores.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < rank.size(); ++k) {
    if (labels[rank[k]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

}  // namespace vqahead
