#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vqahead/errors.hpp"
#include "vqahead/nn_ops.hpp"

namespace vqahead {

struct ModelOutput {
  Vec answer_probs;
  Vec type_probs;
  double answerability = 1.0;
};

// mean_prob: weighted arithmetic mean of probabilities (default).
// mean_log: weighted geometric mean, renormalized.
enum class EnsembleMode { mean_prob, mean_log };

inline const char* to_string(EnsembleMode m) {
  return m == EnsembleMode::mean_prob ? "mean_prob" : "mean_log";
}

inline EnsembleMode ensemble_mode_from_string(std::string_view s) {
  if (s == "mean_prob") return EnsembleMode::mean_prob;
  if (s == "mean_log") return EnsembleMode::mean_log;
  throw validation_error("unknown ensemble mode '" + std::string(s) +
                         "' (expected mean_prob or mean_log)");
}

// Combines per-model outputs; weights default to uniform. Zero-weight
// models are skipped outright, so weights (1,0) reproduce model 1
// bitwise. Answerability is always combined arithmetically.
inline ModelOutput ensemble_predict(std::span<const ModelOutput> outputs,
                                    std::span<const double> weights = {},
                                    EnsembleMode mode = EnsembleMode::mean_prob) {
  if (outputs.empty()) throw validation_error("ensemble over no model outputs");
  const std::size_t a = outputs[0].answer_probs.size();
  const std::size_t t = outputs[0].type_probs.size();
  for (const auto& o : outputs)
    if (o.answer_probs.size() != a || o.type_probs.size() != t)
      throw validation_error("ensemble model outputs have mismatched dimensions");

  std::vector<double> w;
  if (weights.empty()) {
    w.assign(outputs.size(), 1.0 / static_cast<double>(outputs.size()));
  } else {
    if (weights.size() != outputs.size())
      throw validation_error("ensemble weights count does not match model count");
    double sum = 0.0;
    for (double x : weights) {
      if (!(x >= 0.0)) throw validation_error("ensemble weights must be nonnegative");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw validation_error("ensemble weights must sum to 1");
    w.assign(weights.begin(), weights.end());
  }

  std::size_t live = 0, last_live = 0;
  for (std::size_t m = 0; m < w.size(); ++m)
    if (w[m] != 0.0) ++live, last_live = m;
  if (live == 1) return outputs[last_live];  // exact in either mode

  ModelOutput out;
  out.answer_probs.assign(a, 0.0);
  out.type_probs.assign(t, 0.0);
  out.answerability = 0.0;
  const bool log_space = mode == EnsembleMode::mean_log;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    if (w[m] == 0.0) continue;
    const ModelOutput& o = outputs[m];
    if (log_space) {
      for (std::size_t i = 0; i < a; ++i) out.answer_probs[i] += w[m] * std::log(o.answer_probs[i]);
      for (std::size_t i = 0; i < t; ++i) out.type_probs[i] += w[m] * std::log(o.type_probs[i]);
    } else {
      for (std::size_t i = 0; i < a; ++i) out.answer_probs[i] += w[m] * o.answer_probs[i];
      for (std::size_t i = 0; i < t; ++i) out.type_probs[i] += w[m] * o.type_probs[i];
    }
    out.answerability += w[m] * o.answerability;
  }
  if (log_space) {
    const auto renorm = [](Vec& v) {
      const double m = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
      }
      if (!(sum > 0.0)) throw validation_error("ensemble log-mean collapsed to zero mass");
      for (double& x : v) x /= sum;
    };
    renorm(out.answer_probs);
    renorm(out.type_probs);
  }
  return out;
}

}  // namespace vqahead
