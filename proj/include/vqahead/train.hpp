#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqahead/adam.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/head.hpp"
#include "vqahead/join.hpp"
#include "vqahead/parallel.hpp"
#include "vqahead/rng.hpp"
#include "vqahead/vocabulary.hpp"

namespace vqahead {

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double dropout_rate = 0.5;
  std::uint64_t seed = 42;
  bool variant_sampling = true;
  std::size_t early_stop_patience = 0;  // 0 disables; counts epochs without val improvement
  std::string optimizer = "adam";       // or "sgd"
  double lr_decay = 1.0;                // multiplied onto the rate after each epoch
  std::vector<std::size_t> hidden_dims{512};
  bool trunk_relu = false;
  bool gate_on_probs = false;
  double loss_weight_answer = 1.0;
  double loss_weight_type = 1.0;
  std::size_t threads = 0;  // 0 = all available cores

  HeadConfig head_config() const {
    return HeadConfig{hidden_dims,        trunk_relu,         gate_on_probs,
                      dropout_rate,       loss_weight_answer, loss_weight_type};
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw validation_error("learning_rate must be > 0");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
      throw validation_error("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw validation_error("adam_eps must be > 0");
    if (batch_size < 1) throw validation_error("batch_size must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw validation_error("dropout_rate must lie in [0, 1)");
    if (optimizer != "adam" && optimizer != "sgd")
      throw validation_error("optimizer must be adam or sgd");
    if (!(lr_decay > 0.0)) throw validation_error("lr_decay must be > 0");
    if (hidden_dims.empty()) throw validation_error("hidden_dims must be non-empty");
    for (std::size_t h : hidden_dims)
      if (h == 0) throw validation_error("hidden_dims entries must be >= 1");
    if (loss_weight_answer < 0.0 || loss_weight_type < 0.0)
      throw validation_error("loss weights must be >= 0");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"dropout_rate", c.dropout_rate},
          {"seed", c.seed},
          {"variant_sampling", c.variant_sampling},
          {"early_stop_patience", c.early_stop_patience},
          {"optimizer", c.optimizer},
          {"lr_decay", c.lr_decay},
          {"hidden_dims", c.hidden_dims},
          {"trunk_relu", c.trunk_relu},
          {"gate_on_probs", c.gate_on_probs},
          {"loss_weight_answer", c.loss_weight_answer},
          {"loss_weight_type", c.loss_weight_type},
          {"threads", c.threads}};
}

// Keys mirror the field names; unknown keys are rejected to catch typos.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw validation_error("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "dropout_rate") c.dropout_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "variant_sampling") c.variant_sampling = value.get<bool>();
      else if (key == "early_stop_patience") c.early_stop_patience = value.get<std::size_t>();
      else if (key == "optimizer") c.optimizer = value.get<std::string>();
      else if (key == "lr_decay") c.lr_decay = value.get<double>();
      else if (key == "hidden_dims") c.hidden_dims = value.get<std::vector<std::size_t>>();
      else if (key == "trunk_relu") c.trunk_relu = value.get<bool>();
      else if (key == "gate_on_probs") c.gate_on_probs = value.get<bool>();
      else if (key == "loss_weight_answer") c.loss_weight_answer = value.get<double>();
      else if (key == "loss_weight_type") c.loss_weight_type = value.get<double>();
      else if (key == "threads") c.threads = value.get<std::size_t>();
      else throw validation_error("unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("train config field has wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

struct TrainingExample {
  const JoinedSample* sample = nullptr;
  std::int32_t target_class = -1;
  std::int32_t target_type = -1;
};

inline std::vector<TrainingExample> make_training_examples(
    std::span<const JoinedSample> joined, const Vocabulary& vocab,
    const std::unordered_map<std::string, std::int32_t>& targets) {
  std::vector<TrainingExample> out;
  out.reserve(joined.size());
  for (const auto& js : joined) {
    auto it = targets.find(js.sample->sample_id);
    if (it == targets.end())
      throw validation_error("no target class for sample '" + js.sample->sample_id + "'");
    if (it->second < 0 || static_cast<std::size_t>(it->second) >= vocab.size())
      throw validation_error("target class out of range for sample '" + js.sample->sample_id + "'");
    out.push_back(TrainingExample{&js, it->second,
                                  vocab.class_type[static_cast<std::size_t>(it->second)]});
  }
  return out;
}

struct EpochStats {
  double loss_total = 0.0, loss_answer = 0.0, loss_type = 0.0;
  double train_accuracy = 0.0;
  std::size_t samples = 0;
};

// One pass over the data: seeded shuffle, per-sample variant pick and
// dropout streams derived from (seed, epoch, position), one optimizer
// step per batch on the mean gradient. Same seed and thread count give
// bitwise identical parameters; across thread counts only the gradient
// summation order changes.
inline EpochStats train_epoch(GatedHeadParams& params, AdamState& state,
                              std::span<const TrainingExample> data, const TrainConfig& cfg,
                              std::size_t epoch_index, unsigned threads,
                              double lr_override = -1.0) {
  if (data.empty()) throw validation_error("train_epoch on an empty dataset");
  cfg.validate();
  const double lr = lr_override > 0.0 ? lr_override : cfg.learning_rate;
  const std::uint64_t epoch_seed = mix_seed(cfg.seed, epoch_index);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 shuffle_rng(epoch_seed);
  shuffle_deterministic(order, shuffle_rng);

  const std::size_t n = data.size();
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads == 0 ? default_thread_count() : threads,
                                      static_cast<unsigned>(std::min<std::size_t>(cfg.batch_size, n))));

  std::vector<GatedHeadParams> grads(workers, GatedHeadParams::zeros_like(params));
  struct Partial {
    double total = 0.0, answer = 0.0, type = 0.0;
    std::size_t correct = 0;
  };
  std::vector<Partial> partials(workers);
  EpochStats stats;
  stats.samples = n;

  for (std::size_t batch_start = 0; batch_start < n; batch_start += cfg.batch_size) {
    const std::size_t bn = std::min(n, batch_start + cfg.batch_size) - batch_start;
    for (unsigned w = 0; w < workers; ++w) {
      for (Vec* v : grads[w].tensors()) std::fill(v->begin(), v->end(), 0.0);
      partials[w] = Partial{};
    }
    parallel_for_chunks(bn, workers, [&](std::size_t begin, std::size_t end, unsigned chunk) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t position = batch_start + i;
        const TrainingExample& ex = data[order[position]];
        SplitMix64 rng(mix_seed(epoch_seed, position + 1));
        std::span<const float> image = ex.sample->image();
        if (cfg.variant_sampling && ex.sample->image_variants.size() > 1)
          image = ex.sample->image_variants[static_cast<std::size_t>(
              rng.next_below(ex.sample->image_variants.size()))];
        const Vec x = concat_input(image, ex.sample->text);
        const ForwardTrace trace = forward(params, x, cfg.dropout_rate, true, rng);
        const LossParts lp =
            loss(trace, static_cast<std::size_t>(ex.target_class),
                 static_cast<std::size_t>(ex.target_type), cfg.loss_weight_answer,
                 cfg.loss_weight_type);
        backward_accumulate(trace, params, static_cast<std::size_t>(ex.target_class),
                            static_cast<std::size_t>(ex.target_type), grads[chunk],
                            cfg.loss_weight_answer, cfg.loss_weight_type);
        partials[chunk].total += lp.total;
        partials[chunk].answer += lp.answer;
        partials[chunk].type += lp.type;
        if (argmax(trace.gated) == static_cast<std::size_t>(ex.target_class))
          ++partials[chunk].correct;
      }
    });

    // Chunk-ordered reductions keep results reproducible for a fixed
    // worker count.
    for (unsigned w = 1; w < workers; ++w) {
      auto dst = grads[0].tensors();
      const auto src = grads[w].tensors();
      for (std::size_t t = 0; t < dst.size(); ++t)
        for (std::size_t k = 0; k < dst[t]->size(); ++k) (*dst[t])[k] += (*src[t])[k];
      partials[0].total += partials[w].total;
      partials[0].answer += partials[w].answer;
      partials[0].type += partials[w].type;
      partials[0].correct += partials[w].correct;
    }
    const double inv = 1.0 / static_cast<double>(bn);
    for (Vec* v : grads[0].tensors())
      for (double& g : *v) g *= inv;
    if (cfg.optimizer == "adam")
      adam_step(params, grads[0], state, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    else
      sgd_step(params, grads[0], lr);

    stats.loss_total += partials[0].total;
    stats.loss_answer += partials[0].answer;
    stats.loss_type += partials[0].type;
    stats.train_accuracy += static_cast<double>(partials[0].correct);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  stats.loss_total *= inv_n;
  stats.loss_answer *= inv_n;
  stats.loss_type *= inv_n;
  stats.train_accuracy *= inv_n;
  return stats;
}

struct FitResult {
  GatedHeadParams params;
  std::vector<EpochStats> history;
  std::vector<double> val_history;  // one entry per completed epoch when tracking
  std::size_t best_epoch = 0;       // 1-based; 0 when no epoch ran
  bool used_validation = false;
};

using ValidationFn = std::function<double(const GatedHeadParams&)>;
using EpochLogFn =
    std::function<void(std::size_t epoch, const EpochStats&, const double* val_accuracy,
                       double seconds)>;

// Initializes from the seed, runs the epochs, and — when a validation
// callback is supplied — retains the parameters of the best-validation
// epoch (earliest on ties) and applies early stopping if configured.
inline FitResult fit(std::span<const TrainingExample> data, std::size_t d_img, std::size_t d_txt,
                     std::size_t n_answers, std::size_t n_types, const TrainConfig& cfg,
                     unsigned threads, const ValidationFn& validation = {},
                     const EpochLogFn& log = {}) {
  cfg.validate();
  FitResult r;
  r.params = init_params(d_img, d_txt, n_answers, n_types, cfg.head_config(), cfg.seed);
  AdamState state = make_adam_state(r.params);

  GatedHeadParams best = r.params;
  double best_val = 0.0;
  std::size_t best_epoch = 0, since_best = 0;
  double lr = cfg.learning_rate;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochStats st = train_epoch(r.params, state, data, cfg, e, threads, lr);
    lr *= cfg.lr_decay;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.history.push_back(st);

    double val = 0.0;
    const bool has_val = static_cast<bool>(validation);
    if (has_val) {
      val = validation(r.params);
      r.val_history.push_back(val);
      if (best_epoch == 0 || val > best_val) {
        best_val = val;
        best = r.params;
        best_epoch = e + 1;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (log) log(e + 1, st, has_val ? &val : nullptr, seconds);
    if (has_val && cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
  }

  if (validation && best_epoch > 0) {
    r.params = std::move(best);
    r.best_epoch = best_epoch;
    r.used_validation = true;
  } else {
    r.best_epoch = r.history.size();
  }
  return r;
}

}  // namespace vqahead
