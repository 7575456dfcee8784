#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqahead/vqahead.hpp"

namespace vq = vqahead;
using nlohmann::json;

namespace {

json parse_json_file(const std::string& path) {
  const std::string bytes = vq::detail::read_file_bytes(path);
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw vq::parse_error("malformed JSON in " + path + " at byte " + std::to_string(e.byte) +
                              ": " + e.what(),
                          e.byte);
  }
}

vq::TypeRuleTable load_rules(const std::string& path) {
  if (path.empty()) return vq::TypeRuleTable::default_instance();
  return vq::TypeRuleTable::from_json(parse_json_file(path));
}

void write_json_atomic(const std::string& path, const json& j) {
  vq::write_file_atomic(path, j.dump(2) + "\n");
}

// Re-derives each sample's target class from the stored vocabulary state
// (selection frequencies + score mode), so training never silently builds
// a vocabulary of its own.
std::unordered_map<std::string, std::int32_t> targets_from_vocab(
    std::span<const vq::AnnotatedSample> samples, const vq::Vocabulary& vocab) {
  std::unordered_map<std::string, std::int32_t> targets;
  targets.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<std::string> crowd;
    crowd.reserve(s.answers.size());
    for (const auto& a : s.answers) crowd.push_back(vq::normalize_answer(a));
    const std::string target =
        vq::select_target_answer(crowd, vocab.global_freq, vocab.score_mode);
    const std::int32_t idx = vocab.index(target);
    if (idx < 0)
      throw vq::validation_error("target answer '" + target + "' for sample '" + s.sample_id +
                                 "' is not in the vocabulary; rebuild the vocabulary from this "
                                 "annotation split");
    targets[s.sample_id] = idx;
  }
  return targets;
}

std::vector<vq::LoadedCheckpoint> load_checkpoints(const std::vector<std::string>& paths) {
  std::vector<vq::LoadedCheckpoint> cks;
  cks.reserve(paths.size());
  for (const auto& p : paths) cks.push_back(vq::load_checkpoint(p));
  return cks;
}

unsigned resolve_threads(std::size_t requested) {
  return requested == 0 ? vq::default_thread_count() : static_cast<unsigned>(requested);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VQA answer head on precomputed image/text features: vocabulary building, "
               "training, prediction, and evaluation"};
  app.require_subcommand(1);

  // --- build-vocab ---------------------------------------------------
  auto* bv = app.add_subcommand("build-vocab",
                                "Select one target answer per sample and write the vocabulary");
  std::string bv_annotations, bv_out, bv_rules;
  std::string bv_score_mode = "simple", bv_freq_mode = "crowd";
  std::size_t bv_n_answers = 10;
  bv->add_option("--annotations", bv_annotations, "training annotations JSON")->required();
  bv->add_option("--out", bv_out, "output vocabulary JSON")->required();
  bv->add_option("--score-mode", bv_score_mode, "simple|leave_one_out (default simple)");
  bv->add_option("--freq-mode", bv_freq_mode,
                 "tie-break frequency source: crowd|selected (default crowd)");
  bv->add_option("--rules", bv_rules, "custom answer-type rule table JSON");
  bv->add_option("--n-answers", bv_n_answers, "crowd answers per sample (default 10)");

  // --- train ----------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the gated answer head and write a checkpoint");
  std::string tr_annotations, tr_img, tr_txt, tr_vocab, tr_config, tr_out, tr_rules;
  std::string tr_val_annotations, tr_val_img, tr_val_txt;
  std::string tr_optimizer, tr_policy = "type";
  std::uint64_t tr_seed = 42;
  std::size_t tr_threads = 0, tr_epochs = 0, tr_batch = 0, tr_patience = 0, tr_n_answers = 10;
  double tr_lr = 0.0, tr_dropout = 0.0, tr_lr_decay = 1.0;
  std::vector<std::size_t> tr_hidden;
  bool tr_trunk_relu = false, tr_gate_on_probs = false, tr_no_variant_sampling = false;
  tr->add_option("--annotations", tr_annotations, "training annotations JSON")->required();
  tr->add_option("--image-features", tr_img, "image feature file (CFV1)")->required();
  tr->add_option("--text-features", tr_txt, "text feature file (CFV1)")->required();
  tr->add_option("--vocab", tr_vocab, "vocabulary JSON from build-vocab")->required();
  tr->add_option("--out", tr_out, "output checkpoint path")->required();
  tr->add_option("--config", tr_config, "training config JSON (flags override file values)");
  tr->add_option("--rules", tr_rules, "custom answer-type rule table JSON");
  auto* tr_opt_seed = tr->add_option("--seed", tr_seed, "RNG seed (default 42)");
  auto* tr_opt_threads = tr->add_option("--threads", tr_threads, "worker threads (0 = all cores)");
  auto* tr_opt_epochs = tr->add_option("--epochs", tr_epochs, "training epochs");
  auto* tr_opt_batch = tr->add_option("--batch-size", tr_batch, "samples per optimizer step");
  auto* tr_opt_lr = tr->add_option("--learning-rate", tr_lr, "Adam/SGD learning rate");
  auto* tr_opt_dropout = tr->add_option("--dropout", tr_dropout, "dropout rate in [0,1)");
  auto* tr_opt_decay = tr->add_option("--lr-decay", tr_lr_decay, "per-epoch LR multiplier");
  auto* tr_opt_patience =
      tr->add_option("--patience", tr_patience, "early-stop patience (0 disables)");
  auto* tr_opt_optimizer = tr->add_option("--optimizer", tr_optimizer, "adam|sgd");
  auto* tr_opt_hidden = tr->add_option("--hidden", tr_hidden, "trunk layer widths (repeatable)");
  tr->add_flag("--trunk-relu", tr_trunk_relu, "ReLU after each trunk layer");
  tr->add_flag("--gate-on-probs", tr_gate_on_probs, "gate input = type probabilities");
  tr->add_flag("--no-variant-sampling", tr_no_variant_sampling,
               "always train on image variant 0");
  tr->add_option("--n-answers", tr_n_answers, "crowd answers per sample (default 10)");
  tr->add_option("--val-annotations", tr_val_annotations,
                 "validation annotations JSON; enables best-epoch tracking");
  tr->add_option("--val-image-features", tr_val_img,
                 "validation image features (default: --image-features)");
  tr->add_option("--val-text-features", tr_val_txt,
                 "validation text features (default: --text-features)");
  tr->add_option("--answerability-policy", tr_policy,
                 "type|answer-class (used for validation predictions)");

  // --- predict ----------------------------------------------------------
  auto* pd = app.add_subcommand("predict", "Write challenge-shaped predictions for a split");
  std::string pd_annotations, pd_img, pd_txt, pd_vocab, pd_out, pd_rules;
  std::string pd_policy = "type", pd_mode = "mean_prob";
  std::vector<std::string> pd_checkpoints;
  std::vector<double> pd_weights;
  std::size_t pd_threads = 0, pd_top_k = 5;
  pd->add_option("--annotations", pd_annotations, "annotations JSON (answers optional)")
      ->required();
  pd->add_option("--image-features", pd_img, "image feature file (CFV1)")->required();
  pd->add_option("--text-features", pd_txt, "text feature file (CFV1)")->required();
  pd->add_option("--vocab", pd_vocab, "vocabulary JSON")->required();
  pd->add_option("--checkpoint", pd_checkpoints, "checkpoint path (repeat to ensemble)")
      ->required();
  pd->add_option("--out", pd_out, "output predictions JSON")->required();
  pd->add_option("--rules", pd_rules, "custom answer-type rule table JSON");
  pd->add_option("--answerability-policy", pd_policy, "type|answer-class (default type)");
  pd->add_option("--ensemble-mode", pd_mode, "mean_prob|mean_log (default mean_prob)");
  pd->add_option("--weight", pd_weights, "per-checkpoint ensemble weight (repeatable)");
  pd->add_option("--top-k", pd_top_k, "answers kept per sample internally (default 5)");
  pd->add_option("--threads", pd_threads, "worker threads (0 = all cores)");

  // --- evaluate ---------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Score checkpoints against an annotated split");
  std::string ev_annotations, ev_img, ev_txt, ev_vocab, ev_out, ev_predictions_out, ev_rules;
  std::string ev_policy = "type", ev_mode = "mean_prob", ev_ap_positive = "answerable";
  std::vector<std::string> ev_checkpoints;
  std::vector<double> ev_weights;
  std::size_t ev_threads = 0, ev_n_answers = 10;
  ev->add_option("--annotations", ev_annotations, "annotations JSON with full crowd answers")
      ->required();
  ev->add_option("--image-features", ev_img, "image feature file (CFV1)")->required();
  ev->add_option("--text-features", ev_txt, "text feature file (CFV1)")->required();
  ev->add_option("--vocab", ev_vocab, "vocabulary JSON")->required();
  ev->add_option("--checkpoint", ev_checkpoints, "checkpoint path (repeat to ensemble)")
      ->required();
  ev->add_option("--out", ev_out, "also write the report JSON here");
  ev->add_option("--predictions-out", ev_predictions_out, "also write per-sample predictions");
  ev->add_option("--rules", ev_rules, "custom answer-type rule table JSON");
  ev->add_option("--answerability-policy", ev_policy, "type|answer-class (default type)");
  ev->add_option("--ensemble-mode", ev_mode, "mean_prob|mean_log (default mean_prob)");
  ev->add_option("--weight", ev_weights, "per-checkpoint ensemble weight (repeatable)");
  ev->add_option("--ap-positive", ev_ap_positive,
                 "answerability AP positive class: answerable|unanswerable");
  ev->add_option("--threads", ev_threads, "worker threads (0 = all cores)");
  ev->add_option("--n-answers", ev_n_answers, "crowd answers per sample (default 10)");

  // --- inspect-features ---------------------------------------------------
  auto* in = app.add_subcommand("inspect-features", "Summarize a CFV1 feature file");
  std::string in_path, in_key;
  std::uint32_t in_variant = 0;
  in->add_option("--input", in_path, "feature file to inspect")->required();
  in->add_option("--key", in_key, "print the stored vector for this key");
  in->add_option("--variant", in_variant, "variant id for --key (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (bv->parsed()) {
      const vq::TypeRuleTable rules = load_rules(bv_rules);
      const auto samples =
          vq::parse_annotations(bv_annotations, vq::ParseMode::train, bv_n_answers);
      const vq::VocabBuildResult built =
          vq::build_vocabulary(samples, vq::score_mode_from_string(bv_score_mode), rules,
                               vq::freq_mode_from_string(bv_freq_mode));
      vq::save_vocabulary(bv_out, built.vocab);
      const json summary{{"vocab", bv_out},
                         {"classes", built.vocab.size()},
                         {"samples", samples.size()},
                         {"score_mode", vq::to_string(built.vocab.score_mode)},
                         {"freq_mode", bv_freq_mode}};
      std::cout << summary.dump() << "\n";
    } else if (tr->parsed()) {
      vq::TrainConfig cfg;
      if (!tr_config.empty()) cfg = vq::train_config_from_json(parse_json_file(tr_config));
      if (*tr_opt_seed) cfg.seed = tr_seed;
      if (*tr_opt_threads) cfg.threads = tr_threads;
      if (*tr_opt_epochs) cfg.epochs = tr_epochs;
      if (*tr_opt_batch) cfg.batch_size = tr_batch;
      if (*tr_opt_lr) cfg.learning_rate = tr_lr;
      if (*tr_opt_dropout) cfg.dropout_rate = tr_dropout;
      if (*tr_opt_decay) cfg.lr_decay = tr_lr_decay;
      if (*tr_opt_patience) cfg.early_stop_patience = tr_patience;
      if (*tr_opt_optimizer) cfg.optimizer = tr_optimizer;
      if (*tr_opt_hidden) cfg.hidden_dims = tr_hidden;
      if (tr_trunk_relu) cfg.trunk_relu = true;
      if (tr_gate_on_probs) cfg.gate_on_probs = true;
      if (tr_no_variant_sampling) cfg.variant_sampling = false;
      cfg.validate();

      const vq::TypeRuleTable rules = load_rules(tr_rules);
      const vq::Vocabulary vocab = vq::load_vocabulary(tr_vocab, rules);
      const auto samples =
          vq::parse_annotations(tr_annotations, vq::ParseMode::train, tr_n_answers);
      const vq::FeatureSet img = vq::read_feature_file(tr_img);
      const vq::FeatureSet txt = vq::read_feature_file(tr_txt);
      const vq::JoinResult joined = vq::join_split(samples, img, txt, vq::JoinMode::train);
      const auto targets = targets_from_vocab(samples, vocab);
      const auto examples = vq::make_training_examples(joined.joined, vocab, targets);
      if (examples.empty()) throw vq::validation_error("no training samples after joining");

      // Validation split storage must outlive fit().
      std::vector<vq::AnnotatedSample> val_samples;
      std::optional<vq::FeatureSet> val_img_own, val_txt_own;
      vq::JoinResult val_joined;
      vq::ValidationFn val_fn;
      const vq::AnswerabilityContext ctx = vq::make_answerability_context(vocab);
      const vq::AnswerabilityPolicy policy = vq::answerability_policy_from_string(tr_policy);
      if (!tr_val_annotations.empty()) {
        val_samples =
            vq::parse_annotations(tr_val_annotations, vq::ParseMode::train, tr_n_answers);
        const vq::FeatureSet* vi = &img;
        const vq::FeatureSet* vt = &txt;
        if (!tr_val_img.empty()) {
          val_img_own = vq::read_feature_file(tr_val_img);
          vi = &*val_img_own;
        }
        if (!tr_val_txt.empty()) {
          val_txt_own = vq::read_feature_file(tr_val_txt);
          vt = &*val_txt_own;
        }
        val_joined = vq::join_split(val_samples, *vi, *vt, vq::JoinMode::train);
        if (val_joined.joined.empty())
          throw vq::validation_error("validation split has no usable samples");
        val_fn = [&](const vq::GatedHeadParams& p) {
          std::vector<vq::ScoredPrediction> preds;
          preds.reserve(val_joined.joined.size());
          for (const auto& js : val_joined.joined) {
            const vq::Vec x = vq::concat_input(js.image(), js.text);
            const vq::PredictOutput out = vq::predict(p, x, ctx, policy);
            preds.push_back({js.sample->sample_id, vocab.classes[vq::argmax(out.answer_probs)]});
          }
          return vq::vqa_accuracy(preds, val_samples, vocab.score_mode);
        };
      }

      const vq::EpochLogFn log_fn = [](std::size_t epoch, const vq::EpochStats& st,
                                       const double* val, double seconds) {
        json line{{"epoch", epoch},
                  {"loss_total", st.loss_total},
                  {"loss_answer", st.loss_answer},
                  {"loss_type", st.loss_type},
                  {"train_accuracy", st.train_accuracy},
                  {"seconds", seconds}};
        if (val) line["val_accuracy"] = *val;
        std::cout << line.dump() << "\n" << std::flush;
      };

      const vq::FitResult r =
          vq::fit(examples, img.dim(), txt.dim(), vocab.size(), vocab.type_count(), cfg,
                  resolve_threads(cfg.threads), val_fn, log_fn);

      const json extra{{"train_config", vq::train_config_to_json(cfg)},
                       {"best_epoch", r.best_epoch},
                       {"epochs_run", r.history.size()},
                       {"used_validation", r.used_validation}};
      vq::save_checkpoint(tr_out, r.params,
                          vq::checkpoint_metadata(r.params, vocab.hash(), cfg.seed, extra));
      json done{{"checkpoint", tr_out},
                {"best_epoch", r.best_epoch},
                {"epochs_run", r.history.size()},
                {"seed", cfg.seed}};
      if (!r.history.empty()) done["final_train_accuracy"] = r.history.back().train_accuracy;
      std::cout << done.dump() << "\n";
    } else if (pd->parsed()) {
      const vq::TypeRuleTable rules = load_rules(pd_rules);
      const vq::Vocabulary vocab = vq::load_vocabulary(pd_vocab, rules);
      const auto samples = vq::parse_annotations(pd_annotations, vq::ParseMode::infer);
      const vq::FeatureSet img = vq::read_feature_file(pd_img);
      const vq::FeatureSet txt = vq::read_feature_file(pd_txt);
      const vq::JoinResult joined = vq::join_split(samples, img, txt, vq::JoinMode::infer);
      const auto cks = load_checkpoints(pd_checkpoints);

      vq::EvalOptions options;
      options.policy = vq::answerability_policy_from_string(pd_policy);
      options.ensemble_mode = vq::ensemble_mode_from_string(pd_mode);
      options.weights = pd_weights;
      options.top_k = pd_top_k;
      options.threads = resolve_threads(pd_threads);
      const auto preds = vq::predict_samples(cks, joined.joined, vocab, options);
      write_json_atomic(pd_out, vq::predictions_to_json(preds));
      const json summary{{"predictions", pd_out},
                         {"predicted", preds.size()},
                         {"skipped", joined.skipped.size()}};
      std::cout << summary.dump() << "\n";
    } else if (ev->parsed()) {
      const vq::TypeRuleTable rules = load_rules(ev_rules);
      const vq::Vocabulary vocab = vq::load_vocabulary(ev_vocab, rules);
      const auto samples =
          vq::parse_annotations(ev_annotations, vq::ParseMode::train, ev_n_answers);
      const vq::FeatureSet img = vq::read_feature_file(ev_img);
      const vq::FeatureSet txt = vq::read_feature_file(ev_txt);
      const vq::JoinResult joined = vq::join_split(samples, img, txt, vq::JoinMode::infer);
      const auto cks = load_checkpoints(ev_checkpoints);

      if (ev_ap_positive != "answerable" && ev_ap_positive != "unanswerable")
        throw vq::validation_error("--ap-positive must be answerable or unanswerable");
      vq::EvalOptions options;
      options.policy = vq::answerability_policy_from_string(ev_policy);
      options.ensemble_mode = vq::ensemble_mode_from_string(ev_mode);
      options.weights = ev_weights;
      options.ap_positive_answerable = ev_ap_positive == "answerable";
      options.threads = resolve_threads(ev_threads);
      options.rules = &rules;
      const vq::EvalResult res = vq::evaluate(cks, joined, vocab, options);
      const json report = vq::report_to_json(res.report);
      std::cout << report.dump() << "\n";
      if (!ev_out.empty()) write_json_atomic(ev_out, report);
      if (!ev_predictions_out.empty())
        write_json_atomic(ev_predictions_out, vq::predictions_to_json(res.predictions));
    } else if (in->parsed()) {
      const vq::FeatureSet set = vq::read_feature_file(in_path);
      if (!in_key.empty()) {
        const std::vector<float>* values = set.find(in_key, in_variant);
        if (!values)
          throw vq::validation_error("no record for key '" + in_key + "' variant " +
                                     std::to_string(in_variant) + " in " + in_path);
        const json out{
            {"key", in_key}, {"variant", in_variant}, {"dim", set.dim()}, {"values", *values}};
        std::cout << out.dump() << "\n";
      } else {
        json keys = json::array();
        for (const auto& [key, variants] : set.by_key()) {
          if (keys.size() == 10) break;
          keys.push_back({{"key", key}, {"variants", variants.size()}});
        }
        const json out{{"path", in_path},
                       {"dim", set.dim()},
                       {"records", set.size()},
                       {"unique_keys", set.unique_keys()},
                       {"sample_keys", keys}};
        std::cout << out.dump() << "\n";
      }
    }
  } catch (const vq::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vq::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
