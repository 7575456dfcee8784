#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqahead/errors.hpp"
#include "vqahead/nn_ops.hpp"
#include "vqahead/rng.hpp"
#include "vqahead/vocabulary.hpp"

namespace vqahead {

// Architecture knobs. The trunk is one linear layer per hidden dim, with
// layer norm before the first and after the last, and dropout after each
// layer norm in train mode.
struct HeadConfig {
  std::vector<std::size_t> hidden_dims{512};
  bool trunk_relu = false;      // ReLU after each trunk layer
  bool gate_on_probs = false;   // gate input: type logits (default) or softmax probs
  double dropout_rate = 0.5;
  double loss_weight_answer = 1.0;
  double loss_weight_type = 1.0;
};

struct GatedHeadParams {
  std::size_t d_img = 0, d_txt = 0, n_answers = 0, n_types = 0;
  bool trunk_relu = false;
  bool gate_on_probs = false;

  LayerNorm ln_in;           // dim D = d_img + d_txt
  std::vector<Dense> trunk;  // D -> ... -> H
  LayerNorm ln_hidden;       // dim H
  Dense ans;                 // H -> A
  Dense type_head;           // H -> T
  Dense gate;                // T -> A

  std::size_t input_dim() const { return d_img + d_txt; }
  std::size_t hidden_dim() const { return trunk.empty() ? input_dim() : trunk.back().out; }

  std::vector<std::size_t> hidden_dims() const {
    std::vector<std::size_t> dims;
    for (const auto& layer : trunk) dims.push_back(layer.out);
    return dims;
  }

  // Canonical tensor order: serialization, optimizer state, and gradient
  // containers all follow it.
  std::vector<const Vec*> tensors() const {
    std::vector<const Vec*> t{&ln_in.gamma, &ln_in.beta};
    for (const auto& layer : trunk) {
      t.push_back(&layer.w);
      t.push_back(&layer.b);
    }
    t.push_back(&ln_hidden.gamma);
    t.push_back(&ln_hidden.beta);
    t.push_back(&ans.w);
    t.push_back(&ans.b);
    t.push_back(&type_head.w);
    t.push_back(&type_head.b);
    t.push_back(&gate.w);
    t.push_back(&gate.b);
    return t;
  }

  std::vector<Vec*> tensors() {
    std::vector<Vec*> t;
    for (const Vec* v : static_cast<const GatedHeadParams&>(*this).tensors())
      t.push_back(const_cast<Vec*>(v));
    return t;
  }

  static GatedHeadParams zeros_like(const GatedHeadParams& p) {
    GatedHeadParams z = p;
    for (Vec* v : z.tensors()) std::fill(v->begin(), v->end(), 0.0);
    return z;
  }
};

inline void validate_params(const GatedHeadParams& p) {
  const std::size_t d = p.input_dim();
  if (p.d_img == 0 || p.d_txt == 0 || p.n_answers == 0 || p.n_types == 0 || p.trunk.empty())
    throw validation_error("head parameters have a zero dimension");
  if (p.ln_in.dim() != d) throw validation_error("ln_in dimension mismatch");
  std::size_t cur = d;
  for (const auto& layer : p.trunk) {
    if (layer.in != cur || layer.w.size() != layer.in * layer.out || layer.b.size() != layer.out)
      throw validation_error("trunk layer shape mismatch");
    cur = layer.out;
  }
  if (p.ln_hidden.dim() != cur) throw validation_error("ln_hidden dimension mismatch");
  if (p.ans.in != cur || p.ans.out != p.n_answers || p.ans.w.size() != p.ans.in * p.ans.out ||
      p.ans.b.size() != p.ans.out)
    throw validation_error("answer head shape mismatch");
  if (p.type_head.in != cur || p.type_head.out != p.n_types ||
      p.type_head.w.size() != p.type_head.in * p.type_head.out ||
      p.type_head.b.size() != p.type_head.out)
    throw validation_error("type head shape mismatch");
  if (p.gate.in != p.n_types || p.gate.out != p.n_answers ||
      p.gate.w.size() != p.gate.in * p.gate.out || p.gate.b.size() != p.gate.out)
    throw validation_error("gate projection shape mismatch");
}

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) drawn in tensor
// order; biases 0; layer-norm gamma 1, beta 0. Same seed, same bytes.
inline GatedHeadParams init_params(std::size_t d_img, std::size_t d_txt, std::size_t n_answers,
                                   std::size_t n_types, const HeadConfig& config,
                                   std::uint64_t seed) {
  if (d_img == 0 || d_txt == 0 || n_answers == 0 || n_types == 0 || config.hidden_dims.empty())
    throw validation_error("init_params requires all dimensions >= 1");
  for (std::size_t h : config.hidden_dims)
    if (h == 0) throw validation_error("init_params requires all dimensions >= 1");

  GatedHeadParams p;
  p.d_img = d_img;
  p.d_txt = d_txt;
  p.n_answers = n_answers;
  p.n_types = n_types;
  p.trunk_relu = config.trunk_relu;
  p.gate_on_probs = config.gate_on_probs;

  SplitMix64 rng(seed);
  const auto init_dense = [&rng](std::size_t in, std::size_t out) {
    Dense d = Dense::zeros(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : d.w) w = rng.next_uniform(-bound, bound);
    return d;
  };

  const std::size_t d = d_img + d_txt;
  p.ln_in = LayerNorm::identity(d);
  std::size_t cur = d;
  for (std::size_t h : config.hidden_dims) {
    p.trunk.push_back(init_dense(cur, h));
    cur = h;
  }
  p.ln_hidden = LayerNorm::identity(cur);
  p.ans = init_dense(cur, n_answers);
  p.type_head = init_dense(cur, n_types);
  p.gate = init_dense(n_types, n_answers);
  validate_params(p);
  return p;
}

// Everything the backward pass needs, captured by the forward pass.
struct ForwardTrace {
  bool train_mode = false;
  Vec x;                       // concatenated input, dim D
  Vec x_hat;                   // ln_in normalized (pre-affine)
  double x_rstd = 0.0;
  Vec mask_in;                 // inverted-dropout mask over D (all 1 in eval)
  Vec x_drop;                  // ln_in output after mask
  std::vector<Vec> trunk_pre;  // per layer, pre-ReLU
  std::vector<Vec> trunk_out;  // per layer, post-ReLU
  Vec h_hat;                   // ln_hidden normalized (pre-affine)
  double h_rstd = 0.0;
  Vec mask_hidden;             // mask over H
  Vec h;                       // hidden fed to the heads
  Vec z_ans;                   // raw answer logits, dim A
  Vec z_type;                  // type logits, dim T
  Vec gate_in;                 // type logits or probs, per config
  Vec gate_pre;                // gate projection output, dim A
  Vec gate_val;                // sigmoid(gate_pre), in (0,1)
  Vec gated;                   // gate_val * z_ans elementwise
};

inline Vec concat_input(std::span<const float> image, std::span<const float> text) {
  Vec x;
  x.reserve(image.size() + text.size());
  for (float v : image) x.push_back(static_cast<double>(v));
  for (float v : text) x.push_back(static_cast<double>(v));
  return x;
}

inline ForwardTrace forward(const GatedHeadParams& p, std::span<const double> x,
                            double dropout_rate, bool train_mode, SplitMix64& rng) {
  validate_params(p);
  if (x.size() != p.input_dim())
    throw validation_error("forward input has dimension " + std::to_string(x.size()) +
                           ", expected " + std::to_string(p.input_dim()));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw validation_error("dropout_rate must lie in [0, 1)");
  ensure_finite(x, "forward input");

  ForwardTrace t;
  t.train_mode = train_mode;
  t.x.assign(x.begin(), x.end());

  const std::size_t d = p.input_dim();
  t.x_hat.resize(d);
  t.x_drop.resize(d);
  Vec x_norm(d);
  layer_norm_forward(p.ln_in, t.x, t.x_hat, x_norm, t.x_rstd);

  t.mask_in.resize(d);
  if (train_mode)
    dropout_mask(rng, dropout_rate, t.mask_in);
  else
    std::fill(t.mask_in.begin(), t.mask_in.end(), 1.0);
  for (std::size_t i = 0; i < d; ++i) t.x_drop[i] = x_norm[i] * t.mask_in[i];

  const Vec* cur = &t.x_drop;
  t.trunk_pre.resize(p.trunk.size());
  t.trunk_out.resize(p.trunk.size());
  for (std::size_t l = 0; l < p.trunk.size(); ++l) {
    t.trunk_pre[l].resize(p.trunk[l].out);
    dense_forward(p.trunk[l], *cur, t.trunk_pre[l]);
    if (p.trunk_relu) {
      t.trunk_out[l].resize(p.trunk[l].out);
      for (std::size_t i = 0; i < t.trunk_pre[l].size(); ++i)
        t.trunk_out[l][i] = t.trunk_pre[l][i] > 0.0 ? t.trunk_pre[l][i] : 0.0;
    } else {
      t.trunk_out[l] = t.trunk_pre[l];
    }
    cur = &t.trunk_out[l];
  }

  const std::size_t h_dim = p.hidden_dim();
  t.h_hat.resize(h_dim);
  Vec h_norm(h_dim);
  layer_norm_forward(p.ln_hidden, *cur, t.h_hat, h_norm, t.h_rstd);

  t.mask_hidden.resize(h_dim);
  if (train_mode)
    dropout_mask(rng, dropout_rate, t.mask_hidden);
  else
    std::fill(t.mask_hidden.begin(), t.mask_hidden.end(), 1.0);
  t.h.resize(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) t.h[i] = h_norm[i] * t.mask_hidden[i];

  t.z_ans.resize(p.n_answers);
  dense_forward(p.ans, t.h, t.z_ans);
  t.z_type.resize(p.n_types);
  dense_forward(p.type_head, t.h, t.z_type);

  if (p.gate_on_probs) {
    t.gate_in.resize(p.n_types);
    softmax(t.z_type, t.gate_in);
  } else {
    t.gate_in = t.z_type;
  }
  t.gate_pre.resize(p.n_answers);
  dense_forward(p.gate, t.gate_in, t.gate_pre);
  t.gate_val.resize(p.n_answers);
  t.gated.resize(p.n_answers);
  for (std::size_t i = 0; i < p.n_answers; ++i) {
    t.gate_val[i] = sigmoid(t.gate_pre[i]);
    t.gated[i] = t.gate_val[i] * t.z_ans[i];
  }
  return t;
}

// Deterministic eval-mode forward.
inline ForwardTrace forward(const GatedHeadParams& p, std::span<const double> x) {
  SplitMix64 unused(0);
  return forward(p, x, 0.0, false, unused);
}

struct LossParts {
  double total = 0.0, answer = 0.0, type = 0.0;
};

inline LossParts loss(const ForwardTrace& t, std::size_t target_class, std::size_t target_type,
                      double weight_answer = 1.0, double weight_type = 1.0) {
  if (target_class >= t.gated.size()) throw validation_error("target class out of range");
  if (target_type >= t.z_type.size()) throw validation_error("target type out of range");
  LossParts parts;
  parts.answer = cross_entropy(t.gated, target_class);
  parts.type = cross_entropy(t.z_type, target_type);
  parts.total = weight_answer * parts.answer + weight_type * parts.type;
  return parts;
}

// Accumulates dL_total/dtheta into grad (shaped by zeros_like). Gradient
// reaches the type head twice: through its own cross entropy and through
// the gate into the answer cross entropy.
inline void backward_accumulate(const ForwardTrace& t, const GatedHeadParams& p,
                                std::size_t target_class, std::size_t target_type,
                                GatedHeadParams& grad, double weight_answer = 1.0,
                                double weight_type = 1.0) {
  if (target_class >= p.n_answers || target_type >= p.n_types)
    throw validation_error("backward target out of range");
  if (t.x.size() != p.input_dim() || t.h.size() != p.hidden_dim() ||
      t.trunk_pre.size() != p.trunk.size())
    throw validation_error("forward trace does not match the parameters");

  const std::size_t a = p.n_answers, ty = p.n_types, hd = p.hidden_dim(), d = p.input_dim();

  Vec dgated(a);
  cross_entropy_backward(t.gated, target_class, weight_answer, dgated);
  Vec dz_type(ty);
  cross_entropy_backward(t.z_type, target_type, weight_type, dz_type);

  Vec dz_ans(a), dgate_pre(a);
  for (std::size_t i = 0; i < a; ++i) {
    dz_ans[i] = dgated[i] * t.gate_val[i];
    const double dgate_val = dgated[i] * t.z_ans[i];
    dgate_pre[i] = dgate_val * t.gate_val[i] * (1.0 - t.gate_val[i]);
  }

  Vec dgate_in(ty);
  dense_backward(p.gate, t.gate_in, dgate_pre, dgate_in, grad.gate);
  if (p.gate_on_probs) {
    // gate_in = softmax(z_type): pull dgate_in back through the softmax.
    double dot = 0.0;
    for (std::size_t i = 0; i < ty; ++i) dot += dgate_in[i] * t.gate_in[i];
    for (std::size_t i = 0; i < ty; ++i) dz_type[i] += t.gate_in[i] * (dgate_in[i] - dot);
  } else {
    for (std::size_t i = 0; i < ty; ++i) dz_type[i] += dgate_in[i];
  }

  Vec dh(hd, 0.0), dh_part(hd);
  dense_backward(p.ans, t.h, dz_ans, dh_part, grad.ans);
  for (std::size_t i = 0; i < hd; ++i) dh[i] += dh_part[i];
  dense_backward(p.type_head, t.h, dz_type, dh_part, grad.type_head);
  for (std::size_t i = 0; i < hd; ++i) dh[i] += dh_part[i];

  Vec dh_norm(hd);
  for (std::size_t i = 0; i < hd; ++i) dh_norm[i] = dh[i] * t.mask_hidden[i];
  Vec dcur(hd);
  layer_norm_backward(p.ln_hidden, t.h_hat, t.h_rstd, dh_norm, dcur, grad.ln_hidden);

  for (std::size_t l = p.trunk.size(); l-- > 0;) {
    if (p.trunk_relu)
      for (std::size_t i = 0; i < dcur.size(); ++i)
        if (t.trunk_pre[l][i] <= 0.0) dcur[i] = 0.0;
    const Vec& input = l == 0 ? t.x_drop : t.trunk_out[l - 1];
    Vec dprev(p.trunk[l].in);
    dense_backward(p.trunk[l], input, dcur, dprev, grad.trunk[l]);
    dcur = std::move(dprev);
  }

  Vec dx_norm(d), dx(d);
  for (std::size_t i = 0; i < d; ++i) dx_norm[i] = dcur[i] * t.mask_in[i];
  layer_norm_backward(p.ln_in, t.x_hat, t.x_rstd, dx_norm, dx, grad.ln_in);
}

enum class AnswerabilityPolicy { type_based, answer_class };

inline const char* to_string(AnswerabilityPolicy p) {
  return p == AnswerabilityPolicy::type_based ? "type" : "answer-class";
}

inline AnswerabilityPolicy answerability_policy_from_string(std::string_view s) {
  if (s == "type" || s == "type_based") return AnswerabilityPolicy::type_based;
  if (s == "answer-class" || s == "answer_class") return AnswerabilityPolicy::answer_class;
  throw validation_error("unknown answerability policy '" + std::string(s) +
                         "' (expected type or answer-class)");
}

// Vocabulary-derived indices the answerability score reads.
struct AnswerabilityContext {
  std::vector<std::size_t> negative_types;   // typically {unanswerable, unsuitable}
  std::int32_t unanswerable_class = -1;      // class index of "unanswerable", if present
};

inline AnswerabilityContext make_answerability_context(const Vocabulary& vocab) {
  AnswerabilityContext ctx;
  for (const char* name : {"unanswerable", "unsuitable"}) {
    for (std::size_t i = 0; i < vocab.type_names.size(); ++i)
      if (vocab.type_names[i] == name) ctx.negative_types.push_back(i);
  }
  ctx.unanswerable_class = vocab.index("unanswerable");
  return ctx;
}

struct PredictOutput {
  Vec answer_probs;     // simplex over A
  Vec type_probs;       // simplex over T
  double answerability = 1.0;
};

inline PredictOutput predict(const GatedHeadParams& p, std::span<const double> x,
                             const AnswerabilityContext& ctx,
                             AnswerabilityPolicy policy = AnswerabilityPolicy::type_based) {
  const ForwardTrace t = forward(p, x);
  PredictOutput out;
  out.answer_probs.resize(p.n_answers);
  softmax(t.gated, out.answer_probs);
  out.type_probs.resize(p.n_types);
  softmax(t.z_type, out.type_probs);
  double negative = 0.0;
  if (policy == AnswerabilityPolicy::type_based) {
    for (std::size_t idx : ctx.negative_types) negative += out.type_probs[idx];
  } else if (ctx.unanswerable_class >= 0) {
    negative = out.answer_probs[static_cast<std::size_t>(ctx.unanswerable_class)];
  }
  out.answerability = std::clamp(1.0 - negative, 0.0, 1.0);
  return out;
}

}  // namespace vqahead
