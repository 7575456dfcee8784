#pragma once

#include <cmath>
#include <cstdint>

#include "vqahead/errors.hpp"
#include "vqahead/head.hpp"

namespace vqahead {

// First/second-moment accumulators shaped exactly like the parameters.
struct AdamState {
  GatedHeadParams m, v;
  std::uint64_t t = 0;
};

inline AdamState make_adam_state(const GatedHeadParams& p) {
  return AdamState{GatedHeadParams::zeros_like(p), GatedHeadParams::zeros_like(p), 0};
}

namespace detail {
inline void check_same_shapes(const std::vector<Vec*>& a, const std::vector<const Vec*>& b,
                              const char* what) {
  if (a.size() != b.size()) throw validation_error(std::string(what) + ": tensor count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->size() != b[i]->size())
      throw validation_error(std::string(what) + ": tensor shape mismatch");
}
}  // namespace detail

// Standard Adam with bias correction:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
//   theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
inline void adam_step(GatedHeadParams& params, const GatedHeadParams& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  detail::check_same_shapes(p, g, "adam_step params/grads");
  detail::check_same_shapes(m, g, "adam_step state/grads");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec& pv = *p[i];
    const Vec& gv = *g[i];
    Vec& mv = *m[i];
    Vec& vv = *v[i];
    for (std::size_t k = 0; k < pv.size(); ++k) {
      mv[k] = beta1 * mv[k] + (1.0 - beta1) * gv[k];
      vv[k] = beta2 * vv[k] + (1.0 - beta2) * gv[k] * gv[k];
      const double mhat = mv[k] / bc1;
      const double vhat = vv[k] / bc2;
      pv[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

inline void sgd_step(GatedHeadParams& params, const GatedHeadParams& grads, double lr) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  detail::check_same_shapes(p, g, "sgd_step params/grads");
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < p[i]->size(); ++k) (*p[i])[k] -= lr * (*g[i])[k];
}

}  // namespace vqahead
