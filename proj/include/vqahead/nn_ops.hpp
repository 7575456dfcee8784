#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vqahead/errors.hpp"
#include "vqahead/rng.hpp"

namespace vqahead {

using Vec = std::vector<double>;

constexpr double kLayerNormEps = 1e-5;

inline void ensure_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw validation_error(std::string(what) + " contains a non-finite value");
}

// Fully connected layer; weights row-major, w[i * out + o].
struct Dense {
  std::size_t in = 0, out = 0;
  Vec w, b;

  static Dense zeros(std::size_t in, std::size_t out) {
    return Dense{in, out, Vec(in * out, 0.0), Vec(out, 0.0)};
  }
};

inline void dense_forward(const Dense& d, std::span<const double> x, std::span<double> y) {
  for (std::size_t o = 0; o < d.out; ++o) y[o] = d.b[o];
  for (std::size_t i = 0; i < d.in; ++i) {
    const double xi = x[i];
    const double* row = d.w.data() + i * d.out;
    for (std::size_t o = 0; o < d.out; ++o) y[o] += xi * row[o];
  }
}

// dx is overwritten; parameter gradients accumulate into grad.
inline void dense_backward(const Dense& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dx, Dense& grad) {
  for (std::size_t o = 0; o < d.out; ++o) grad.b[o] += dy[o];
  for (std::size_t i = 0; i < d.in; ++i) {
    const double* row = d.w.data() + i * d.out;
    double* grow = grad.w.data() + i * d.out;
    const double xi = x[i];
    double acc = 0.0;
    for (std::size_t o = 0; o < d.out; ++o) {
      acc += row[o] * dy[o];
      grow[o] += xi * dy[o];
    }
    dx[i] = acc;
  }
}

struct LayerNorm {
  Vec gamma, beta;

  static LayerNorm identity(std::size_t dim) { return LayerNorm{Vec(dim, 1.0), Vec(dim, 0.0)}; }
  std::size_t dim() const { return gamma.size(); }
};

// y = gamma * (x - mean) * rstd + beta with biased variance; x_hat and rstd
// are kept for the backward pass.
inline void layer_norm_forward(const LayerNorm& ln, std::span<const double> x,
                               std::span<double> x_hat, std::span<double> y, double& rstd) {
  const std::size_t n = ln.dim();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = x[i] - mean;
    var += c * c;
  }
  var /= static_cast<double>(n);
  rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < n; ++i) {
    x_hat[i] = (x[i] - mean) * rstd;
    y[i] = ln.gamma[i] * x_hat[i] + ln.beta[i];
  }
}

// dx_i = rstd * (dxhat_i - mean(dxhat) - x_hat_i * mean(dxhat * x_hat))
// where dxhat = dy * gamma. dx is overwritten; grad accumulates.
inline void layer_norm_backward(const LayerNorm& ln, std::span<const double> x_hat, double rstd,
                                std::span<const double> dy, std::span<double> dx, LayerNorm& grad) {
  const std::size_t n = ln.dim();
  double c1 = 0.0, c2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dxhat = dy[i] * ln.gamma[i];
    c1 += dxhat;
    c2 += dxhat * x_hat[i];
    grad.gamma[i] += dy[i] * x_hat[i];
    grad.beta[i] += dy[i];
  }
  c1 /= static_cast<double>(n);
  c2 /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    dx[i] = rstd * (dy[i] * ln.gamma[i] - c1 - x_hat[i] * c2);
}

inline void softmax(std::span<const double> z, std::span<double> p) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= sum;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

inline double cross_entropy(std::span<const double> logits, std::size_t target) {
  return log_sum_exp(logits) - logits[target];
}

// dz = scale * (softmax(logits) - onehot(target)), overwriting dz.
inline void cross_entropy_backward(std::span<const double> logits, std::size_t target, double scale,
                                   std::span<double> dz) {
  softmax(logits, dz);
  dz[target] -= 1.0;
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= scale;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Inverted-dropout mask: each entry keeps with probability 1-rate and is
// scaled by 1/(1-rate), so the expectation matches eval mode. rate 0 is
// the identity and draws nothing from the stream.
inline void dropout_mask(SplitMix64& rng, double rate, std::span<double> mask) {
  if (rate == 0.0) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.next_double() < rate ? 0.0 : keep_scale;
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace vqahead
