// SPDX-License-Identifier: Apache-2.0
// Small deterministic differentiable core: 1-D convolution, dense,
// ReLU, softmax / cross-entropy and Adam, each with an explicit
// backward pass.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "seizurekd/common.hpp"

namespace seizurekd {

/// Row-major (channels, length) activations.
struct Tensor {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t l, double fill = 0.0) : channels(c), length(l), values(c * l, fill) {}

  static Tensor from_signal(std::span<const double> x) {
    Tensor t(1, x.size());
    std::copy(x.begin(), x.end(), t.values.begin());
    return t;
  }

  double& at(std::size_t c, std::size_t t) { return values[c * length + t]; }
  double at(std::size_t c, std::size_t t) const { return values[c * length + t]; }
  std::span<double> row(std::size_t c) { return {values.data() + c * length, length}; }
  std::span<const double> row(std::size_t c) const { return {values.data() + c * length, length}; }

  bool operator==(const Tensor&) const = default;
};

// ---------------------------------------------------------------------------
// Layers. A layer object doubles as its own gradient accumulator.

struct Conv1dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::vector<double> weights;  // (out, in, kernel)
  std::vector<double> bias;     // (out)

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t in, std::size_t out, std::size_t k, std::size_t s)
      : in_channels(in), out_channels(out), kernel(k), stride(s), weights(out * in * k, 0.0), bias(out, 0.0) {}

  std::size_t out_length(std::size_t in_length) const noexcept { return (in_length + stride - 1) / stride; }

  // "Same" padding; odd totals put the extra zero on the right.
  std::size_t pad_left(std::size_t in_length) const noexcept {
    const std::size_t span = (out_length(in_length) - 1) * stride + kernel;
    return span > in_length ? (span - in_length) / 2 : 0;
  }

  double& w(std::size_t o, std::size_t i, std::size_t k) { return weights[(o * in_channels + i) * kernel + k]; }
  double w(std::size_t o, std::size_t i, std::size_t k) const { return weights[(o * in_channels + i) * kernel + k]; }

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
  bool operator==(const Conv1dLayer&) const = default;
};

struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weights;  // (out, in)
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : in_features(in), out_features(out), weights(in * out, 0.0), bias(out, 0.0) {}

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
  bool operator==(const DenseLayer&) const = default;
};

template <typename F>
void visit_parameters(Conv1dLayer& l, F&& f) {
  f(std::span<double>(l.weights));
  f(std::span<double>(l.bias));
}
template <typename F>
void visit_parameters(const Conv1dLayer& l, F&& f) {
  f(std::span<const double>(l.weights));
  f(std::span<const double>(l.bias));
}
template <typename F>
void visit_parameters(DenseLayer& l, F&& f) {
  f(std::span<double>(l.weights));
  f(std::span<double>(l.bias));
}
template <typename F>
void visit_parameters(const DenseLayer& l, F&& f) {
  f(std::span<const double>(l.weights));
  f(std::span<const double>(l.bias));
}

inline constexpr double kInitStd = 0.01;

/// Weights ~ N(0, std^2), biases exactly zero. std 0 gives all-zero weights.
template <typename Layer>
void init_params(Layer& layer, std::mt19937_64& rng, double std_dev = kInitStd) {
  if (std_dev < 0.0) throw InvariantError("neuralnet", "negative init std");
  if (std_dev == 0.0) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
  } else {
    std::normal_distribution<double> g(0.0, std_dev);
    for (double& w : layer.weights) w = g(rng);
  }
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Convolution

namespace detail {
// Output positions t with 0 <= t*stride + offset < in_length.
inline std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t offset, std::size_t stride, std::size_t in_len,
                                                       std::size_t out_len) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t lo = offset < 0 ? (-offset + s - 1) / s : 0;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in_len) - 1 - offset;
  const std::ptrdiff_t hi = last < 0 ? 0 : std::min<std::ptrdiff_t>(last / s + 1, static_cast<std::ptrdiff_t>(out_len));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}
}  // namespace detail

/// Cross-correlation with zero "same" padding; output length ceil(L / stride).
inline Tensor conv1d_forward(const Tensor& in, const Conv1dLayer& layer) {
  if (in.channels != layer.in_channels)
    throw InvariantError("neuralnet", "conv1d expects " + std::to_string(layer.in_channels) + " input channels, got " +
                                          std::to_string(in.channels));
  if (in.length == 0) throw InvariantError("neuralnet", "conv1d on an empty input");
  const std::size_t out_len = layer.out_length(in.length);
  const auto pad = static_cast<std::ptrdiff_t>(layer.pad_left(in.length));
  const std::size_t s = layer.stride;
  Tensor out(layer.out_channels, out_len);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* y = out.values.data() + o * out_len;
    std::fill(y, y + out_len, layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const double* x = in.values.data() + i * in.length;
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const double w = layer.w(o, i, k);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - pad;
        const auto [lo, hi] = detail::valid_range(off, s, in.length, out_len);
        if (s == 1) {
          const double* xs = x + (static_cast<std::ptrdiff_t>(lo) + off);
          double* ys = y + lo;
          for (std::size_t j = 0; j < hi - lo; ++j) ys[j] += w * xs[j];
        } else {
          for (std::size_t t = lo; t < hi; ++t) y[t] += w * x[static_cast<std::ptrdiff_t>(t * s) + off];
        }
      }
    }
  }
  return out;
}

/// Accumulates parameter gradients into `grad` and returns dL/dinput.
inline Tensor conv1d_backward(const Tensor& in, const Conv1dLayer& layer, const Tensor& dout, Conv1dLayer& grad) {
  const std::size_t out_len = layer.out_length(in.length);
  if (dout.channels != layer.out_channels || dout.length != out_len)
    throw InvariantError("neuralnet", "conv1d backward: upstream gradient shape mismatch");
  const auto pad = static_cast<std::ptrdiff_t>(layer.pad_left(in.length));
  const std::size_t s = layer.stride;
  Tensor din(in.channels, in.length);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const double* g = dout.values.data() + o * out_len;
    double gb = 0.0;
    for (std::size_t t = 0; t < out_len; ++t) gb += g[t];
    grad.bias[o] += gb;
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const double* x = in.values.data() + i * in.length;
      double* dx = din.values.data() + i * in.length;
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const double w = layer.w(o, i, k);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - pad;
        const auto [lo, hi] = detail::valid_range(off, s, in.length, out_len);
        double gw = 0.0;
        if (s == 1) {
          const double* xs = x + (static_cast<std::ptrdiff_t>(lo) + off);
          double* dxs = dx + (static_cast<std::ptrdiff_t>(lo) + off);
          const double* gs = g + lo;
          for (std::size_t j = 0; j < hi - lo; ++j) {
            gw += gs[j] * xs[j];
            dxs[j] += w * gs[j];
          }
        } else {
          for (std::size_t t = lo; t < hi; ++t) {
            const auto idx = static_cast<std::ptrdiff_t>(t * s) + off;
            gw += g[t] * x[idx];
            dx[idx] += w * g[t];
          }
        }
        grad.w(o, i, k) += gw;
      }
    }
  }
  return din;
}

// ---------------------------------------------------------------------------
// Dense

inline std::vector<double> dense_forward(std::span<const double> x, const DenseLayer& layer) {
  if (x.size() != layer.in_features)
    throw InvariantError("neuralnet", "dense expects " + std::to_string(layer.in_features) + " inputs, got " +
                                          std::to_string(x.size()));
  std::vector<double> y(layer.bias);
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    const double* w = layer.weights.data() + o * layer.in_features;
    double acc = 0.0;
    for (std::size_t i = 0; i < layer.in_features; ++i) acc += w[i] * x[i];
    y[o] += acc;
  }
  return y;
}

inline std::vector<double> dense_backward(std::span<const double> x, const DenseLayer& layer,
                                          std::span<const double> dout, DenseLayer& grad) {
  if (dout.size() != layer.out_features || x.size() != layer.in_features)
    throw InvariantError("neuralnet", "dense backward: shape mismatch");
  std::vector<double> dx(layer.in_features, 0.0);
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    grad.bias[o] += dout[o];
    const double* w = layer.weights.data() + o * layer.in_features;
    double* gw = grad.weights.data() + o * layer.in_features;
    for (std::size_t i = 0; i < layer.in_features; ++i) {
      gw[i] += dout[o] * x[i];
      dx[i] += dout[o] * w[i];
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations and loss

inline void relu_inplace(Tensor& t) {
  for (double& v : t.values) v = v > 0.0 ? v : 0.0;
}

inline Tensor relu(Tensor t) {
  relu_inplace(t);
  return t;
}

/// Masks `grad` where the pre-activation was not positive.
inline void relu_backward_inplace(const Tensor& pre, Tensor& grad) {
  for (std::size_t i = 0; i < grad.values.size(); ++i)
    if (!(pre.values[i] > 0.0)) grad.values[i] = 0.0;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvariantError("neuralnet", "softmax of an empty vector");
  for (double v : logits)
    if (!std::isfinite(v)) throw NumericalError("neuralnet", "softmax input is not finite");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (double& v : p) v /= sum;
  return p;
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw InvariantError("neuralnet", "label index out of range");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p)) throw NumericalError("neuralnet", "cross-entropy of non-finite probabilities");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvariantError("neuralnet", "probabilities do not sum to 1");
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

/// d(cross_entropy(softmax(z)))/dz = p - onehot(label).
inline std::vector<double> softmax_cross_entropy_grad(std::span<const double> probs, std::size_t label) {
  std::vector<double> g(probs.begin(), probs.end());
  g[label] -= 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Parameter plumbing shared by every model type

template <typename Model>
std::vector<std::span<double>> parameter_spans(Model& m) {
  std::vector<std::span<double>> out;
  visit_parameters(m, [&](std::span<double> s) { out.push_back(s); });
  return out;
}

template <typename Model>
std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  visit_parameters(m, [&](std::span<const double> s) { n += s.size(); });
  return n;
}

template <typename Model>
std::vector<double> flatten_parameters(const Model& m) {
  std::vector<double> out;
  visit_parameters(m, [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

template <typename Model>
void assign_parameters(Model& m, std::span<const double> flat) {
  if (flat.size() != parameter_count(m)) throw InvariantError("neuralnet", "parameter vector size mismatch");
  std::size_t pos = 0;
  visit_parameters(m, [&](std::span<double> s) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size()),
              s.begin());
    pos += s.size();
  });
}

template <typename Model>
void zero_parameters(Model& m) {
  visit_parameters(m, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
}

/// dst += scale * src, block by block in a fixed order.
template <typename Model>
void accumulate_parameters(Model& dst, const Model& src, double scale = 1.0) {
  auto d = parameter_spans(dst);
  std::size_t b = 0;
  visit_parameters(src, [&](std::span<const double> s) {
    if (b >= d.size() || d[b].size() != s.size()) throw InvariantError("neuralnet", "gradient shape mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) d[b][i] += scale * s[i];
    ++b;
  });
}

struct GradCheckResult {
  std::size_t parameters = 0;
  std::size_t kinks = 0;  // skipped: the +-h steps straddle a ReLU switch
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;  // at worst_index
};

/**
 * Central-difference check of every parameter. `loss(model, grad)` returns the
 * scalar loss and, when `grad` is non-null, accumulates dL/dparams into it.
 * Relative error is |a - n| / max(|a|, |n|, floor).
 *
 * A parameter whose one-sided slopes disagree by more than `kink_tol`
 * (relative), and whose disagreement does not shrink linearly with the step,
 * sits within h of a ReLU switch. The central difference is meaningless there,
 * so it is counted in `kinks` and skipped.
 */
template <typename Model, typename Loss>
GradCheckResult gradient_check(const Model& model, Loss&& loss, double h = 1e-5, double floor = 1e-8,
                               double kink_tol = 1e-4) {
  Model grad = model;
  zero_parameters(grad);
  const double l0 = loss(model, &grad);
  const auto analytic = flatten_parameters(grad);
  auto flat = flatten_parameters(model);
  Model probe = model;
  GradCheckResult r;
  r.parameters = flat.size();
  bool first = true;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double x0 = flat[i];
    flat[i] = x0 + h;
    assign_parameters(probe, std::span<const double>(flat));
    const double up = loss(probe, nullptr);
    flat[i] = x0 - h;
    assign_parameters(probe, std::span<const double>(flat));
    const double down = loss(probe, nullptr);
    flat[i] = x0;
    const double fwd = (up - l0) / h, bwd = (l0 - down) / h;
    if (std::abs(fwd - bwd) > kink_tol * std::max({std::abs(fwd), std::abs(bwd), floor})) {
      // Smooth: the slope gap is h * f'' and shrinks tenfold with the step. A kink does not.
      const double h2 = h / 10.0;
      flat[i] = x0 + h2;
      assign_parameters(probe, std::span<const double>(flat));
      const double up2 = loss(probe, nullptr);
      flat[i] = x0 - h2;
      assign_parameters(probe, std::span<const double>(flat));
      const double down2 = loss(probe, nullptr);
      flat[i] = x0;
      const double gap = fwd - bwd, gap2 = (up2 - l0) / h2 - (l0 - down2) / h2;
      const double slack = 100.0 * std::numeric_limits<double>::epsilon() * std::abs(l0) / h2;
      if (std::abs(gap - 10.0 * gap2) > 0.1 * std::abs(gap) + 10.0 * slack) {
        ++r.kinks;
        continue;
      }
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    if (err > r.max_relative_error || first) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.analytic = analytic[i];
      r.numeric = numeric;
      first = false;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update over a flat parameter vector.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size()) throw InvariantError("neuralnet", "adam: parameter/gradient size mismatch");
  if (st.m.empty() && st.v.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw InvariantError("neuralnet", "adam: optimizer state shape mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

/// Model-level Adam: walks parameter blocks of `model` and `grads` in lockstep.
template <typename Model>
void adam_step(Model& model, const Model& grads, AdamState& st) {
  auto flat = flatten_parameters(model);
  const auto g = flatten_parameters(grads);
  adam_step(std::span<double>(flat), std::span<const double>(g), st);
  assign_parameters(model, std::span<const double>(flat));
}

}  // namespace seizurekd
