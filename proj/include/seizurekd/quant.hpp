// SPDX-License-Identifier: Apache-2.0
// 16-bit fixed-point (Q2.13 by default) model conversion and a pure
// integer inference path for the single-branch network.
//
// Layers accumulate int16 x int16 products into saturating 32-bit
// accumulators and requantize once per layer, rounding half away from zero
// and saturating to int16. Softmax runs on the dequantized logits.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seizurekd/common.hpp"
#include "seizurekd/distill.hpp"
#include "seizurekd/metrics.hpp"
#include "seizurekd/res1dcnn.hpp"

namespace seizurekd {

inline constexpr int kFracBits = 13;

// ---------------------------------------------------------------------------
// Scalar fixed point

inline constexpr std::int16_t sat16(std::int64_t v) noexcept {
  return static_cast<std::int16_t>(std::clamp<std::int64_t>(v, std::numeric_limits<std::int16_t>::min(),
                                                            std::numeric_limits<std::int16_t>::max()));
}

inline constexpr std::int32_t sat32(std::int64_t v) noexcept {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, std::numeric_limits<std::int32_t>::min(),
                                                            std::numeric_limits<std::int32_t>::max()));
}

inline constexpr std::int16_t sat_add16(std::int16_t a, std::int16_t b) noexcept {
  return sat16(std::int64_t{a} + std::int64_t{b});
}

/// Product of two Qm.f values, rescaled to Qm.f.
inline constexpr std::int16_t sat_mul16(std::int16_t a, std::int16_t b, int frac_bits = kFracBits) noexcept;

/// x / 2^shift rounded half away from zero.
inline constexpr std::int64_t round_shift(std::int64_t x, int shift) noexcept {
  if (shift == 0) return x;
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  return x >= 0 ? (x + half) >> shift : -((-x + half) >> shift);
}

inline constexpr std::int16_t sat_mul16(std::int16_t a, std::int16_t b, int frac_bits) noexcept {
  return sat16(round_shift(std::int64_t{a} * std::int64_t{b}, frac_bits));
}

struct FixedPointValue {
  std::int16_t raw = 0;
  bool operator==(const FixedPointValue&) const = default;
};

inline double fixed_point_max(int frac_bits = kFracBits) {
  return static_cast<double>(std::numeric_limits<std::int16_t>::max()) / std::ldexp(1.0, frac_bits);
}

/// round(x * 2^f) half away from zero, saturated to int16.
inline std::int16_t quantize_raw(double x, int frac_bits = kFracBits) {
  if (!std::isfinite(x)) throw NumericalError("quant", "cannot quantize a non-finite value");
  const double scaled = std::round(x * std::ldexp(1.0, frac_bits));  // std::round is half away from zero
  return sat16(static_cast<std::int64_t>(std::clamp(scaled, -1e12, 1e12)));
}

inline double dequantize_raw(std::int16_t raw, int frac_bits = kFracBits) {
  return static_cast<double>(raw) / std::ldexp(1.0, frac_bits);
}

inline FixedPointValue quantize(double x) { return {quantize_raw(x, kFracBits)}; }
inline double dequantize(FixedPointValue q) { return dequantize_raw(q.raw, kFracBits); }

// ---------------------------------------------------------------------------
// Quantized model

struct QConv {
  std::size_t in_channels = 0, out_channels = 0, kernel = 1, stride = 1;
  std::vector<std::int16_t> weights, bias;
  bool operator==(const QConv&) const = default;
};

struct QDense {
  std::size_t in_features = 0, out_features = 0;
  std::vector<std::int16_t> weights, bias;
  bool operator==(const QDense&) const = default;
};

struct QBlock {
  QConv conv1, conv2;
  std::optional<QConv> projection;
  bool operator==(const QBlock&) const = default;
};

struct QuantizedModel {
  int frac_bits = kFracBits;
  Res1DCNNConfig config;
  QConv stem;
  std::vector<QBlock> blocks;
  QDense head;

  std::size_t parameter_count() const {
    std::size_t n = stem.weights.size() + stem.bias.size() + head.weights.size() + head.bias.size();
    for (const auto& b : blocks) {
      n += b.conv1.weights.size() + b.conv1.bias.size() + b.conv2.weights.size() + b.conv2.bias.size();
      if (b.projection) n += b.projection->weights.size() + b.projection->bias.size();
    }
    return n;
  }
  std::size_t payload_bytes() const { return parameter_count() * sizeof(std::int16_t); }
  bool operator==(const QuantizedModel&) const = default;
};

/// Out-of-range parameters found while quantizing one layer.
struct SaturationWarning {
  std::string layer;
  std::size_t count = 0;
};

namespace detail {

inline std::vector<std::int16_t> quantize_values(std::span<const double> v, int frac_bits, std::size_t& saturated) {
  std::vector<std::int16_t> out(v.size());
  const double limit = std::ldexp(1.0, 15 - frac_bits);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= limit || v[i] < -limit) ++saturated;
    out[i] = quantize_raw(v[i], frac_bits);
  }
  return out;
}

inline QConv quantize_conv(const Conv1dLayer& l, int f, const std::string& name, std::vector<SaturationWarning>& w) {
  std::size_t sat = 0;
  QConv q{l.in_channels, l.out_channels, l.kernel, l.stride, quantize_values(l.weights, f, sat),
          quantize_values(l.bias, f, sat)};
  if (sat) w.push_back({name, sat});
  return q;
}

}  // namespace detail

inline QuantizedModel quantize_model(const StudentModel& m, int frac_bits = kFracBits,
                                     std::vector<SaturationWarning>* warnings = nullptr) {
  if (frac_bits < 0 || frac_bits > 15) throw InvariantError("quant", "fractional bits must be in [0, 15]");
  std::vector<SaturationWarning> w;
  QuantizedModel q;
  q.frac_bits = frac_bits;
  q.config = m.extractor.config;
  q.stem = detail::quantize_conv(m.extractor.stem, frac_bits, "stem", w);
  for (std::size_t b = 0; b < m.extractor.blocks.size(); ++b) {
    const auto& blk = m.extractor.blocks[b];
    const std::string p = "block" + std::to_string(b + 1) + ".";
    QBlock qb;
    qb.conv1 = detail::quantize_conv(blk.conv1, frac_bits, p + "conv1", w);
    qb.conv2 = detail::quantize_conv(blk.conv2, frac_bits, p + "conv2", w);
    if (blk.projection) qb.projection = detail::quantize_conv(*blk.projection, frac_bits, p + "projection", w);
    q.blocks.push_back(std::move(qb));
  }
  std::size_t sat = 0;
  q.head = {m.head.in_features, m.head.out_features, detail::quantize_values(m.head.weights, frac_bits, sat),
            detail::quantize_values(m.head.bias, frac_bits, sat)};
  if (sat) w.push_back({"head", sat});
  if (warnings) *warnings = std::move(w);
  return q;
}

/// Inverse of quantize_model, used for layer-wise comparisons against the float path.
inline StudentModel dequantize_model(const QuantizedModel& q) {
  auto conv = [&](const QConv& c) {
    Conv1dLayer l(c.in_channels, c.out_channels, c.kernel, c.stride);
    for (std::size_t i = 0; i < c.weights.size(); ++i) l.weights[i] = dequantize_raw(c.weights[i], q.frac_bits);
    for (std::size_t i = 0; i < c.bias.size(); ++i) l.bias[i] = dequantize_raw(c.bias[i], q.frac_bits);
    return l;
  };
  StudentModel m;
  m.extractor.config = q.config;
  m.extractor.stem = conv(q.stem);
  for (const auto& b : q.blocks)
    m.extractor.blocks.push_back({conv(b.conv1), conv(b.conv2), b.projection ? std::optional(conv(*b.projection)) : std::nullopt});
  m.head = DenseLayer(q.head.in_features, q.head.out_features);
  for (std::size_t i = 0; i < q.head.weights.size(); ++i) m.head.weights[i] = dequantize_raw(q.head.weights[i], q.frac_bits);
  for (std::size_t i = 0; i < q.head.bias.size(); ++i) m.head.bias[i] = dequantize_raw(q.head.bias[i], q.frac_bits);
  return m;
}

// ---------------------------------------------------------------------------
// Integer inference

/// Saturation events of one forward pass.
struct QuantDiagnostics {
  std::size_t input = 0;        // input samples clipped on entry
  std::size_t accumulator = 0;  // 32-bit accumulator saturations
  std::size_t requantize = 0;   // layer outputs clipped to int16
  std::size_t residual = 0;     // residual additions clipped to int16

  std::size_t total() const noexcept { return input + accumulator + requantize + residual; }
};

struct QTensor {
  std::size_t channels = 0, length = 0;
  std::vector<std::int16_t> values;
  QTensor() = default;
  QTensor(std::size_t c, std::size_t l) : channels(c), length(l), values(c * l, 0) {}
};

inline QTensor quantize_tensor(const Tensor& t, int frac_bits, QuantDiagnostics* diag = nullptr) {
  QTensor q(t.channels, t.length);
  const double limit = std::ldexp(1.0, 15 - frac_bits);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (diag && (t.values[i] >= limit || t.values[i] < -limit)) ++diag->input;
    q.values[i] = quantize_raw(t.values[i], frac_bits);
  }
  return q;
}

inline Tensor dequantize_tensor(const QTensor& q, int frac_bits) {
  Tensor t(q.channels, q.length);
  for (std::size_t i = 0; i < q.values.size(); ++i) t.values[i] = dequantize_raw(q.values[i], frac_bits);
  return t;
}

namespace detail {
inline std::int16_t requantize(std::int32_t acc, int frac_bits, QuantDiagnostics& d) {
  const std::int64_t r = round_shift(acc, frac_bits);
  const std::int16_t out = sat16(r);
  if (out != r) ++d.requantize;
  return out;
}
}  // namespace detail

/// Integer "same"-padded convolution, requantized to the input format.
inline QTensor qconv1d_forward(const QTensor& in, const QConv& l, int frac_bits, QuantDiagnostics& d) {
  if (in.channels != l.in_channels) throw InvariantError("quant", "conv input channel mismatch");
  Conv1dLayer shape(l.in_channels, l.out_channels, l.kernel, l.stride);
  const std::size_t out_len = shape.out_length(in.length);
  const auto pad = static_cast<std::ptrdiff_t>(shape.pad_left(in.length));
  QTensor out(l.out_channels, out_len);
  std::vector<std::int32_t> acc(out_len);
  for (std::size_t o = 0; o < l.out_channels; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<std::int32_t>(std::int32_t{l.bias[o]} * (std::int32_t{1} << frac_bits)));
    for (std::size_t i = 0; i < l.in_channels; ++i) {
      const std::int16_t* x = in.values.data() + i * in.length;
      for (std::size_t k = 0; k < l.kernel; ++k) {
        const std::int32_t w = l.weights[(o * l.in_channels + i) * l.kernel + k];
        if (w == 0) continue;
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - pad;
        const auto [lo, hi] = seizurekd::detail::valid_range(off, l.stride, in.length, out_len);
        for (std::size_t t = lo; t < hi; ++t) {
          const std::int64_t s = std::int64_t{acc[t]} + std::int64_t{w} * x[static_cast<std::ptrdiff_t>(t * l.stride) + off];
          acc[t] = sat32(s);
          if (acc[t] != s) ++d.accumulator;
        }
      }
    }
    for (std::size_t t = 0; t < out_len; ++t) out.values[o * out_len + t] = detail::requantize(acc[t], frac_bits, d);
  }
  return out;
}

inline std::vector<std::int16_t> qdense_forward(std::span<const std::int16_t> x, const QDense& l, int frac_bits,
                                                QuantDiagnostics& d) {
  if (x.size() != l.in_features) throw InvariantError("quant", "dense input size mismatch");
  std::vector<std::int16_t> y(l.out_features);
  for (std::size_t o = 0; o < l.out_features; ++o) {
    std::int32_t acc = std::int32_t{l.bias[o]} * (std::int32_t{1} << frac_bits);
    for (std::size_t i = 0; i < l.in_features; ++i) {
      const std::int64_t s = std::int64_t{acc} + std::int64_t{l.weights[o * l.in_features + i]} * x[i];
      acc = sat32(s);
      if (acc != s) ++d.accumulator;
    }
    y[o] = detail::requantize(acc, frac_bits, d);
  }
  return y;
}

inline void qrelu_inplace(QTensor& t) {
  for (auto& v : t.values) v = std::max<std::int16_t>(v, 0);
}

/// Integer feature map (before the head), in the model's fixed-point format.
inline std::vector<std::int16_t> quantized_features(const QuantizedModel& q, std::span<const double> segment,
                                                    QuantDiagnostics& d) {
  if (segment.size() != q.config.input_channels * q.config.input_length)
    throw InvariantError("quant", "quantized model expects " + std::to_string(q.config.input_length) + " samples");
  Tensor x(q.config.input_channels, q.config.input_length);
  std::copy(segment.begin(), segment.end(), x.values.begin());
  QTensor cur = quantize_tensor(x, q.frac_bits, &d);
  cur = qconv1d_forward(cur, q.stem, q.frac_bits, d);
  qrelu_inplace(cur);
  for (const auto& b : q.blocks) {
    QTensor h = qconv1d_forward(cur, b.conv1, q.frac_bits, d);
    qrelu_inplace(h);
    QTensor y = qconv1d_forward(h, b.conv2, q.frac_bits, d);
    const QTensor sc = b.projection ? qconv1d_forward(cur, *b.projection, q.frac_bits, d) : cur;
    for (std::size_t i = 0; i < y.values.size(); ++i) {
      const std::int32_t s = std::int32_t{y.values[i]} + sc.values[i];
      y.values[i] = sat16(s);
      if (y.values[i] != s) ++d.residual;
    }
    qrelu_inplace(y);
    cur = std::move(y);
  }
  std::vector<std::int16_t> z(cur.channels);
  for (std::size_t c = 0; c < cur.channels; ++c) {
    std::int64_t s = 0;
    for (std::size_t t = 0; t < cur.length; ++t) s += cur.values[c * cur.length + t];
    // Mean of int16 values stays in int16 range; round half away from zero.
    const auto len = static_cast<std::int64_t>(cur.length);
    z[c] = static_cast<std::int16_t>(s >= 0 ? (2 * s + len) / (2 * len) : -((-2 * s + len) / (2 * len)));
  }
  return z;
}

inline std::vector<double> quantized_forward(const QuantizedModel& q, std::span<const double> segment,
                                             QuantDiagnostics* diag = nullptr) {
  QuantDiagnostics local;
  QuantDiagnostics& d = diag ? *diag : local;
  const auto z = quantized_features(q, segment, d);
  const auto logits = qdense_forward(z, q.head, q.frac_bits, d);
  std::vector<double> real(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) real[i] = dequantize_raw(logits[i], q.frac_bits);
  return softmax(real);
}

inline MetricsReport evaluate_quantized(const QuantizedModel& q, std::span<const Example> data) {
  return evaluate_with(data, [&](const Example& e) { return quantized_forward(q, e.ecg()); });
}

// ---------------------------------------------------------------------------
// Accuracy impact

inline bool same_topology(const StudentModel& m, const QuantizedModel& q) {
  auto conv_eq = [](const Conv1dLayer& a, const QConv& b) {
    return a.in_channels == b.in_channels && a.out_channels == b.out_channels && a.kernel == b.kernel &&
           a.stride == b.stride;
  };
  if (!conv_eq(m.extractor.stem, q.stem) || m.extractor.blocks.size() != q.blocks.size()) return false;
  for (std::size_t i = 0; i < q.blocks.size(); ++i) {
    const auto& a = m.extractor.blocks[i];
    const auto& b = q.blocks[i];
    if (!conv_eq(a.conv1, b.conv1) || !conv_eq(a.conv2, b.conv2) || a.projection.has_value() != b.projection.has_value())
      return false;
    if (a.projection && !conv_eq(*a.projection, *b.projection)) return false;
  }
  return m.head.in_features == q.head.in_features && m.head.out_features == q.head.out_features;
}

struct AccuracyDrop {
  MetricsReport float_metrics, quantized_metrics;
  MetricDeltas delta;  // quantized - float
};

inline AccuracyDrop accuracy_drop(const StudentModel& model, const QuantizedModel& q, std::span<const Example> test) {
  if (!same_topology(model, q)) throw InvariantError("quant", "float and quantized models differ in topology");
  AccuracyDrop r;
  r.float_metrics = evaluate_classifier(model, test);
  r.quantized_metrics = evaluate_quantized(q, test);
  r.delta = MetricDeltas::between(r.float_metrics, r.quantized_metrics);
  return r;
}

// ---------------------------------------------------------------------------
// Range calibration

/// Largest |value| reaching any requantization point (stem, conv1, block sums, logits) over `data`.
inline double max_activation(const StudentModel& m, std::span<const Example> data) {
  double mx = 0.0;
  auto scan = [&](const Tensor& t) {
    for (double v : t.values) mx = std::max(mx, std::abs(v));
  };
  StudentCache c;
  for (const auto& e : data) {
    student_forward(m, e.ecg(), &c);
    scan(c.extractor.stem_pre);
    for (const auto& b : c.extractor.blocks) {
      scan(b.h1_pre);
      scan(b.sum_pre);
    }
    for (double v : dense_forward(c.z, m.head)) mx = std::max(mx, std::abs(v));
  }
  return mx;
}

/**
 * Scales every activation and logit by 2^-shift: stem weights and all biases
 * are multiplied, the other weights are untouched (ReLU is positively
 * homogeneous). Power-of-two factors keep the float result bit-exact, so the
 * predicted class never changes; the softmax only gets flatter.
 */
inline StudentModel rescale_activations(StudentModel m, int shift) {
  const double f = std::ldexp(1.0, -shift);
  auto mul = [f](std::vector<double>& v) {
    for (double& x : v) x *= f;
  };
  mul(m.extractor.stem.weights);
  for_each_conv(m.extractor, [&](Conv1dLayer& l) { mul(l.bias); });
  mul(m.head.bias);
  return m;
}

struct Calibration {
  int shift = 0;
  double max_activation = 0.0;  // before the shift
  StudentModel model;
};

/// Smallest shift >= 0 that brings the peak activation on `data` under headroom * format range.
inline Calibration calibrate_range(const StudentModel& m, std::span<const Example> data, int frac_bits = kFracBits,
                                   double headroom = 0.5) {
  if (!(headroom > 0.0 && headroom <= 1.0)) throw InvariantError("quant", "headroom must be in (0, 1]");
  Calibration c;
  c.max_activation = max_activation(m, data);
  const double limit = headroom * fixed_point_max(frac_bits);
  while (std::ldexp(c.max_activation, -c.shift) > limit) ++c.shift;
  c.model = c.shift ? rescale_activations(m, c.shift) : m;
  return c;
}

struct SweepPoint {
  int frac_bits = 0;
  double accuracy = 0.0;
  std::size_t saturations = 0;
};

/// Accuracy of the model quantized at each fractional bit width in [lo, hi].
inline std::vector<SweepPoint> fractional_bit_sweep(const StudentModel& model, std::span<const Example> data,
                                                    int lo = 11, int hi = 15) {
  std::vector<SweepPoint> out;
  for (int f = lo; f <= hi; ++f) {
    const auto q = quantize_model(model, f);
    std::vector<Label> pred, truth;
    std::size_t sats = 0;
    for (const auto& e : data) {
      QuantDiagnostics d;
      pred.push_back(predict_label(quantized_forward(q, e.ecg(), &d)));
      truth.push_back(e.label);
      sats += d.total();
    }
    out.push_back({f, accuracy(confusion(pred, truth)), sats});
  }
  return out;
}

}  // namespace seizurekd
