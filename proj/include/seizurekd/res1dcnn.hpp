// SPDX-License-Identifier: Apache-2.0
// The residual 1-D CNN feature extractor, its two-class head, the
// three-branch teacher with linear feature fusion, and the ECG-only
// student. Forward passes optionally record a cache that the matching
// backward pass consumes.
#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <type_traits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seizurekd/common.hpp"
#include "seizurekd/neuralnet.hpp"

namespace seizurekd {

using FeatureMap = std::vector<double>;

inline constexpr std::size_t kWeightLayers = 14;
inline constexpr std::size_t kNumClasses = 2;

struct BlockSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool operator==(const BlockSpec&) const = default;
};

struct Res1DCNNConfig {
  std::size_t input_channels = 1;
  std::size_t input_length = kWindowLength;
  std::size_t stem_channels = 8;
  std::size_t stem_kernel = 7;
  std::size_t stem_stride = 2;
  std::vector<BlockSpec> blocks;
  double init_std = kInitStd;
  // When set, weights use N(0, 2 / fan_in) instead of the fixed init_std.
  bool fan_in_init = false;

  bool operator==(const Res1DCNNConfig&) const = default;

  /**
   * Stem 1->8 (k7, /2), then five residual blocks of two k3 convolutions:
   * 8->8, 8->16 (/2), 16->16, 16->32 (/2), 32->64 (/2). The three
   * channel-changing blocks carry a 1-tap projection shortcut, so the conv
   * layer count is 1 + 10 + 3 = 14. Global average pooling gives L = 64.
   */
  static Res1DCNNConfig default_config() {
    Res1DCNNConfig c;
    c.blocks = {{8, 3, 1}, {16, 3, 2}, {16, 3, 1}, {32, 3, 2}, {64, 3, 2}};
    return c;
  }

  /// Same topology at reduced width, for gradient checks and fast tests.
  static Res1DCNNConfig reduced(std::size_t input_length = 128) {
    Res1DCNNConfig c;
    c.input_length = input_length;
    c.stem_channels = 2;
    c.blocks = {{2, 3, 1}, {4, 3, 2}, {4, 3, 1}, {6, 3, 2}, {8, 3, 2}};
    return c;
  }

  bool needs_projection(std::size_t block) const {
    const std::size_t in = block == 0 ? stem_channels : blocks[block - 1].out_channels;
    return blocks[block].stride != 1 || blocks[block].out_channels != in;
  }

  std::size_t conv_layer_count() const {
    std::size_t n = 1 + 2 * blocks.size();
    for (std::size_t b = 0; b < blocks.size(); ++b) n += needs_projection(b) ? 1 : 0;
    return n;
  }

  std::size_t feature_length() const { return blocks.empty() ? stem_channels : blocks.back().out_channels; }

  /// Temporal length reaching the pooling stage.
  std::size_t final_time_length() const {
    auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    std::size_t len = ceil_div(input_length, stem_stride);
    for (const auto& b : blocks) len = ceil_div(len, b.stride);
    return len;
  }

  void validate() const {
    if (input_channels == 0 || input_length == 0 || stem_channels == 0 || stem_kernel == 0 || stem_stride == 0)
      throw InvariantError("res1dcnn", "config sizes must be positive");
    for (const auto& b : blocks)
      if (b.out_channels == 0 || b.kernel == 0 || b.stride == 0)
        throw InvariantError("res1dcnn", "block sizes must be positive");
    if (conv_layer_count() != kWeightLayers)
      throw InvariantError("res1dcnn", "config has " + std::to_string(conv_layer_count()) +
                                           " convolutional weight layers, expected " + std::to_string(kWeightLayers));
  }

  std::string to_text() const {
    std::ostringstream o;
    o << "input_channels = " << input_channels << "\ninput_length = " << input_length << "\nstem = " << stem_channels
      << ' ' << stem_kernel << ' ' << stem_stride << '\n';
    for (const auto& b : blocks) o << "block = " << b.out_channels << ' ' << b.kernel << ' ' << b.stride << '\n';
    o << "init_std = " << init_std << "\nfan_in_init = " << (fan_in_init ? 1 : 0) << '\n';
    return o.str();
  }

  /// Key-value form: `stem = <channels> <kernel> <stride>`, repeated `block = ...`.
  static Res1DCNNConfig from_kv(const KeyValueFile& kv) {
    const std::string mod = "res1dcnn";
    auto triple = [&](const std::string& text, const char* key) {
      std::istringstream in(text);
      std::array<std::size_t, 3> v{};
      if (!(in >> v[0] >> v[1] >> v[2])) throw InvariantError(mod, std::string(key) + " expects three integers");
      return v;
    };
    Res1DCNNConfig c;
    if (kv.has("input_channels")) c.input_channels = static_cast<std::size_t>(kv.get_double("input_channels", mod));
    if (kv.has("input_length")) c.input_length = static_cast<std::size_t>(kv.get_double("input_length", mod));
    if (kv.has("init_std")) c.init_std = kv.get_double("init_std", mod);
    if (kv.has("fan_in_init")) c.fan_in_init = kv.get_double("fan_in_init", mod) != 0.0;
    const auto stem = triple(kv.get("stem", mod), "stem");
    c.stem_channels = stem[0];
    c.stem_kernel = stem[1];
    c.stem_stride = stem[2];
    for (const auto& b : kv.get_all("block")) {
      const auto v = triple(b, "block");
      c.blocks.push_back({v[0], v[1], v[2]});
    }
    c.validate();
    return c;
  }
};

struct ResidualBlock {
  Conv1dLayer conv1, conv2;
  std::optional<Conv1dLayer> projection;
  bool operator==(const ResidualBlock&) const = default;
};

struct FeatureExtractor {
  Res1DCNNConfig config;
  Conv1dLayer stem;
  std::vector<ResidualBlock> blocks;

  bool operator==(const FeatureExtractor&) const = default;

  std::size_t feature_length() const { return config.feature_length(); }

  std::size_t conv_layer_count() const {
    std::size_t n = 1;
    for (const auto& b : blocks) n += 2 + (b.projection ? 1 : 0);
    return n;
  }
};

template <typename E, typename F>
  requires std::same_as<std::remove_const_t<E>, FeatureExtractor>
void visit_parameters(E& e, F&& f) {
  visit_parameters(e.stem, f);
  for (auto& b : e.blocks) {
    visit_parameters(b.conv1, f);
    visit_parameters(b.conv2, f);
    if (b.projection) visit_parameters(*b.projection, f);
  }
}

/// Convolution layers in canonical order: stem, then per block conv1, conv2, projection.
template <typename E, typename F>
  requires std::same_as<std::remove_const_t<E>, FeatureExtractor>
void for_each_conv(E& e, F&& f) {
  f(e.stem);
  for (auto& b : e.blocks) {
    f(b.conv1);
    f(b.conv2);
    if (b.projection) f(*b.projection);
  }
}

/// Allocates the layer graph for `cfg` with zero parameters.
inline FeatureExtractor make_extractor_shape(const Res1DCNNConfig& cfg) {
  cfg.validate();
  FeatureExtractor e;
  e.config = cfg;
  e.stem = Conv1dLayer(cfg.input_channels, cfg.stem_channels, cfg.stem_kernel, cfg.stem_stride);
  std::size_t in = cfg.stem_channels;
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    const auto& s = cfg.blocks[b];
    ResidualBlock blk;
    blk.conv1 = Conv1dLayer(in, s.out_channels, s.kernel, s.stride);
    blk.conv2 = Conv1dLayer(s.out_channels, s.out_channels, s.kernel, 1);
    if (cfg.needs_projection(b)) blk.projection = Conv1dLayer(in, s.out_channels, 1, s.stride);
    e.blocks.push_back(std::move(blk));
    in = s.out_channels;
  }
  return e;
}

inline double init_std_for(const Res1DCNNConfig& cfg, std::size_t fan_in) {
  return cfg.fan_in_init ? std::sqrt(2.0 / static_cast<double>(fan_in)) : cfg.init_std;
}

/**
 * With fan_in_init the residual branches start near identity: the first conv
 * of each branch is scaled by 1/sqrt(#blocks) and the second starts at zero,
 * so activations keep the input's scale through the stack.
 */
inline FeatureExtractor build_extractor(const Res1DCNNConfig& cfg, std::mt19937_64& rng) {
  auto e = make_extractor_shape(cfg);
  const double branch_scale = cfg.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(e.blocks.size(), 1))) : 1.0;
  auto fan_in = [](const Conv1dLayer& l) { return l.in_channels * l.kernel; };
  init_params(e.stem, rng, init_std_for(cfg, fan_in(e.stem)));
  for (auto& b : e.blocks) {
    init_params(b.conv1, rng, branch_scale * init_std_for(cfg, fan_in(b.conv1)));
    init_params(b.conv2, rng, cfg.fan_in_init ? 0.0 : cfg.init_std);
    if (b.projection) init_params(*b.projection, rng, init_std_for(cfg, fan_in(*b.projection)));
  }
  return e;
}

inline DenseLayer build_head(const Res1DCNNConfig& cfg, std::mt19937_64& rng) {
  DenseLayer head(cfg.feature_length(), kNumClasses);
  init_params(head, rng, cfg.fan_in_init ? std::sqrt(1.0 / static_cast<double>(head.in_features)) : cfg.init_std);
  return head;
}

// ---------------------------------------------------------------------------
// Extractor forward / backward

struct BlockCache {
  Tensor input, h1_pre, h1, sum_pre, out;
};

struct ExtractorCache {
  Tensor input, stem_pre, stem_out;
  std::vector<BlockCache> blocks;
  bool valid = false;
};

inline FeatureMap extract_features(const FeatureExtractor& e, std::span<const double> segment,
                                   ExtractorCache* cache = nullptr) {
  const auto& cfg = e.config;
  if (segment.size() != cfg.input_channels * cfg.input_length)
    throw InvariantError("res1dcnn", "extractor expects " + std::to_string(cfg.input_channels * cfg.input_length) +
                                         " input samples, got " + std::to_string(segment.size()));
  Tensor x(cfg.input_channels, cfg.input_length);
  std::copy(segment.begin(), segment.end(), x.values.begin());

  Tensor stem_pre = conv1d_forward(x, e.stem);
  Tensor cur = relu(stem_pre);
  if (cache) {
    cache->blocks.clear();
    cache->input = x;
    cache->stem_pre = std::move(stem_pre);
    cache->stem_out = cur;
  }
  for (const auto& b : e.blocks) {
    Tensor h1_pre = conv1d_forward(cur, b.conv1);
    Tensor h1 = relu(h1_pre);
    Tensor sum = conv1d_forward(h1, b.conv2);
    if (b.projection) {
      const Tensor sc = conv1d_forward(cur, *b.projection);
      for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += sc.values[i];
    } else {
      for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += cur.values[i];
    }
    Tensor out = relu(sum);
    if (cache) {
      cache->blocks.push_back({std::move(cur), std::move(h1_pre), std::move(h1), std::move(sum), out});
    }
    cur = std::move(out);
  }
  FeatureMap z(cur.channels, 0.0);
  for (std::size_t c = 0; c < cur.channels; ++c) {
    double acc = 0.0;
    for (double v : cur.row(c)) acc += v;
    z[c] = acc / static_cast<double>(cur.length);
  }
  if (cache) cache->valid = true;
  return z;
}

/// Accumulates dL/dparams into `grads` given dL/dz; returns dL/dinput.
inline std::vector<double> extractor_backward(const FeatureExtractor& e, const ExtractorCache& cache,
                                              std::span<const double> dz, FeatureExtractor& grads) {
  if (!cache.valid) throw InvariantError("neuralnet", "backward called without a completed forward pass");
  if (dz.size() != e.feature_length()) throw InvariantError("res1dcnn", "feature gradient length mismatch");
  const Tensor& last = e.blocks.empty() ? cache.stem_out : cache.blocks.back().out;
  Tensor d(last.channels, last.length);
  for (std::size_t c = 0; c < d.channels; ++c) {
    const double g = dz[c] / static_cast<double>(d.length);
    for (double& v : d.row(c)) v = g;
  }
  for (std::size_t bi = e.blocks.size(); bi-- > 0;) {
    const auto& b = e.blocks[bi];
    const auto& bc = cache.blocks[bi];
    auto& gb = grads.blocks[bi];
    relu_backward_inplace(bc.sum_pre, d);
    Tensor dh1 = conv1d_backward(bc.h1, b.conv2, d, gb.conv2);
    relu_backward_inplace(bc.h1_pre, dh1);
    Tensor din = conv1d_backward(bc.input, b.conv1, dh1, gb.conv1);
    if (b.projection) {
      const Tensor dsc = conv1d_backward(bc.input, *b.projection, d, *gb.projection);
      for (std::size_t i = 0; i < din.values.size(); ++i) din.values[i] += dsc.values[i];
    } else {
      for (std::size_t i = 0; i < din.values.size(); ++i) din.values[i] += d.values[i];
    }
    d = std::move(din);
  }
  relu_backward_inplace(cache.stem_pre, d);
  return conv1d_backward(cache.input, e.stem, d, grads.stem).values;
}

// ---------------------------------------------------------------------------
// Head and fusion

/// Dense L -> 2 followed by softmax.
inline std::vector<double> classify(const DenseLayer& head, std::span<const double> z) {
  if (z.size() != head.in_features)
    throw InvariantError("res1dcnn", "head expects " + std::to_string(head.in_features) + " features, got " +
                                         std::to_string(z.size()));
  return softmax(dense_forward(z, head));
}

struct FusionWeights {
  std::array<double, kNumChannels> theta{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  bool operator==(const FusionWeights&) const = default;
};

/// z_T = theta_ecg z_ecg + theta_eeg1 z_eeg1 + theta_eeg2 z_eeg2, element-wise.
inline FeatureMap fuse_features(std::span<const double> z_ecg, std::span<const double> z_eeg1,
                                std::span<const double> z_eeg2, const FusionWeights& w) {
  if (z_ecg.size() != z_eeg1.size() || z_ecg.size() != z_eeg2.size())
    throw InvariantError("res1dcnn", "fusion inputs differ in length");
  FeatureMap z(z_ecg.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = w.theta[0] * z_ecg[i] + w.theta[1] * z_eeg1[i] + w.theta[2] * z_eeg2[i];
  return z;
}

// ---------------------------------------------------------------------------
// Models

/// Single-branch network: the ECG student, and the ECG-only baseline.
struct StudentModel {
  FeatureExtractor extractor;
  DenseLayer head;
  bool operator==(const StudentModel&) const = default;
};

struct TeacherModel {
  std::array<FeatureExtractor, kNumChannels> branches;  // ECG, EEG1, EEG2
  FusionWeights fusion;
  DenseLayer head;
  bool trained = false;

  const Res1DCNNConfig& config() const { return branches[0].config; }
  bool operator==(const TeacherModel&) const = default;
};

template <typename M, typename F>
  requires std::same_as<std::remove_const_t<M>, StudentModel>
void visit_parameters(M& m, F&& f) {
  visit_parameters(m.extractor, f);
  visit_parameters(m.head, f);
}

template <typename M, typename F>
  requires std::same_as<std::remove_const_t<M>, TeacherModel>
void visit_parameters(M& m, F&& f) {
  for (auto& b : m.branches) visit_parameters(b, f);
  if constexpr (std::is_const_v<M>)
    f(std::span<const double>(m.fusion.theta));
  else
    f(std::span<double>(m.fusion.theta));
  visit_parameters(m.head, f);
}

inline StudentModel build_res1dcnn(const Res1DCNNConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "res1dcnn"));
  StudentModel m;
  m.extractor = build_extractor(cfg, rng);
  m.head = build_head(cfg, rng);
  return m;
}

inline TeacherModel build_teacher(const Res1DCNNConfig& cfg, std::uint64_t seed) {
  TeacherModel t;
  for (std::size_t k = 0; k < kNumChannels; ++k) {
    std::mt19937_64 rng(derive_seed(seed, "teacher-branch", k));
    t.branches[k] = build_extractor(cfg, rng);
  }
  std::mt19937_64 rng(derive_seed(seed, "teacher-head"));
  t.head = build_head(cfg, rng);
  return t;
}

/// Same-shaped model with every parameter zero; used as a gradient buffer.
template <typename Model>
Model zeros_like(const Model& m) {
  Model z = m;
  zero_parameters(z);
  return z;
}

using SegmentTriple = std::array<std::span<const double>, kNumChannels>;

struct StudentCache {
  ExtractorCache extractor;
  FeatureMap z;
  std::vector<double> probs;
};

inline std::vector<double> student_forward(const StudentModel& m, std::span<const double> ecg,
                                           StudentCache* cache = nullptr) {
  FeatureMap z = extract_features(m.extractor, ecg, cache ? &cache->extractor : nullptr);
  auto p = classify(m.head, z);
  if (cache) {
    cache->z = std::move(z);
    cache->probs = p;
  }
  return p;
}

struct TeacherCache {
  std::array<ExtractorCache, kNumChannels> branches;
  std::array<FeatureMap, kNumChannels> z;
  FeatureMap fused;
  std::vector<double> probs;
};

inline FeatureMap teacher_features(const TeacherModel& t, const SegmentTriple& x, TeacherCache* cache = nullptr) {
  std::array<FeatureMap, kNumChannels> z;
  for (std::size_t k = 0; k < kNumChannels; ++k)
    z[k] = extract_features(t.branches[k], x[k], cache ? &cache->branches[k] : nullptr);
  FeatureMap fused = fuse_features(z[0], z[1], z[2], t.fusion);
  if (cache) {
    cache->z = z;
    cache->fused = fused;
  }
  return fused;
}

inline std::vector<double> teacher_forward(const TeacherModel& t, const SegmentTriple& x,
                                           TeacherCache* cache = nullptr) {
  const FeatureMap fused = teacher_features(t, x, cache);
  auto p = classify(t.head, fused);
  if (cache) cache->probs = p;
  return p;
}

// ---------------------------------------------------------------------------
// Losses with gradients

/// Cross-entropy of a single-branch model; accumulates into `grad` when given.
inline double classifier_loss(const StudentModel& m, std::span<const double> x, Label label,
                              StudentModel* grad = nullptr) {
  StudentCache c;
  const auto p = student_forward(m, x, grad ? &c : nullptr);
  const double loss = cross_entropy(p, class_index(label));
  if (grad) {
    const auto dlogits = softmax_cross_entropy_grad(p, class_index(label));
    const auto dz = dense_backward(c.z, m.head, dlogits, grad->head);
    extractor_backward(m.extractor, c.extractor, dz, grad->extractor);
  }
  return loss;
}

/// Cross-entropy of the fused teacher; gradients reach every branch, theta and the head.
inline double teacher_loss(const TeacherModel& t, const SegmentTriple& x, Label label, TeacherModel* grad = nullptr) {
  TeacherCache c;
  const auto p = teacher_forward(t, x, grad ? &c : nullptr);
  const double loss = cross_entropy(p, class_index(label));
  if (grad) {
    const auto dlogits = softmax_cross_entropy_grad(p, class_index(label));
    const auto dfused = dense_backward(c.fused, t.head, dlogits, grad->head);
    for (std::size_t k = 0; k < kNumChannels; ++k) {
      double dtheta = 0.0;
      FeatureMap dzk(dfused.size());
      for (std::size_t i = 0; i < dfused.size(); ++i) {
        dtheta += dfused[i] * c.z[k][i];
        dzk[i] = t.fusion.theta[k] * dfused[i];
      }
      grad->fusion.theta[k] += dtheta;
      extractor_backward(t.branches[k], c.branches[k], dzk, grad->branches[k]);
    }
  }
  return loss;
}

}  // namespace seizurekd
