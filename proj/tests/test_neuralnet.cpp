#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "seizurekd/neuralnet.hpp"

using namespace seizurekd;

namespace {

Tensor random_tensor(std::size_t c, std::size_t l, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(c, l);
  for (double& v : t.values) v = g(rng);
  return t;
}

Conv1dLayer random_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t s, std::uint64_t seed) {
  Conv1dLayer l(in, out, k, s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  for (double& w : l.weights) w = g(rng);
  for (double& b : l.bias) b = g(rng);
  return l;
}

// Direct nested-loop "same" convolution.
Tensor conv_oracle(const Tensor& x, const Conv1dLayer& l) {
  const std::size_t out_len = (x.length + l.stride - 1) / l.stride;
  const std::size_t span = (out_len - 1) * l.stride + l.kernel;
  const std::ptrdiff_t pad = span > x.length ? static_cast<std::ptrdiff_t>((span - x.length) / 2) : 0;
  Tensor y(l.out_channels, out_len);
  for (std::size_t o = 0; o < l.out_channels; ++o)
    for (std::size_t t = 0; t < out_len; ++t) {
      double acc = l.bias[o];
      for (std::size_t i = 0; i < l.in_channels; ++i)
        for (std::size_t k = 0; k < l.kernel; ++k) {
          const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(t * l.stride + k) - pad;
          if (p >= 0 && p < static_cast<std::ptrdiff_t>(x.length)) acc += l.w(o, i, k) * x.at(i, static_cast<std::size_t>(p));
        }
      y.at(o, t) = acc;
    }
  return y;
}

}  // namespace

TEST(Init, BiasesZeroAndStdMatches) {
  Conv1dLayer l(1, 1000, 100, 1);
  std::mt19937_64 rng(3);
  init_params(l, rng);
  for (double b : l.bias) EXPECT_EQ(b, 0.0);
  double s = 0.0, ss = 0.0;
  for (double w : l.weights) {
    s += w;
    ss += w * w;
  }
  const double n = static_cast<double>(l.weights.size());
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  EXPECT_GE(sd, 0.0095);
  EXPECT_LE(sd, 0.0105);
}

TEST(Init, SeededAndRejectsNegativeStd) {
  DenseLayer a(10, 4), b(10, 4);
  std::mt19937_64 r1(9), r2(9);
  init_params(a, r1);
  init_params(b, r2);
  EXPECT_EQ(a, b);
  EXPECT_THROW(init_params(a, r1, -1.0), InvariantError);
  init_params(a, r1, 0.0);
  for (double w : a.weights) EXPECT_EQ(w, 0.0);
}

TEST(Conv, IdentityKernel) {
  Conv1dLayer l(1, 1, 1, 1);
  l.weights[0] = 1.0;
  const Tensor x = random_tensor(1, 50, 1);
  EXPECT_EQ(conv1d_forward(x, l), x);
}

TEST(Conv, StrideTwoHalvesLength) {
  Conv1dLayer l(1, 4, 7, 2);
  EXPECT_EQ(conv1d_forward(Tensor(1, 768), l).length, 384u);
  EXPECT_EQ(l.out_length(767), 384u);
}

TEST(Conv, MatchesNestedLoopOracle) {
  for (std::size_t stride : {1u, 2u})
    for (std::size_t k : {1u, 3u, 4u, 7u}) {
      const Tensor x = random_tensor(2, 33, 10 + k);
      const auto l = random_conv(2, 3, k, stride, 20 + k);
      const Tensor y = conv1d_forward(x, l);
      const Tensor ref = conv_oracle(x, l);
      ASSERT_EQ(y.length, ref.length);
      for (std::size_t i = 0; i < y.values.size(); ++i) EXPECT_NEAR(y.values[i], ref.values[i], 1e-12);
    }
}

TEST(Conv, ChannelMismatchThrows) {
  Conv1dLayer l(2, 1, 3, 1);
  EXPECT_THROW(conv1d_forward(Tensor(1, 10), l), InvariantError);
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  const Tensor x = random_tensor(2, 17, 5);
  auto l = random_conv(2, 3, 3, 2, 6);
  const Tensor up = random_tensor(3, l.out_length(17), 7);
  auto loss = [&](const Conv1dLayer& c, const Tensor& in) {
    const Tensor y = conv1d_forward(in, c);
    double s = 0.0;
    for (std::size_t i = 0; i < y.values.size(); ++i) s += y.values[i] * up.values[i];
    return s;
  };
  Conv1dLayer g(2, 3, 3, 2);
  const Tensor dx = conv1d_backward(x, l, up, g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < l.weights.size(); ++i) {
    auto p = l, m = l;
    p.weights[i] += h;
    m.weights[i] -= h;
    EXPECT_NEAR(g.weights[i], (loss(p, x) - loss(m, x)) / (2 * h), 1e-6);
  }
  for (std::size_t i = 0; i < l.bias.size(); ++i) {
    auto p = l, m = l;
    p.bias[i] += h;
    m.bias[i] -= h;
    EXPECT_NEAR(g.bias[i], (loss(p, x) - loss(m, x)) / (2 * h), 1e-6);
  }
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    auto p = x, m = x;
    p.values[i] += h;
    m.values[i] -= h;
    EXPECT_NEAR(dx.values[i], (loss(l, p) - loss(l, m)) / (2 * h), 1e-6);
  }
}

TEST(Conv, ZeroUpstreamGivesZeroGradients) {
  const Tensor x = random_tensor(2, 12, 1);
  const auto l = random_conv(2, 2, 3, 1, 2);
  Conv1dLayer g(2, 2, 3, 1);
  const Tensor dx = conv1d_backward(x, l, Tensor(2, 12), g);
  for (double v : dx.values) EXPECT_EQ(v, 0.0);
  for (double v : g.weights) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(Dense, IdentityAndZeroWeights) {
  DenseLayer d(3, 3);
  for (std::size_t i = 0; i < 3; ++i) d.weights[i * 3 + i] = 1.0;
  const std::vector<double> x{1.5, -2.0, 0.25};
  EXPECT_EQ(dense_forward(x, d), x);
  DenseLayer z(3, 2);
  z.bias = {0.7, -0.1};
  EXPECT_EQ(dense_forward(x, z), z.bias);
  EXPECT_THROW(dense_forward(std::vector<double>{1.0}, z), InvariantError);
}

TEST(Dense, BackwardIsOuterProduct) {
  DenseLayer d(3, 2);
  d.weights = {1, 2, 3, 4, 5, 6};
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::vector<double> up{1.0, 1.0};  // loss = sum of outputs
  DenseLayer g(3, 2);
  const auto dx = dense_backward(x, d, up, g);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g.weights[o * 3 + i], x[i]);
  EXPECT_EQ(g.bias, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(dx, (std::vector<double>{5.0, 7.0, 9.0}));
}

TEST(Activations, Relu) {
  Tensor t(1, 4);
  t.values = {-1.0, 0.0, 2.0, -0.5};
  EXPECT_EQ(relu(t).values, (std::vector<double>{0.0, 0.0, 2.0, 0.0}));
}

TEST(Activations, Softmax) {
  EXPECT_EQ(softmax(std::vector<double>{0.0, 0.0}), (std::vector<double>{0.5, 0.5}));
  const std::vector<double> x{0.3, -1.2, 2.5};
  const auto p = softmax(x);
  double sum = 0.0;
  for (double v : p) {
    EXPECT_GT(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  for (double c : {-50.0, 3.0, 700.0}) {
    auto y = x;
    for (double& v : y) v += c;
    const auto q = softmax(y);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(q[i], p[i], 1e-12);
  }
  EXPECT_THROW(softmax(std::vector<double>{NAN, 0.0}), NumericalError);
  EXPECT_THROW(softmax(std::vector<double>{}), InvariantError);
}

TEST(Activations, CrossEntropy) {
  const std::vector<double> half{0.5, 0.5};
  EXPECT_NEAR(cross_entropy(half, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(half, 1), 0.6931, 1e-4);
  EXPECT_NEAR(cross_entropy(std::vector<double>{1.0, 0.0}, 1), -std::log(kProbabilityFloor), 1e-9);
  EXPECT_THROW(cross_entropy(std::vector<double>{0.7, 0.7}, 0), InvariantError);
  EXPECT_THROW(cross_entropy(half, 2), InvariantError);
}

TEST(Activations, SoftmaxCrossEntropyGradient) {
  const std::vector<double> z{0.4, -0.3};
  const auto g = softmax_cross_entropy_grad(softmax(z), 1);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 2; ++i) {
    auto p = z, m = z;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(g[i], (cross_entropy(softmax(p), 1) - cross_entropy(softmax(m), 1)) / (2 * h), 1e-8);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  AdamState st;
  st.learning_rate = 0.1;
  adam_step(std::span<double>(p), std::span<const double>(g), st);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0, 0.0, 0.0}, g{3.0, -0.01, 250.0};
  AdamState st;
  st.learning_rate = 1e-3;
  adam_step(std::span<double>(p), std::span<const double>(g), st);
  // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(p[i], -1e-3 * g[i] / (std::abs(g[i]) + st.epsilon), 1e-15);
}

TEST(Adam, DeterministicTrajectoryAndShapeCheck) {
  auto run = [] {
    std::vector<double> p{0.5, -0.5};
    AdamState st;
    st.learning_rate = 0.01;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> g{2 * p[0], 4 * p[1] + 1};
      adam_step(std::span<double>(p), std::span<const double>(g), st);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
  std::vector<double> p(2), g(3);
  AdamState st;
  EXPECT_THROW(adam_step(std::span<double>(p), std::span<const double>(g), st), InvariantError);
}

TEST(Parameters, FlattenAssignRoundTrip) {
  auto l = random_conv(2, 3, 3, 1, 4);
  const auto flat = flatten_parameters(l);
  EXPECT_EQ(flat.size(), parameter_count(l));
  Conv1dLayer z(2, 3, 3, 1);
  assign_parameters(z, std::span<const double>(flat));
  EXPECT_EQ(z, l);
  EXPECT_THROW(assign_parameters(z, std::span<const double>(flat).first(3)), InvariantError);
}

TEST(GradCheck, SkipsReluKinkButNotCurvature) {
  DenseLayer d(1, 1);
  d.weights[0] = 3e-6;  // within h of the ReLU switch
  d.bias[0] = 0.5;
  auto kinked = [](const DenseLayer& m, DenseLayer* g) {
    const double w = m.weights[0];
    if (g) g->weights[0] += w > 0.0 ? 1.0 : 0.0;
    if (g) g->bias[0] += 2.0 * m.bias[0];
    return std::max(w, 0.0) + m.bias[0] * m.bias[0];
  };
  auto r = gradient_check(d, kinked);
  EXPECT_EQ(r.kinks, 1u);
  EXPECT_LT(r.max_relative_error, 1e-8);

  // Steep but smooth: the one-sided slopes differ, yet the gap shrinks with the step.
  d.weights[0] = 1e-3;
  auto steep = [](const DenseLayer& m, DenseLayer* g) {
    const double w = m.weights[0];
    if (g) g->weights[0] += 2e4 * w;
    return 1e4 * w * w + 0.0 * m.bias[0];
  };
  r = gradient_check(d, steep);
  EXPECT_EQ(r.kinks, 0u);
  EXPECT_LT(r.max_relative_error, 1e-6);

  // A wrong gradient is still reported.
  auto wrong = [](const DenseLayer& m, DenseLayer* g) {
    if (g) g->weights[0] += 1.0;
    return 2.0 * m.weights[0];
  };
  EXPECT_GT(gradient_check(d, wrong).max_relative_error, 0.4);
}
