#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "seizurekd/preprocess.hpp"

using namespace seizurekd;

namespace {

std::vector<double> sine(double freq, double amp = 1.0) {
  std::vector<double> x(kWindowLength);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / kSampleRate);
  return x;
}

double peak(std::span<const double> x, std::size_t from) {
  double m = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

// Least squares via the 2x2 normal equations on raw (uncentered) t.
std::vector<double> detrend_oracle(std::span<const double> y) {
  long double n = y.size(), st = 0, stt = 0, sy = 0, sty = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    st += i;
    stt += static_cast<long double>(i) * i;
    sy += y[i];
    sty += static_cast<long double>(i) * y[i];
  }
  const long double det = n * stt - st * st;
  const long double b = (stt * sy - st * sty) / det;
  const long double a = (n * sty - st * sy) / det;
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = static_cast<double>(y[i] - (a * i + b));
  return r;
}

}  // namespace

TEST(Segment, CountsAndStarts) {
  EXPECT_EQ(segment_starts(768), std::vector<std::size_t>{0});
  EXPECT_EQ(segment_starts(2104), (std::vector<std::size_t>{0, 668, 1336}));
  EXPECT_EQ(segment_starts(2103).size(), 2u);
  EXPECT_THROW(segment_starts(767), InvariantError);
  std::vector<double> x(2104);
  std::iota(x.begin(), x.end(), 0.0);
  const auto w = segment(x);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[2].front(), 1336.0);
  EXPECT_EQ(w[2].size(), 768u);
}

TEST(Segment, MatchesLoopOracleOnRandomLengths) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(768, 200000);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = len(rng);
    std::vector<std::size_t> oracle;
    for (std::size_t s = 0; s + 768 <= n; s += 668) oracle.push_back(s);
    ASSERT_EQ(segment_starts(n), oracle) << n;
  }
}

TEST(Butterworth, DesignProperties) {
  const auto& f = default_filter();
  ASSERT_EQ(f.sections.size(), 5u);
  for (const auto& s : f.sections) {
    EXPECT_TRUE(s.stable());
    EXPECT_NEAR(std::abs(s.response(0.0)), 1.0, 1e-12);
  }
  EXPECT_NEAR(f.magnitude(0.0), 1.0, 1e-9);
  EXPECT_NEAR(f.magnitude(50.0), 1.0 / std::sqrt(2.0), 1e-6);
  EXPECT_LE(20.0 * std::log10(f.magnitude(100.0)), -60.0);
  double prev = f.magnitude(0.0);
  for (double hz = 0.25; hz < 128.0; hz += 0.25) {
    const double m = f.magnitude(hz);
    EXPECT_LE(m, prev + 1e-12) << hz;
    prev = m;
  }
  EXPECT_THROW(design_butterworth(10, 128.0, 256.0), InvariantError);
  EXPECT_THROW(design_butterworth(9, 50.0, 256.0), InvariantError);
}

TEST(Butterworth, MatchesAnalogPrototypeAfterPrewarp) {
  // Bilinear transform maps f to the analog frequency tan(pi f / fs); the
  // magnitude must equal 1 / sqrt(1 + (w / wc)^20) there.
  const auto& f = default_filter();
  const double wc = std::tan(std::numbers::pi * 50.0 / 256.0);
  for (double hz : {5.0, 20.0, 40.0, 50.0, 60.0, 80.0, 100.0, 120.0}) {
    const double w = std::tan(std::numbers::pi * hz / 256.0);
    EXPECT_NEAR(f.magnitude(hz), 1.0 / std::sqrt(1.0 + std::pow(w / wc, 20.0)), 1e-9) << hz;
  }
}

TEST(Lowpass, ConstantPassesThrough) {
  const std::vector<double> c(kWindowLength, 2.5);
  const auto y = lowpass(c, default_filter());
  for (std::size_t i = 200; i < y.size(); ++i) EXPECT_NEAR(y[i], 2.5, 2.5e-6);
}

TEST(Lowpass, SinusoidGains) {
  const auto& f = default_filter();
  const auto lo = lowpass(sine(10.0), f);
  EXPECT_NEAR(peak(lo, 300), f.magnitude(10.0), 0.01);
  EXPECT_NEAR(peak(lo, 300), 1.0, 0.01);
  const auto hi = lowpass(sine(120.0), f);
  EXPECT_LE(20.0 * std::log10(peak(hi, 300)), -60.0);
  EXPECT_THROW(lowpass(std::vector<double>(10), f), InvariantError);
}

TEST(Lowpass, Linear) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x(kWindowLength), y(kWindowLength), z(kWindowLength);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = g(rng);
    z[i] = 1.5 * x[i] - 0.25 * y[i];
  }
  const auto fx = lowpass(x, default_filter()), fy = lowpass(y, default_filter()), fz = lowpass(z, default_filter());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fz[i], 1.5 * fx[i] - 0.25 * fy[i], 1e-9);
}

TEST(Detrend, Examples) {
  std::vector<double> line(kWindowLength), zero(kWindowLength, 0.0), sq(kWindowLength);
  for (std::size_t i = 0; i < line.size(); ++i) {
    line[i] = 0.37 * static_cast<double>(i) - 12.0;
    sq[i] = static_cast<double>(i) * static_cast<double>(i);
  }
  for (double v : detrend(line)) EXPECT_NEAR(v, 0.0, 1e-9);
  for (double v : detrend(zero)) EXPECT_EQ(v, 0.0);
  const auto r = detrend(sq), o = detrend_oracle(sq);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], o[i], 1e-9);
  EXPECT_THROW(detrend(std::vector<double>{1.0}), InvariantError);
}

TEST(Detrend, ResidualOrthogonalToConstantAndRamp) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> x(kWindowLength);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g(rng) + 0.01 * static_cast<double>(i);
  const auto r = detrend(x);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    s0 += r[i];
    s1 += r[i] * static_cast<double>(i);
  }
  EXPECT_NEAR(s0, 0.0, 1e-9);
  EXPECT_NEAR(s1 / static_cast<double>(r.size()), 0.0, 1e-9);
}

TEST(Standardize, Examples) {
  std::vector<double> c(kWindowLength, 4.0), alt(kWindowLength);
  for (double v : standardize(c)) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 3.0 : 1.0;
  const auto s = standardize(alt);
  // mean 2, population std 1, so the result is x - 2.
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], alt[i] - 2.0, 1e-12);
  EXPECT_THROW(standardize(std::vector<double>(5, 1.0)), InvariantError);
}

TEST(Pipeline, ConstantAndDeterminism) {
  const std::vector<double> c(kWindowLength, -7.0);
  for (double v : preprocess_pipeline(c).samples) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(kWindowLength);
  for (double& v : x) v = g(rng);
  const auto a = preprocess_pipeline(x, "ECG", {"r", 0});
  const auto b = preprocess_pipeline(x, "ECG", {"r", 0});
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.channel, "ECG");
  double m = 0.0, v2 = 0.0;
  for (double v : a.samples) m += v;
  m /= kWindowLength;
  for (double v : a.samples) v2 += (v - m) * (v - m);
  EXPECT_NEAR(m, 0.0, 1e-9);
  EXPECT_NEAR(v2 / kWindowLength, 1.0, 1e-6);
}

TEST(Pipeline, StageOrderMatters) {
  std::vector<double> x(kWindowLength);
  const auto hf = sine(120.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.05 * static_cast<double>(i) + hf[i];
  const auto ordered = standardize(detrend(lowpass(x, default_filter())));
  const auto swapped = standardize(lowpass(detrend(x), default_filter()));
  double diff = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(ordered[i] - swapped[i]));
  EXPECT_GT(diff, 1e-3);
  EXPECT_EQ(ordered, preprocess_pipeline(x).samples);
}

TEST(Pipeline, StageCsvHasAllColumns) {
  std::vector<double> x(kWindowLength, 1.0);
  x[10] = 3.0;
  std::ostringstream out;
  write_stage_csv(out, run_stages(x));
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "raw,filtered,detrended,standardized");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(kWindowLength + 1));
}
