// SPDX-License-Identifier: Apache-2.0
// Windowing and the per-segment pipeline: low-pass, detrend,
// standardize, applied in that order.
#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "seizurekd/common.hpp"

namespace seizurekd {

// ---------------------------------------------------------------------------
// Segmentation

// Start indices of full windows; trailing partial windows are dropped.
inline std::vector<std::size_t> segment_starts(std::size_t n, std::size_t window = kWindowLength,
                                               std::size_t overlap = kWindowOverlap) {
  if (overlap >= window) throw InvariantError("preprocess", "overlap must be smaller than the window");
  if (n < window)
    throw InvariantError("preprocess", "channel of " + std::to_string(n) + " samples is shorter than one " +
                                           std::to_string(window) + "-sample window");
  const std::size_t stride = window - overlap;
  const std::size_t count = (n - window) / stride + 1;
  std::vector<std::size_t> starts(count);
  for (std::size_t i = 0; i < count; ++i) starts[i] = i * stride;
  return starts;
}

inline std::vector<std::vector<double>> segment(std::span<const double> channel,
                                                std::size_t window = kWindowLength,
                                                std::size_t overlap = kWindowOverlap) {
  std::vector<std::vector<double>> out;
  for (std::size_t s : segment_starts(channel.size(), window, overlap))
    out.emplace_back(channel.begin() + static_cast<std::ptrdiff_t>(s),
                     channel.begin() + static_cast<std::ptrdiff_t>(s + window));
  return out;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass as a cascade of second-order sections

/// One second-order section, H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }

  // Poles of z^2 + a1 z + a2 lie inside the unit circle iff |a2| < 1 and |a1| < 1 + a2.
  bool stable() const noexcept { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  double sample_rate = static_cast<double>(kSampleRate);

  std::complex<double> response(double freq_hz) const {
    const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate;
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= s.response(omega);
    return h;
  }

  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }
};

/**
 * Digital Butterworth low-pass of even order, discretized with the bilinear
 * transform and the cutoff prewarped so |H(fc)| = 1/sqrt(2) exactly.
 *
 * Each conjugate analog pole pair p, p* gives the section
 *   wc^2 / (s^2 + q s + wc^2),  q = -2 Re(p),
 * which maps under s = K (z - 1) / (z + 1), K = 2 fs, to unit-DC-gain biquads.
 */
inline FilterCoefficients design_butterworth(int order = 10, double cutoff_hz = 50.0,
                                             double sample_rate = static_cast<double>(kSampleRate)) {
  if (order <= 0 || order % 2 != 0)
    throw InvariantError("preprocess", "Butterworth order must be a positive even number");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0)
    throw InvariantError("preprocess", "cutoff must lie in (0, Nyquist)");

  const double k = 2.0 * sample_rate;
  const double wc = k * std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double wc2 = wc * wc;

  FilterCoefficients f;
  f.sample_rate = sample_rate;
  for (int i = 0; i < order / 2; ++i) {
    const double angle = std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order);
    const double q = -2.0 * wc * std::cos(angle);
    const double a0 = k * k + q * k + wc2;
    Biquad s;
    s.b0 = wc2 / a0;
    s.b1 = 2.0 * wc2 / a0;
    s.b2 = wc2 / a0;
    s.a1 = (2.0 * wc2 - 2.0 * k * k) / a0;
    s.a2 = (k * k - q * k + wc2) / a0;
    f.sections.push_back(s);
  }
  return f;
}

/// 10th-order, 50 Hz, 256 Hz; designed once.
inline const FilterCoefficients& default_filter() {
  static const FilterCoefficients f = design_butterworth(10, 50.0, static_cast<double>(kSampleRate));
  return f;
}

namespace detail {
inline void require_window(std::span<const double> x, const char* stage) {
  if (x.size() != kWindowLength)
    throw InvariantError("preprocess", std::string(stage) + " expects " + std::to_string(kWindowLength) +
                                           " samples, got " + std::to_string(x.size()));
}
}  // namespace detail

/**
 * Causal single pass, transposed direct form II. Each section starts in the
 * steady state for its first input sample, so a constant passes unchanged.
 */
inline std::vector<double> lowpass(std::span<const double> segment, const FilterCoefficients& coeffs) {
  detail::require_window(segment, "lowpass");
  std::vector<double> y(segment.begin(), segment.end());
  for (const auto& s : coeffs.sections) {
    const double x0 = y.front();
    const double y0 = x0 * (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z1 = y0 - s.b0 * x0, z2 = s.b2 * x0 - s.a2 * y0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

/// Subtracts the least-squares line over t = 0..n-1.
inline std::vector<double> detrend(std::span<const double> segment) {
  const std::size_t n = segment.size();
  if (n < 2) throw InvariantError("preprocess", "detrend needs at least two samples");
  // Centered time keeps the slope estimate well conditioned.
  const double tmean = (static_cast<double>(n) - 1.0) / 2.0;
  double ymean = 0.0;
  for (double v : segment) ymean += v;
  ymean /= static_cast<double>(n);
  double sty = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tc = static_cast<double>(i) - tmean;
    sty += tc * (segment[i] - ymean);
    stt += tc * tc;
  }
  const double slope = sty / stt;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = segment[i] - (ymean + slope * (static_cast<double>(i) - tmean));
  return out;
}

inline constexpr double kDegenerateStd = 1e-8;

/// Zero mean, unit population variance; near-constant input maps to zeros.
inline std::vector<double> standardize(std::span<const double> segment) {
  detail::require_window(segment, "standardize");
  const double n = static_cast<double>(segment.size());
  double mean = 0.0;
  for (double v : segment) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : segment) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  std::vector<double> out(segment.size(), 0.0);
  if (sd < kDegenerateStd) return out;
  for (std::size_t i = 0; i < segment.size(); ++i) out[i] = (segment[i] - mean) / sd;
  return out;
}

struct PreprocessedSegment {
  std::vector<double> samples;
  std::string channel;
  WindowOrigin origin;
};

struct PipelineStages {
  std::vector<double> raw, filtered, detrended, standardized;
};

inline PipelineStages run_stages(std::span<const double> raw, const FilterCoefficients& coeffs = default_filter()) {
  detail::require_window(raw, "pipeline");
  PipelineStages s;
  s.raw.assign(raw.begin(), raw.end());
  s.filtered = lowpass(raw, coeffs);
  s.detrended = detrend(s.filtered);
  s.standardized = standardize(s.detrended);
  return s;
}

inline PreprocessedSegment preprocess_pipeline(std::span<const double> raw, std::string channel = {},
                                               WindowOrigin origin = {},
                                               const FilterCoefficients& coeffs = default_filter()) {
  detail::require_window(raw, "pipeline");
  return {standardize(detrend(lowpass(raw, coeffs))), std::move(channel), std::move(origin)};
}

/// Debug dump: one row per sample with every intermediate stage.
inline void write_stage_csv(std::ostream& out, const PipelineStages& s) {
  out << "raw,filtered,detrended,standardized\n";
  out.precision(17);
  for (std::size_t i = 0; i < s.raw.size(); ++i)
    out << s.raw[i] << ',' << s.filtered[i] << ',' << s.detrended[i] << ',' << s.standardized[i] << '\n';
}

}  // namespace seizurekd
