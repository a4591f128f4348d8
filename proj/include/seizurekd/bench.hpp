// SPDX-License-Identifier: Apache-2.0
// Per-segment latency timing, multiply-accumulate counting and the
// duty-cycle battery-life model.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seizurekd/common.hpp"
#include "seizurekd/res1dcnn.hpp"

namespace seizurekd {

// ---------------------------------------------------------------------------
// Timing

struct TimingReport {
  std::string model;
  std::size_t repetitions = 0;
  std::size_t segments = 0;
  std::vector<double> run_means_ms;  // one mean per repetition
  double mean_ms = 0.0, std_ms = 0.0, median_of_means_ms = 0.0;

  bool real_time(double period_s = 3.0) const { return mean_ms < period_s * 1000.0; }

  nlohmann::json to_json() const {
    return {{"model", model},     {"repetitions", repetitions}, {"segments", segments},
            {"mean_ms", mean_ms}, {"std_ms", std_ms},           {"median_of_means_ms", median_of_means_ms},
            {"run_means_ms", run_means_ms}};
  }
};

/**
 * Times `infer(segment)` over every segment, `repetitions` times, after one
 * untimed warm-up pass. Mean and std are over all per-segment latencies.
 */
template <typename Segment, typename Infer>
TimingReport time_inference(const std::string& model, std::span<const Segment> segments, std::size_t repetitions,
                            Infer&& infer) {
  if (segments.empty()) throw InvariantError("bench", "no segments to time");
  if (repetitions == 0) throw InvariantError("bench", "repetitions must be at least 1");
  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;
  for (const auto& s : segments) sink = sink + infer(s)[0];

  TimingReport r;
  r.model = model;
  r.repetitions = repetitions;
  r.segments = segments.size();
  std::vector<double> all;
  all.reserve(segments.size() * repetitions);
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    double run = 0.0;
    for (const auto& s : segments) {
      const auto t0 = clock::now();
      sink = sink + infer(s)[0];
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      all.push_back(ms);
      run += ms;
    }
    r.run_means_ms.push_back(run / static_cast<double>(segments.size()));
  }
  r.mean_ms = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
  double ss = 0.0;
  for (double v : all) ss += (v - r.mean_ms) * (v - r.mean_ms);
  r.std_ms = all.size() > 1 ? std::sqrt(ss / static_cast<double>(all.size() - 1)) : 0.0;
  auto means = r.run_means_ms;
  std::sort(means.begin(), means.end());
  const std::size_t n = means.size();
  r.median_of_means_ms = n % 2 ? means[n / 2] : 0.5 * (means[n / 2 - 1] + means[n / 2]);
  return r;
}

// ---------------------------------------------------------------------------
// Multiply-accumulate counts (padding taps included, as executed)

inline std::uint64_t flop_count(const Conv1dLayer& l, std::size_t in_length) {
  return std::uint64_t{l.out_length(in_length)} * l.out_channels * l.in_channels * l.kernel;
}

inline std::uint64_t flop_count(const DenseLayer& l) { return std::uint64_t{l.in_features} * l.out_features; }

inline std::uint64_t flop_count(const FeatureExtractor& e) {
  std::size_t len = e.config.input_length;
  std::uint64_t n = flop_count(e.stem, len);
  len = e.stem.out_length(len);
  for (const auto& b : e.blocks) {
    n += flop_count(b.conv1, len);
    if (b.projection) n += flop_count(*b.projection, len);
    const std::size_t mid = b.conv1.out_length(len);
    n += flop_count(b.conv2, mid);
    len = mid;
  }
  return n;
}

inline std::uint64_t flop_count(const StudentModel& m) { return flop_count(m.extractor) + flop_count(m.head); }

/// Three branches, the element-wise fusion (one MAC per branch and feature), then the head.
inline std::uint64_t flop_count(const TeacherModel& t) {
  std::uint64_t n = 0;
  for (const auto& b : t.branches) n += flop_count(b);
  return n + kNumChannels * t.head.in_features + flop_count(t.head);
}

// ---------------------------------------------------------------------------
// Energy model

struct PlatformProfile {
  std::string name;
  double active_ma = 0.0;
  double idle_ma = 0.0;
  double capacity_mah = 570.0;
  double period_s = 3.0;
  double inference_s = 0.0;

  bool real_time() const noexcept { return inference_s <= period_s; }

  void validate() const {
    if (!(active_ma >= 0.0) || !(idle_ma >= 0.0)) throw InvariantError("bench", "currents must be non-negative");
    if (!(capacity_mah > 0.0) || !(period_s > 0.0) || !(inference_s >= 0.0))
      throw InvariantError("bench", "capacity and period must be positive, inference time non-negative");
  }

  static PlatformProfile from_kv(const KeyValueFile& kv) {
    const std::string mod = "bench";
    PlatformProfile p;
    p.name = kv.get("name", mod);
    p.active_ma = kv.get_double("active_ma", mod);
    p.idle_ma = kv.get_double("idle_ma", mod);
    p.inference_s = kv.get_double("inference_s", mod);
    if (kv.has("capacity_mah")) p.capacity_mah = kv.get_double("capacity_mah", mod);
    if (kv.has("period_s")) p.period_s = kv.get_double("period_s", mod);
    p.validate();
    return p;
  }

  nlohmann::json to_json() const {
    return {{"name", name},         {"active_ma", active_ma}, {"idle_ma", idle_ma},
            {"capacity_mah", capacity_mah}, {"period_s", period_s}, {"inference_s", inference_s}};
  }
};

/**
 * Bundled profiles. The Raspberry Pi and K210 entries carry a flat average
 * current (active == idle) recovered from the published battery lives as
 * 570 mAh / hours; only the PULP entry has measured active/idle currents.
 */
inline const std::map<std::string, PlatformProfile>& builtin_profiles() {
  static const std::map<std::string, PlatformProfile> p{
      {"raspberry-pi-zero", {"raspberry-pi-zero", 72.5, 72.5, 570.0, 3.0, 0.72015}},
      {"raspberry-pi-zero-teacher", {"raspberry-pi-zero-teacher", 99.8, 99.8, 570.0, 3.0, 2.08056}},
      {"kendryte-k210", {"kendryte-k210", 35.0, 35.0, 570.0, 3.0, 1.04064}},
      {"pulp", {"pulp", 23.58, 0.76, 570.0, 3.0, 0.72}},
  };
  return p;
}

inline PlatformProfile builtin_profile(const std::string& name) {
  const auto& all = builtin_profiles();
  const auto it = all.find(name);
  if (it == all.end()) throw UsageError("bench", "unknown platform profile '" + name + "'");
  return it->second;
}

struct EnergyReport {
  std::string platform;
  double duty_cycle = 0.0;
  double avg_current_ma = 0.0;
  double capacity_mah = 0.0;
  double hours = 0.0;

  nlohmann::json to_json() const {
    return {{"platform", platform}, {"duty_cycle", duty_cycle}, {"avg_current_ma", avg_current_ma},
            {"capacity_mah", capacity_mah}, {"battery_life_h", hours}};
  }
};

inline EnergyReport battery_life(const PlatformProfile& p) {
  p.validate();
  if (!p.real_time())
    throw InvariantError("bench", "real-time violation on '" + p.name + "': inference " + std::to_string(p.inference_s) +
                                      " s exceeds the " + std::to_string(p.period_s) + " s segment period");
  EnergyReport r;
  r.platform = p.name;
  r.duty_cycle = p.inference_s / p.period_s;
  r.avg_current_ma = (p.active_ma * p.inference_s + p.idle_ma * (p.period_s - p.inference_s)) / p.period_s;
  if (!(r.avg_current_ma > 0.0)) throw NumericalError("bench", "average current is zero; battery life unbounded");
  r.capacity_mah = p.capacity_mah;
  r.hours = p.capacity_mah / r.avg_current_ma;
  return r;
}

/// Average current that yields `hours` on `capacity_mah`.
inline double current_for_battery_life(double capacity_mah, double hours) {
  if (!(hours > 0.0)) throw InvariantError("bench", "battery life must be positive");
  return capacity_mah / hours;
}

/// 1 - I_a / I_b: relative reduction of `a` against the reference `b`.
inline double compare_energy(const EnergyReport& a, const EnergyReport& b) {
  if (a.capacity_mah != b.capacity_mah) throw InvariantError("bench", "energy reports use different battery capacities");
  return 1.0 - a.avg_current_ma / b.avg_current_ma;
}

}  // namespace seizurekd
