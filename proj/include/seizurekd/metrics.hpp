// SPDX-License-Identifier: Apache-2.0
// Confusion matrix and the segment-level detection metrics:
// sensitivity, specificity, geometric mean, accuracy and F1.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seizurekd/common.hpp"

namespace seizurekd {

/// Rows are ground truth (seizure, non-seizure); columns are predictions.
struct ConfusionMatrix {
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

  std::size_t positives() const noexcept { return tp + fn; }
  std::size_t negatives() const noexcept { return fp + tn; }
  std::size_t total() const noexcept { return tp + fn + fp + tn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fn += o.fn;
    fp += o.fp;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Argmax over (non-seizure, seizure); an exact tie predicts non-seizure.
inline Label predict_label(std::span<const double> probs) {
  if (probs.size() != 2) throw InvariantError("metrics", "expected two class probabilities");
  return probs[1] > probs[0] ? Label::seizure : Label::non_seizure;
}

inline ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size())
    throw InvariantError("metrics", "predictions (" + std::to_string(predictions.size()) + ") and labels (" +
                                        std::to_string(labels.size()) + ") differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = labels[i] == Label::seizure;
    const bool pred = predictions[i] == Label::seizure;
    if (pos && pred) ++cm.tp;
    else if (pos) ++cm.fn;
    else if (pred) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

/// A metric value; a zero denominator yields 0 with `degenerate` set.
struct Ratio {
  double value = 0.0;
  bool degenerate = false;
  operator double() const noexcept { return value; }
};

namespace detail {
inline void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InvariantError("metrics", "empty confusion matrix");
}
inline Ratio ratio(double num, double den) { return den == 0.0 ? Ratio{0.0, true} : Ratio{num / den, false}; }
}  // namespace detail

inline Ratio sensitivity(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  return detail::ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
}

inline Ratio specificity(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  return detail::ratio(static_cast<double>(cm.tn), static_cast<double>(cm.fp + cm.tn));
}

inline Ratio gmean(const ConfusionMatrix& cm) {
  const Ratio se = sensitivity(cm), sp = specificity(cm);
  return {std::sqrt(se.value * sp.value), se.degenerate || sp.degenerate};
}

inline Ratio accuracy(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  return detail::ratio(static_cast<double>(cm.tp + cm.tn), static_cast<double>(cm.total()));
}

inline Ratio f1(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  return detail::ratio(2.0 * static_cast<double>(cm.tp), static_cast<double>(2 * cm.tp + cm.fp + cm.fn));
}

/// Ratio as a percentage rounded half-up to two decimals.
inline double round_percent(double ratio) { return std::floor(ratio * 10000.0 + 0.5) / 100.0; }

struct MetricsReport {
  ConfusionMatrix cm;
  double sen = 0, spe = 0, gmean = 0, acc = 0, f1 = 0;
  bool degenerate = false;

  static MetricsReport from(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.cm = cm;
    const Ratio s = sensitivity(cm), p = specificity(cm), g = seizurekd::gmean(cm), a = accuracy(cm),
                f = seizurekd::f1(cm);
    r.sen = s;
    r.spe = p;
    r.gmean = g;
    r.acc = a;
    r.f1 = f;
    r.degenerate = s.degenerate || p.degenerate || a.degenerate || f.degenerate;
    return r;
  }

  nlohmann::json to_json() const {
    return {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}, {"sen", sen},
            {"spe", spe},  {"gmean", gmean}, {"acc", acc}, {"f1", f1}};
  }
};

/// Differences b - a for every metric.
struct MetricDeltas {
  double sen = 0, spe = 0, gmean = 0, acc = 0, f1 = 0;

  static MetricDeltas between(const MetricsReport& a, const MetricsReport& b) {
    return {b.sen - a.sen, b.spe - a.spe, b.gmean - a.gmean, b.acc - a.acc, b.f1 - a.f1};
  }

  nlohmann::json to_json() const {
    return {{"d_sen", sen}, {"d_spe", spe}, {"d_gmean", gmean}, {"d_acc", acc}, {"d_f1", f1}};
  }
};

}  // namespace seizurekd
