// SPDX-License-Identifier: Apache-2.0
// Training: the multi-modal teacher (cross-entropy), the ECG student
// distilled by feature-map matching against the frozen teacher, and
// an ECG-only cross-entropy baseline under the same budget.
//
// Mini-batch gradients are summed sample by sample in batch order, so a run
// is bit-reproducible for a given seed.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seizurekd/biosignal_io.hpp"
#include "seizurekd/metrics.hpp"
#include "seizurekd/preprocess.hpp"
#include "seizurekd/res1dcnn.hpp"

namespace seizurekd {

/// A preprocessed, labeled window: one standardized segment per modality.
struct Example {
  std::array<std::vector<double>, kNumChannels> channels;
  Label label = Label::non_seizure;
  WindowOrigin origin;

  std::span<const double> ecg() const { return channels[0]; }
  SegmentTriple triple() const { return {channels[0], channels[1], channels[2]}; }
  bool has_eeg() const { return !channels[1].empty() && !channels[2].empty(); }
};

inline Example preprocess_window(const LabeledWindow& w) {
  Example e;
  e.label = w.label;
  e.origin = w.origin;
  for (std::size_t c = 0; c < kNumChannels; ++c)
    if (!w.channels[c].empty()) e.channels[c] = preprocess_pipeline(w.channels[c]).samples;
  return e;
}

inline std::vector<Example> preprocess_windows(const std::vector<LabeledWindow>& ws) {
  std::vector<Example> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(preprocess_window(w));
  return out;
}

/// Balanced training pool plus the (already balanced) validation and test sets.
struct PreparedData {
  std::vector<Example> train, validation, test;
};

inline PreparedData prepare_data(const DatasetSplit& split, std::uint64_t seed) {
  PreparedData d;
  d.train = preprocess_windows(undersample(split.train, seed));
  d.validation = preprocess_windows(split.validation);
  d.test = preprocess_windows(split.test);
  return d;
}

// ---------------------------------------------------------------------------
// Distillation loss

/// Mean over the L components of the squared feature difference.
inline double distill_loss(std::span<const double> z_student, std::span<const double> z_teacher) {
  if (z_student.size() != z_teacher.size() || z_student.empty())
    throw InvariantError("distill", "feature maps differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < z_student.size(); ++i) {
    const double d = z_student[i] - z_teacher[i];
    acc += d * d;
  }
  return acc / static_cast<double>(z_student.size());
}

/// distill_loss(extract(x), z_teacher); accumulates extractor gradients when `grad` is given.
inline double distill_sample_loss(const FeatureExtractor& student, std::span<const double> x,
                                  std::span<const double> z_teacher, FeatureExtractor* grad = nullptr) {
  ExtractorCache cache;
  const FeatureMap z = extract_features(student, x, grad ? &cache : nullptr);
  const double loss = distill_loss(z, z_teacher);
  if (grad) {
    std::vector<double> dz(z.size());
    const double scale = 2.0 / static_cast<double>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] = scale * (z[i] - z_teacher[i]);
    extractor_backward(student, cache, dz, *grad);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Evaluation

template <typename Predict>
MetricsReport evaluate_with(std::span<const Example> data, Predict&& predict) {
  std::vector<Label> pred, truth;
  pred.reserve(data.size());
  truth.reserve(data.size());
  for (const auto& e : data) {
    pred.push_back(predict_label(predict(e)));
    truth.push_back(e.label);
  }
  return MetricsReport::from(confusion(pred, truth));
}

inline MetricsReport evaluate_teacher(const TeacherModel& t, std::span<const Example> data) {
  return evaluate_with(data, [&](const Example& e) { return teacher_forward(t, e.triple()); });
}

inline MetricsReport evaluate_classifier(const StudentModel& m, std::span<const Example> data) {
  return evaluate_with(data, [&](const Example& e) { return student_forward(m, e.ecg()); });
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-5;
  std::size_t max_iterations = 10000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 50;
  std::size_t patience = 20;  // evaluations without a validation Gmean improvement

  void validate() const {
    if (batch_size == 0 || max_iterations == 0 || eval_every == 0 || patience == 0 || !(learning_rate > 0.0))
      throw InvariantError("distill", "training configuration values must be positive");
  }
};

struct EvalRecord {
  std::size_t iteration = 0;
  double loss = 0.0;  // mean mini-batch loss since the previous record
  MetricsReport validation;
};

struct TrainReport {
  std::vector<double> loss_trace;  // per iteration
  std::vector<EvalRecord> evaluations;
  std::size_t best_iteration = 0;
  MetricsReport best_validation;
  double initial_loss = 0.0, final_loss = 0.0;                  // monitor subset of the training pool
  double initial_heldout_loss = 0.0, final_heldout_loss = 0.0;  // validation set
  double wall_clock_s = 0.0;

  void write_jsonl(std::ostream& out) const {
    for (const auto& e : evaluations) {
      nlohmann::json j = {{"iteration", e.iteration},
                          {"loss", e.loss},
                          {"val_sen", e.validation.sen},
                          {"val_spe", e.validation.spe},
                          {"val_gmean", e.validation.gmean}};
      out << j.dump() << '\n';
    }
  }
};

namespace detail {

inline std::vector<std::size_t> monitor_subset(std::size_t n, std::uint64_t seed, std::size_t cap = 256) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= cap) return all;
  std::vector<std::size_t> pick;
  std::mt19937_64 rng(derive_seed(seed, "monitor"));
  std::sample(all.begin(), all.end(), std::back_inserter(pick), cap, rng);
  return pick;
}

/**
 * Adam over `model` with mini-batches drawn from a shuffled pool of
 * `pool_size` samples. `sample_loss(model, index, grad*)` returns one
 * sample's loss and accumulates its gradient; `validate(model)` scores the
 * current iterate. The iterate with the best validation Gmean is kept.
 */
template <typename Model, typename SampleLoss, typename Validate>
TrainReport run_training(Model& model, std::size_t pool_size, const TrainConfig& cfg, std::string_view stream,
                         SampleLoss&& sample_loss, Validate&& validate) {
  cfg.validate();
  if (pool_size == 0) throw InvariantError("distill", "empty training pool");
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport rep;
  const auto monitor = monitor_subset(pool_size, derive_seed(cfg.seed, stream));
  auto monitor_loss = [&](const Model& m) {
    double s = 0.0;
    for (std::size_t i : monitor) s += sample_loss(m, i, nullptr);
    return s / static_cast<double>(monitor.size());
  };
  rep.initial_loss = monitor_loss(model);

  AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  std::mt19937_64 rng(derive_seed(cfg.seed, stream, 1));
  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = pool_size;

  Model best = model;
  double best_gmean = -1.0, best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  double loss_since_eval = 0.0;
  std::size_t iters_since_eval = 0;

  auto evaluate = [&](std::size_t it) {
    EvalRecord r;
    r.iteration = it;
    r.loss = iters_since_eval ? loss_since_eval / static_cast<double>(iters_since_eval) : rep.initial_loss;
    r.validation = validate(model);
    rep.evaluations.push_back(r);
    loss_since_eval = 0.0;
    iters_since_eval = 0;
    // Ties on Gmean go to the lower running training loss.
    if (r.validation.gmean > best_gmean || (r.validation.gmean == best_gmean && r.loss < best_loss)) {
      best_gmean = r.validation.gmean;
      best_loss = r.loss;
      best = model;
      rep.best_iteration = it;
      rep.best_validation = r.validation;
      stale = 0;
    } else {
      ++stale;
    }
  };

  evaluate(0);
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    Model grad = zeros_like(model);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == pool_size) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch_loss += sample_loss(model, order[cursor++], &grad);
    }
    batch_loss /= static_cast<double>(cfg.batch_size);
    if (!std::isfinite(batch_loss))
      throw NumericalError("distill", std::string(stream) + ": non-finite loss at iteration " + std::to_string(it));
    Model scaled = zeros_like(model);
    accumulate_parameters(scaled, grad, 1.0 / static_cast<double>(cfg.batch_size));
    adam_step(model, scaled, adam);

    rep.loss_trace.push_back(batch_loss);
    loss_since_eval += batch_loss;
    ++iters_since_eval;
    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      evaluate(it);
      if (stale >= cfg.patience) break;
    }
  }

  model = std::move(best);
  rep.final_loss = monitor_loss(model);
  rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline void require_balanced(std::span<const Example> pool) {
  std::array<std::size_t, 2> n{};
  for (const auto& e : pool) ++n[class_index(e.label)];
  if (n[0] != n[1] || n[0] == 0)
    throw InvariantError("distill", "training pool must be class-balanced (got " + std::to_string(n[1]) +
                                        " seizure / " + std::to_string(n[0]) + " non-seizure)");
}

}  // namespace detail

struct TeacherResult {
  TeacherModel model;
  TrainReport report;
};

struct StudentResult {
  StudentModel model;
  TrainReport report;
};

inline TeacherResult train_teacher(const PreparedData& data, const TrainConfig& cfg,
                                   const Res1DCNNConfig& net = Res1DCNNConfig::default_config()) {
  detail::require_balanced(data.train);
  for (const auto* set : {&data.train, &data.validation})
    for (const auto& e : *set)
      if (!e.has_eeg() || e.channels[0].empty()) throw InvariantError("distill", "teacher training needs ECG, EEG1 and EEG2");

  TeacherResult res{build_teacher(net, derive_seed(cfg.seed, "teacher")), {}};
  auto heldout = [&](const TeacherModel& t) {
    double s = 0.0;
    for (const auto& e : data.validation) s += teacher_loss(t, e.triple(), e.label);
    return data.validation.empty() ? 0.0 : s / static_cast<double>(data.validation.size());
  };
  const double h0 = heldout(res.model);
  res.report = detail::run_training(
      res.model, data.train.size(), cfg, "teacher",
      [&](const TeacherModel& t, std::size_t i, TeacherModel* g) {
        return teacher_loss(t, data.train[i].triple(), data.train[i].label, g);
      },
      [&](const TeacherModel& t) { return evaluate_teacher(t, data.validation); });
  res.report.initial_heldout_loss = h0;
  res.report.final_heldout_loss = heldout(res.model);
  res.model.trained = true;
  return res;
}

/**
 * Fits a fresh ECG extractor to the frozen teacher's fused feature maps. The
 * student head is the teacher head, copied verbatim and never updated. EEG is
 * required here to compute the targets; the resulting student reads ECG only.
 */
inline StudentResult train_student(const TeacherModel& teacher, const PreparedData& data, const TrainConfig& cfg,
                                   const Res1DCNNConfig& net) {
  if (!teacher.trained) throw InvariantError("distill", "teacher has not been trained");
  {
    // Only the init fields may differ; they are not stored in model files.
    auto a = net, b = teacher.config();
    a.init_std = b.init_std;
    a.fan_in_init = b.fan_in_init;
    if (a != b) throw InvariantError("distill", "student topology must match the teacher branches");
  }
  detail::require_balanced(data.train);
  for (const auto* set : {&data.train, &data.validation})
    for (const auto& e : *set)
      if (!e.has_eeg()) throw InvariantError("distill", "distillation needs synchronized EEG to compute teacher features");

  auto targets = [&](const std::vector<Example>& xs) {
    std::vector<FeatureMap> z;
    z.reserve(xs.size());
    for (const auto& e : xs) z.push_back(teacher_features(teacher, e.triple()));
    return z;
  };
  const auto z_train = targets(data.train);
  const auto z_val = targets(data.validation);

  StudentResult res;
  std::mt19937_64 rng(derive_seed(cfg.seed, "student"));
  res.model.extractor = build_extractor(net, rng);
  res.model.head = teacher.head;

  auto heldout = [&](const FeatureExtractor& ex) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.validation.size(); ++i)
      s += distill_sample_loss(ex, data.validation[i].ecg(), z_val[i]);
    return data.validation.empty() ? 0.0 : s / static_cast<double>(data.validation.size());
  };
  const double h0 = heldout(res.model.extractor);
  const DenseLayer& head = teacher.head;
  res.report = detail::run_training(
      res.model.extractor, data.train.size(), cfg, "student",
      [&](const FeatureExtractor& ex, std::size_t i, FeatureExtractor* g) {
        return distill_sample_loss(ex, data.train[i].ecg(), z_train[i], g);
      },
      [&](const FeatureExtractor& ex) {
        return evaluate_with(data.validation, [&](const Example& e) { return classify(head, extract_features(ex, e.ecg())); });
      });
  res.report.initial_heldout_loss = h0;
  res.report.final_heldout_loss = heldout(res.model.extractor);
  return res;
}

/// Student initialized the way the teacher's own config says.
inline StudentResult train_student(const TeacherModel& teacher, const PreparedData& data, const TrainConfig& cfg) {
  return train_student(teacher, data, cfg, teacher.config());
}

/// Single Res1DCNN trained with cross-entropy on ECG only.
inline StudentResult train_baseline_ecg(const PreparedData& data, const TrainConfig& cfg,
                                        const Res1DCNNConfig& net = Res1DCNNConfig::default_config()) {
  detail::require_balanced(data.train);
  for (const auto& e : data.train)
    if (e.channels[0].empty()) throw InvariantError("distill", "baseline training needs the ECG channel");

  StudentResult res{build_res1dcnn(net, derive_seed(cfg.seed, "baseline")), {}};
  auto heldout = [&](const StudentModel& m) {
    double s = 0.0;
    for (const auto& e : data.validation) s += classifier_loss(m, e.ecg(), e.label);
    return data.validation.empty() ? 0.0 : s / static_cast<double>(data.validation.size());
  };
  const double h0 = heldout(res.model);
  res.report = detail::run_training(
      res.model, data.train.size(), cfg, "baseline",
      [&](const StudentModel& m, std::size_t i, StudentModel* g) {
        return classifier_loss(m, data.train[i].ecg(), data.train[i].label, g);
      },
      [&](const StudentModel& m) { return evaluate_classifier(m, data.validation); });
  res.report.initial_heldout_loss = h0;
  res.report.final_heldout_loss = heldout(res.model);
  return res;
}

}  // namespace seizurekd
