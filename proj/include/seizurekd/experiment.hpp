// SPDX-License-Identifier: Apache-2.0
// End-to-end desk run on the synthetic corpus: teacher, student,
// ECG baseline, calibrated Q2.13 deployment.
#pragma once

#include <chrono>

#include "seizurekd/distill.hpp"
#include "seizurekd/quant.hpp"

namespace seizurekd {

struct DeskRecipe {
  SynthCorpusConfig corpus;
  SplitPolicy split{100, 200};
  std::uint64_t seed = 1;
  Res1DCNNConfig net = [] {
    auto n = Res1DCNNConfig::default_config();
    n.fan_in_init = true;
    return n;
  }();
  TrainConfig teacher = make_train(200);
  TrainConfig student = make_train(2000);  // baseline gets the same budget
  double calibration_headroom = 0.5;

  static TrainConfig make_train(std::size_t iters) {
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.max_iterations = iters;
    return tc;
  }
};

struct DeskResult {
  PreparedData data;
  TeacherResult teacher;
  StudentResult student, baseline;
  Calibration calibration;
  QuantizedModel quantized;
  MetricsReport teacher_test, student_test, baseline_test, quantized_test;
  std::vector<SweepPoint> sweep, sweep_uncalibrated;  // deployed (calibrated) and raw student
  double wall_clock_s = 0.0;

  // Everything except wall-clock times, so two runs can be compared byte for byte.
  nlohmann::json to_json() const {
    auto sweep_json = [](const std::vector<SweepPoint>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& p : v)
        a.push_back({{"frac_bits", p.frac_bits}, {"accuracy", p.accuracy}, {"saturations", p.saturations}});
      return a;
    };
    return {{"teacher", teacher_test.to_json()},
            {"student", student_test.to_json()},
            {"baseline", baseline_test.to_json()},
            {"quantized", quantized_test.to_json()},
            {"quantization_delta", MetricDeltas::between(student_test, quantized_test).to_json()},
            {"calibration_shift", calibration.shift},
            {"calibration_max_activation", calibration.max_activation},
            {"teacher_best_iteration", teacher.report.best_iteration},
            {"student_best_iteration", student.report.best_iteration},
            {"baseline_best_iteration", baseline.report.best_iteration},
            {"sweep", sweep_json(sweep)},
            {"sweep_uncalibrated", sweep_json(sweep_uncalibrated)},
            {"split", {{"train", data.train.size()}, {"validation", data.validation.size()}, {"test", data.test.size()}}}};
  }
};

inline DeskResult run_desk_experiment(const DeskRecipe& r) {
  const auto t0 = std::chrono::steady_clock::now();
  DeskResult out;
  auto corpus = r.corpus;
  corpus.seed = derive_seed(r.seed, "corpus");
  out.data = prepare_data(split_dataset(synth_corpus(corpus), r.split, r.seed), r.seed);

  auto tc = r.teacher, sc = r.student;
  tc.seed = derive_seed(r.seed, "train");
  sc.seed = tc.seed;
  out.teacher = train_teacher(out.data, tc, r.net);
  out.student = train_student(out.teacher.model, out.data, sc, r.net);
  out.baseline = train_baseline_ecg(out.data, sc, r.net);

  out.teacher_test = evaluate_teacher(out.teacher.model, out.data.test);
  out.student_test = evaluate_classifier(out.student.model, out.data.test);
  out.baseline_test = evaluate_classifier(out.baseline.model, out.data.test);

  out.calibration = calibrate_range(out.student.model, out.data.train, kFracBits, r.calibration_headroom);
  out.quantized = quantize_model(out.calibration.model, kFracBits);
  out.quantized_test = evaluate_quantized(out.quantized, out.data.test);
  out.sweep = fractional_bit_sweep(out.calibration.model, out.data.test);
  out.sweep_uncalibrated = fractional_bit_sweep(out.student.model, out.data.test);
  out.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace seizurekd
