// seizurekd command-line tool. Every subcommand prints a JSON report on stdout;
// progress goes to stderr one line at a time.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "seizurekd/seizurekd.hpp"

using namespace seizurekd;
namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) { std::cerr << "[seizurekd] " << msg << std::endl; }

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw IoError("cli", "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

PreparedData load_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path, "cli")); }

struct TrainFlags {
  std::size_t iterations = 1000, batch = 16, eval_every = 50, patience = 20;
  double lr = 1e-3;
  std::string width = "default";
  std::string log;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "maximum training iterations")->capture_default_str();
    app->add_option("--batch", batch, "mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--eval-every", eval_every, "iterations between validation passes")->capture_default_str();
    app->add_option("--patience", patience, "evaluations without improvement before stopping")->capture_default_str();
    app->add_option("--width", width, "network width")->check(CLI::IsMember({"default", "reduced"}))->capture_default_str();
    app->add_option("--log", log, "training log (JSON lines)");
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig tc;
    tc.max_iterations = iterations;
    tc.batch_size = batch;
    tc.learning_rate = lr;
    tc.eval_every = eval_every;
    tc.patience = patience;
    tc.seed = derive_seed(seed, "train");
    return tc;
  }

  Res1DCNNConfig net() const {
    auto n = width == "reduced" ? Res1DCNNConfig::reduced(kWindowLength) : Res1DCNNConfig::default_config();
    n.fan_in_init = true;
    return n;
  }

  void write_log(const TrainReport& r) const {
    if (log.empty()) return;
    std::ofstream out(log);
    if (!out) throw IoError("cli", "cannot write '" + log + "'");
    r.write_jsonl(out);
  }
};

nlohmann::json train_summary(const TrainReport& r) {
  return {{"best_iteration", r.best_iteration},
          {"iterations_run", r.loss_trace.size()},
          {"best_validation", r.best_validation.to_json()},
          {"initial_loss", r.initial_loss},
          {"final_loss", r.final_loss},
          {"initial_heldout_loss", r.initial_heldout_loss},
          {"final_heldout_loss", r.final_heldout_loss},
          {"wall_clock_s", r.wall_clock_s}};
}

// ---------------------------------------------------------------------------
// reproduce-tables

struct TableRow {
  std::string what;
  double got, want, tol;
};

nlohmann::json reproduce_tables(bool& all_pass) {
  const auto b = MetricsReport::from({634, 150, 160, 624});
  const auto t = MetricsReport::from({682, 102, 34, 750});
  const auto s = MetricsReport::from({671, 113, 44, 740});
  const auto tb = MetricDeltas::between(b, t);
  std::vector<TableRow> rows = {
      {"baseline sen", 100 * b.sen, 80.87, 0.01},          {"baseline spe", 100 * b.spe, 79.59, 0.01},
      {"teacher sen", 100 * t.sen, 86.99, 0.01},           {"teacher spe", 100 * t.spe, 95.66, 0.01},
      {"teacher gmean", 100 * t.gmean, 91.22, 0.01},       {"teacher f1", 100 * t.f1, 90.93, 0.01},
      {"student sen", 100 * s.sen, 85.59, 0.01},           {"student spe", 100 * s.spe, 94.39, 0.01},
      {"teacher-baseline d_sen", 100 * tb.sen, 6.12, 0.01}, {"teacher-baseline d_spe", 100 * tb.spe, 16.07, 0.01},
      {"teacher-student gmean gap", 100 * (t.gmean - s.gmean), 1.35, 0.05},
  };
  rows.push_back({"pulp battery life h", battery_life(builtin_profile("pulp")).hours, 91.33, 0.01 * 91.33});
  for (const auto& [name, h] : {std::pair{"raspberry-pi-zero", 7.86}, {"raspberry-pi-zero-teacher", 5.71}, {"kendryte-k210", 16.29}})
    rows.push_back({std::string(name) + " battery life h", battery_life(builtin_profile(name)).hours, h, 0.005 * h});

  all_pass = true;
  nlohmann::json out = nlohmann::json::array();
  std::cout << std::left << std::setw(42) << "quantity" << std::right << std::setw(10) << "computed" << std::setw(10)
            << "published" << "  result\n";
  for (const auto& r : rows) {
    const bool ok = std::abs(r.got - r.want) <= r.tol;
    all_pass = all_pass && ok;
    std::cout << std::left << std::setw(42) << r.what << std::right << std::fixed << std::setprecision(2)
              << std::setw(10) << r.got << std::setw(10) << r.want << "  " << (ok ? "PASS" : "FAIL") << '\n';
    out.push_back({{"quantity", r.what}, {"computed", r.got}, {"published", r.want}, {"tolerance", r.tol}, {"pass", ok}});
  }
  // The energy saving headline does not follow from the table averages; report what the model gives.
  const double saving = compare_energy(battery_life(builtin_profile("raspberry-pi-zero")),
                                       battery_life(builtin_profile("raspberry-pi-zero-teacher")));
  std::cout << "raspberry-pi-zero student vs teacher energy saving: " << 100.0 * saving
            << " % (published headline 37.65 %)\n" << std::defaultfloat << std::setprecision(6);
  return {{"rows", out}, {"energy_saving_student_vs_teacher", saving}, {"all_pass", all_pass}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seizure detection with a distilled ECG-only network"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file (key = value, [subcommand] sections); flags override it");
  std::uint64_t seed = 1;
  std::string report_path;
  app.add_option("--seed", seed, "master seed for every stochastic component")->capture_default_str();
  app.add_option("--report", report_path, "also write the JSON report to this file");

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic ECG/EEG records");
  std::string synth_out, synth_format = "bsr";
  SynthCorpusConfig corpus;
  corpus.records = 4;
  std::vector<std::pair<double, double>> seizures;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--records", corpus.records, "number of records")->capture_default_str();
  synth->add_option("--duration", corpus.duration_s, "seconds per record")->capture_default_str();
  synth->add_option("--noise", corpus.noise_level, "noise level")->capture_default_str();
  synth->add_option("--seizure", seizures, "seizure interval START END in seconds (repeatable)");
  synth->add_option("--format", synth_format, "file format")->check(CLI::IsMember({"bsr", "csv"}))->capture_default_str();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "window, label, split, filter and standardize records");
  std::string prep_in, prep_out;
  SplitPolicy policy{100, 200};
  double threshold = kDefaultSeizureOverlap;
  prep->add_option("--records", prep_in, "directory of .bsr/.csv records")->required();
  prep->add_option("--out", prep_out, "dataset file")->required();
  prep->add_option("--val-per-class", policy.validation_per_class)->capture_default_str();
  prep->add_option("--test-per-class", policy.test_per_class)->capture_default_str();
  prep->add_option("--threshold", threshold, "seizure overlap fraction for a positive label")->capture_default_str();

  // training subcommands
  std::string data_path, model_out, teacher_path;
  TrainFlags tf;
  auto* tteacher = app.add_subcommand("train-teacher", "train the three-branch ECG+EEG teacher");
  auto* distill = app.add_subcommand("distill", "distill the teacher into an ECG-only student");
  auto* tbase = app.add_subcommand("train-baseline", "train an ECG-only network on labels");
  for (auto* sc : {tteacher, distill, tbase}) {
    sc->add_option("--data", data_path, "dataset file")->required();
    sc->add_option("--out", model_out, "model file")->required();
    tf.add(sc);
  }
  distill->add_option("--teacher", teacher_path, "trained teacher model")->required();

  // quantize
  auto* quant = app.add_subcommand("quantize", "convert a float classifier to Q2.13");
  std::string quant_in;
  double headroom = 0.5;
  bool no_calibrate = false;
  quant->add_option("--model", quant_in, "float classifier")->required();
  quant->add_option("--out", model_out, "quantized model file")->required();
  quant->add_option("--data", data_path, "dataset: calibrate on train, evaluate on test");
  quant->add_option("--headroom", headroom, "fraction of the Q2.13 range the peak activation may use")->capture_default_str();
  quant->add_flag("--no-calibrate", no_calibrate, "quantize the weights as they are");

  // eval
  auto* eval = app.add_subcommand("eval", "test-set metrics of any model file");
  std::string eval_model, eval_split = "test";
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", data_path)->required();
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "validation", "test"}))->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "battery life, MAC counts and host latency");
  std::vector<std::string> profiles{"raspberry-pi-zero", "raspberry-pi-zero-teacher", "kendryte-k210", "pulp"};
  std::vector<std::string> profile_files;
  std::string bench_teacher, bench_student;
  std::size_t bench_reps = 3, bench_segments = 100;
  bench->add_option("--profile", profiles, "built-in profile names")->capture_default_str();
  bench->add_option("--profile-file", profile_files, "key-value profile files")->check(CLI::ExistingFile);
  bench->add_option("--teacher", bench_teacher, "teacher model to time");
  bench->add_option("--student", bench_student, "student model to time");
  bench->add_option("--data", data_path, "dataset whose test windows are timed");
  bench->add_option("--repetitions", bench_reps)->capture_default_str();
  bench->add_option("--segments", bench_segments)->capture_default_str();

  auto* tables = app.add_subcommand("reproduce-tables", "recompute the published metrics and battery lives");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    nlohmann::json report;
    int status = 0;

    if (*synth) {
      if (!seizures.empty()) {
        corpus.seizure_intervals.clear();
        for (const auto& [a, b] : seizures) corpus.seizure_intervals.push_back({a, b});
      }
      fs::create_directories(synth_out);
      nlohmann::json files = nlohmann::json::array();
      for (std::size_t r = 0; r < corpus.records; ++r) {
        SynthConfig c;
        c.duration_s = corpus.duration_s;
        c.seizure_intervals = corpus.seizure_intervals;
        c.noise_level = corpus.noise_level;
        c.seed = derive_seed(derive_seed(seed, "corpus"), "synth-record", r);
        c.patient_id = "synth" + std::to_string(r);
        const auto rec = synth_record(c);
        const auto path = fs::path(synth_out) / (c.patient_id + (synth_format == "bsr" ? ".bsr" : ".csv"));
        save_record(rec, path, synth_format == "bsr" ? RecordFormat::binary : RecordFormat::csv);
        files.push_back(path.string());
      }
      log_line("wrote " + std::to_string(corpus.records) + " records to " + synth_out);
      report = {{"records", files}, {"duration_s", corpus.duration_s}, {"seed", seed}};
    } else if (*prep) {
      std::vector<LabeledWindow> all;
      for (const auto& r : load_record_directory(prep_in)) {
        auto w = make_windows(r, threshold);
        std::move(w.begin(), w.end(), std::back_inserter(all));
      }
      const auto data = prepare_data(split_dataset(all, policy, seed), seed);
      write_file_bytes(prep_out, encode_dataset(data), "cli");
      auto counts = [](const std::vector<Example>& v) {
        const auto c = class_counts(v);
        return nlohmann::json{{"non_seizure", c[0]}, {"seizure", c[1]}};
      };
      const auto raw = class_counts(all);
      report = {{"windows", {{"non_seizure", raw[0]}, {"seizure", raw[1]}}},
                {"train", counts(data.train)},
                {"validation", counts(data.validation)},
                {"test", counts(data.test)},
                {"dataset", prep_out}};
      log_line("wrote " + prep_out);
    } else if (*tteacher) {
      const auto data = load_dataset(data_path);
      const auto res = train_teacher(data, tf.config(seed), tf.net());
      save_model(model_out, res.model);
      tf.write_log(res.report);
      report = {{"training", train_summary(res.report)}, {"test", evaluate_teacher(res.model, data.test).to_json()}};
    } else if (*distill) {
      const auto data = load_dataset(data_path);
      const auto teacher = decode_teacher(read_file_bytes(teacher_path, "cli"));
      auto net = teacher.config();  // topology comes from the teacher, init from the flags
      net.fan_in_init = true;
      const auto res = train_student(teacher, data, tf.config(seed), net);
      save_model(model_out, res.model);
      tf.write_log(res.report);
      report = {{"training", train_summary(res.report)},
                {"test", evaluate_classifier(res.model, data.test).to_json()},
                {"teacher_test", evaluate_teacher(teacher, data.test).to_json()}};
    } else if (*tbase) {
      const auto data = load_dataset(data_path);
      const auto res = train_baseline_ecg(data, tf.config(seed), tf.net());
      save_model(model_out, res.model);
      tf.write_log(res.report);
      report = {{"training", train_summary(res.report)}, {"test", evaluate_classifier(res.model, data.test).to_json()}};
    } else if (*quant) {
      const auto model = decode_classifier(read_file_bytes(quant_in, "cli"));
      StudentModel to_quantize = model;
      std::optional<PreparedData> data;
      if (!data_path.empty()) data = load_dataset(data_path);
      if (!no_calibrate) {
        if (!data) throw UsageError("cli", "calibration needs --data (or pass --no-calibrate)");
        const auto cal = calibrate_range(model, data->train, kFracBits, headroom);
        to_quantize = cal.model;
        report["calibration"] = {{"shift", cal.shift}, {"max_activation", cal.max_activation}, {"headroom", headroom}};
      }
      std::vector<SaturationWarning> warnings;
      const auto q = quantize_model(to_quantize, kFracBits, &warnings);
      save_model(model_out, q);
      report["payload_bytes"] = {{"float64", parameter_payload_bytes(model, Precision::float64)},
                                 {"q2_13", parameter_payload_bytes(q, Precision::q2_13)}};
      nlohmann::json w = nlohmann::json::array();
      for (const auto& s : warnings) {
        w.push_back({{"layer", s.layer}, {"count", s.count}});
        log_line("saturation in " + s.layer + ": " + std::to_string(s.count) + " parameters");
      }
      report["saturation_warnings"] = w;
      if (data) {
        const auto d = accuracy_drop(to_quantize, q, data->test);
        report["float"] = d.float_metrics.to_json();
        report["quantized"] = d.quantized_metrics.to_json();
        report["delta"] = d.delta.to_json();
      }
    } else if (*eval) {
      const auto bytes = read_file_bytes(eval_model, "cli");
      const auto data = load_dataset(data_path);
      const auto& set = eval_split == "train" ? data.train : eval_split == "validation" ? data.validation : data.test;
      MetricsReport m;
      switch (peek_model_kind(bytes)) {
        case ModelKind::teacher:
          m = evaluate_teacher(decode_teacher(bytes), set);
          report["kind"] = "teacher";
          break;
        case ModelKind::classifier:
          m = evaluate_classifier(decode_classifier(bytes), set);
          report["kind"] = "classifier";
          break;
        case ModelKind::quantized:
          m = evaluate_quantized(decode_quantized(bytes), set);
          report["kind"] = "quantized";
          break;
      }
      report["split"] = eval_split;
      report["metrics"] = m.to_json();
    } else if (*bench) {
      nlohmann::json energy = nlohmann::json::array();
      std::map<std::string, EnergyReport> by_name;
      auto add = [&](const PlatformProfile& p) {
        const auto r = battery_life(p);
        by_name[p.name] = r;
        energy.push_back({{"profile", p.to_json()}, {"energy", r.to_json()}});
      };
      for (const auto& n : profiles) add(builtin_profile(n));
      for (const auto& f : profile_files) add(PlatformProfile::from_kv(KeyValueFile::load(f, "bench")));
      report["energy"] = energy;
      if (by_name.count("raspberry-pi-zero") && by_name.count("raspberry-pi-zero-teacher"))
        report["energy_saving_student_vs_teacher"] =
            compare_energy(by_name["raspberry-pi-zero"], by_name["raspberry-pi-zero-teacher"]);

      if (!bench_teacher.empty() || !bench_student.empty()) {
        if (data_path.empty()) throw UsageError("cli", "timing needs --data");
        const auto data = load_dataset(data_path);
        const std::size_t n = std::min(bench_segments, data.test.size());
        std::optional<TeacherModel> t;
        std::optional<StudentModel> s;
        if (!bench_teacher.empty()) {
          t = decode_teacher(read_file_bytes(bench_teacher, "cli"));
          std::vector<SegmentTriple> x;
          for (std::size_t i = 0; i < n; ++i) x.push_back(data.test[i].triple());
          report["teacher_timing"] = time_inference<SegmentTriple>("teacher", x, bench_reps, [&](const SegmentTriple& v) {
                                       return teacher_forward(*t, v);
                                     }).to_json();
          report["teacher_macs"] = flop_count(*t);
        }
        if (!bench_student.empty()) {
          s = decode_classifier(read_file_bytes(bench_student, "cli"));
          std::vector<std::span<const double>> x;
          for (std::size_t i = 0; i < n; ++i) x.push_back(data.test[i].ecg());
          report["student_timing"] = time_inference<std::span<const double>>("student", x, bench_reps,
                                                                             [&](std::span<const double> v) {
                                                                               return student_forward(*s, v);
                                                                             })
                                         .to_json();
          report["student_macs"] = flop_count(*s);
        }
        if (t && s) {
          report["mac_ratio"] = static_cast<double>(flop_count(*t)) / static_cast<double>(flop_count(*s));
          report["latency_ratio"] =
              report["teacher_timing"]["mean_ms"].get<double>() / report["student_timing"]["mean_ms"].get<double>();
        }
      }
    } else if (*tables) {
      bool ok = false;
      report = reproduce_tables(ok);
      status = ok ? 0 : static_cast<int>(ErrorKind::invariant);
    }

    if (!*tables) std::cout << report.dump(2) << '\n';
    write_json(report, report_path);
    return status;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: cli: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::invariant);
  }
}
