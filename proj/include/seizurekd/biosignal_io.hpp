// SPDX-License-Identifier: Apache-2.0
// Synchronized ECG/EEG recordings: BSR1 and CSV I/O, a seeded
// synthetic generator, window labeling, undersampling and
// record-level train/validation/test splitting.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seizurekd/common.hpp"
#include "seizurekd/preprocess.hpp"

namespace seizurekd {

struct SeizureInterval {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;  // exclusive

  std::size_t length() const noexcept { return end_sample - start_sample; }
  bool operator==(const SeizureInterval&) const = default;
};

struct Channel {
  std::string name;
  std::vector<double> samples;
};

enum class RecordErrc {
  malformed_header,
  channel_length_mismatch,
  annotation_out_of_range,
  annotation_order,
  missing_channel,
};

inline std::string_view to_string(RecordErrc e) noexcept {
  switch (e) {
    case RecordErrc::malformed_header: return "malformed header";
    case RecordErrc::channel_length_mismatch: return "channel length mismatch";
    case RecordErrc::annotation_out_of_range: return "annotation out of range";
    case RecordErrc::annotation_order: return "annotations overlap or are unsorted";
    case RecordErrc::missing_channel: return "missing channel";
  }
  return "record error";
}

class RecordError : public Error {
 public:
  RecordError(RecordErrc code, const std::string& detail)
      : Error(code == RecordErrc::malformed_header ? ErrorKind::io : ErrorKind::invariant, "biosignal-io",
              std::string(to_string(code)) + ": " + detail),
        code_(code) {}
  RecordErrc code() const noexcept { return code_; }

 private:
  RecordErrc code_;
};

struct SignalRecord {
  std::uint32_t sample_rate = kSampleRate;
  std::vector<Channel> channels;
  std::vector<SeizureInterval> annotations;
  std::string patient_id;

  std::size_t length() const noexcept { return channels.empty() ? 0 : channels.front().samples.size(); }

  const Channel* find(std::string_view name) const noexcept {
    for (const auto& c : channels)
      if (c.name == name) return &c;
    return nullptr;
  }

  const Channel& channel(std::string_view name) const {
    if (const auto* c = find(name)) return *c;
    throw RecordError(RecordErrc::missing_channel, std::string(name));
  }

  void validate() const {
    for (const auto& c : channels)
      if (c.samples.size() != length())
        throw RecordError(RecordErrc::channel_length_mismatch,
                          c.name + " has " + std::to_string(c.samples.size()) + " samples, expected " +
                              std::to_string(length()));
    std::size_t prev_end = 0;
    for (const auto& a : annotations) {
      if (a.start_sample >= a.end_sample || a.end_sample > length())
        throw RecordError(RecordErrc::annotation_out_of_range,
                          "[" + std::to_string(a.start_sample) + ", " + std::to_string(a.end_sample) +
                              ") on a record of " + std::to_string(length()) + " samples");
      if (a.start_sample < prev_end)
        throw RecordError(RecordErrc::annotation_order, "interval starting at " + std::to_string(a.start_sample));
      prev_end = a.end_sample;
    }
  }
};

// ---------------------------------------------------------------------------
// BSR1 binary format

inline constexpr char kBsrMagic[4] = {'B', 'S', 'R', '1'};
inline constexpr std::uint16_t kBsrVersion = 1;

inline std::vector<std::uint8_t> encode_bsr1(const SignalRecord& r) {
  r.validate();
  ByteWriter w;
  w.raw({kBsrMagic, 4});
  w.u16(kBsrVersion);
  w.u32(r.sample_rate);
  w.u8(static_cast<std::uint8_t>(r.channels.size()));
  for (const auto& c : r.channels) {
    w.u8(static_cast<std::uint8_t>(c.name.size()));
    w.raw(c.name);
    w.u64(c.samples.size());
    for (double v : c.samples) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(r.annotations.size()));
  for (const auto& a : r.annotations) {
    w.u64(a.start_sample);
    w.u64(a.end_sample);
  }
  return std::move(w).bytes();
}

inline SignalRecord decode_bsr1(const std::vector<std::uint8_t>& bytes, std::string patient_id = {}) {
  ByteReader rd(bytes, "biosignal-io");
  SignalRecord r;
  r.patient_id = std::move(patient_id);
  try {
    if (rd.raw(4) != std::string_view(kBsrMagic, 4))
      throw RecordError(RecordErrc::malformed_header, "bad magic");
    if (auto v = rd.u16(); v != kBsrVersion)
      throw RecordError(RecordErrc::malformed_header, "unsupported version " + std::to_string(v));
    r.sample_rate = rd.u32();
    if (r.sample_rate != kSampleRate)
      throw RecordError(RecordErrc::malformed_header, "sample rate " + std::to_string(r.sample_rate) +
                                                          " (expected " + std::to_string(kSampleRate) + ")");
    const std::size_t nch = rd.u8();
    for (std::size_t i = 0; i < nch; ++i) {
      Channel c;
      c.name = rd.raw(rd.u8());
      const std::uint64_t n = rd.u64();
      if (n > rd.remaining() / 8) throw RecordError(RecordErrc::malformed_header, "channel " + c.name + " truncated");
      c.samples.resize(n);
      for (auto& v : c.samples) v = rd.f64();
      r.channels.push_back(std::move(c));
    }
    const std::uint32_t na = rd.u32();
    for (std::uint32_t i = 0; i < na; ++i) {
      SeizureInterval a;
      a.start_sample = rd.u64();
      a.end_sample = rd.u64();
      r.annotations.push_back(a);
    }
  } catch (const IoError& e) {
    throw RecordError(RecordErrc::malformed_header, e.what());
  }
  if (rd.remaining() != 0) throw RecordError(RecordErrc::malformed_header, "trailing bytes");
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// CSV: `t,ecg,eeg1,eeg2` plus a sibling `<stem>.ann.csv` of `start_sample,end_sample` lines.

enum class RecordFormat { binary, csv };

inline std::filesystem::path annotation_path_for(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".ann.csv");
  return p;
}

inline void write_csv(const SignalRecord& r, std::ostream& data, std::ostream& ann) {
  r.validate();
  const auto& ecg = r.channel("ECG").samples;
  const auto& e1 = r.channel("EEG1").samples;
  const auto& e2 = r.channel("EEG2").samples;
  data << "t,ecg,eeg1,eeg2\n";
  data.precision(17);
  for (std::size_t i = 0; i < r.length(); ++i)
    data << static_cast<double>(i) / r.sample_rate << ',' << ecg[i] << ',' << e1[i] << ',' << e2[i] << '\n';
  ann << "start_sample,end_sample\n";
  for (const auto& a : r.annotations) ann << a.start_sample << ',' << a.end_sample << '\n';
}

inline SignalRecord read_csv(std::istream& data, std::istream* ann, std::string patient_id = {}) {
  SignalRecord r;
  r.patient_id = std::move(patient_id);
  std::string line;
  if (!std::getline(data, line)) throw RecordError(RecordErrc::malformed_header, "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,ecg,eeg1,eeg2") throw RecordError(RecordErrc::malformed_header, "header '" + line + "'");
  r.channels = {{"ECG", {}}, {"EEG1", {}}, {"EEG2", {}}};
  std::size_t lineno = 1;
  while (std::getline(data, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) {
        vals.push_back(std::nan(""));  // missing value marks a shorter channel
        continue;
      }
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw RecordError(RecordErrc::malformed_header, "line " + std::to_string(lineno) + ": '" + cell + "'");
      }
    }
    if (vals.size() < 2 || vals.size() > 4)
      throw RecordError(RecordErrc::malformed_header, "line " + std::to_string(lineno) + ": wrong column count");
    for (std::size_t c = 1; c < vals.size(); ++c)
      if (!std::isnan(vals[c])) r.channels[c - 1].samples.push_back(vals[c]);
  }
  if (ann) {
    while (std::getline(*ann, line)) {
      if (line.empty() || line == "\r" || line.rfind("start_sample", 0) == 0) continue;
      SeizureInterval a;
      char comma = 0;
      std::stringstream ss(line);
      if (!(ss >> a.start_sample >> comma >> a.end_sample) || comma != ',')
        throw RecordError(RecordErrc::malformed_header, "annotation line '" + line + "'");
      r.annotations.push_back(a);
    }
  }
  r.validate();
  return r;
}

inline void save_record(const SignalRecord& r, const std::filesystem::path& path,
                        RecordFormat format = RecordFormat::binary) {
  if (format == RecordFormat::binary) {
    write_file_bytes(path.string(), encode_bsr1(r), "biosignal-io");
    return;
  }
  std::ofstream data(path), ann(annotation_path_for(path));
  if (!data || !ann) throw IoError("biosignal-io", "cannot write '" + path.string() + "'");
  write_csv(r, data, ann);
}

inline SignalRecord load_record(const std::filesystem::path& path, RecordFormat format = RecordFormat::binary) {
  if (!std::filesystem::exists(path)) throw IoError("biosignal-io", "no such file '" + path.string() + "'");
  const std::string id = path.stem().string();
  if (format == RecordFormat::binary) return decode_bsr1(read_file_bytes(path.string(), "biosignal-io"), id);
  std::ifstream data(path);
  std::ifstream ann(annotation_path_for(path));
  return read_csv(data, ann ? &ann : nullptr, id);
}

/// Every `*.bsr` / `*.csv` record in a directory, sorted by file name.
inline std::vector<SignalRecord> load_record_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("biosignal-io", "not a directory '" + dir.string() + "'");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto& p = e.path();
    const auto name = p.filename().string();
    if (p.extension() == ".bsr" || (p.extension() == ".csv" && name.find(".ann.csv") == std::string::npos))
      files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  std::vector<SignalRecord> out;
  for (const auto& f : files)
    out.push_back(load_record(f, f.extension() == ".bsr" ? RecordFormat::binary : RecordFormat::csv));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator. ECG is a PQRST pulse train (70 bpm, 120 bpm inside
// seizures); EEG is pink noise with 3 Hz spike-and-wave bursts during seizures.

struct SecondsInterval {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SynthConfig {
  double duration_s = 60.0;
  std::vector<SecondsInterval> seizure_intervals;
  double noise_level = 0.1;
  std::uint64_t seed = 0;
  std::string patient_id = "synth";
  double baseline_bpm = 70.0;
  double seizure_bpm = 120.0;
};

namespace detail {

// Gaussian-bump beat template: (offset s, amplitude, width s).
inline constexpr std::array<std::array<double, 3>, 5> kBeatWaves = {{
    {-0.16, 0.15, 0.025},   // P
    {-0.025, -0.10, 0.008}, // Q
    {0.0, 1.00, 0.010},     // R
    {0.025, -0.25, 0.008},  // S
    {0.25, 0.30, 0.040},    // T
}};

inline bool inside(const std::vector<SeizureInterval>& iv, std::size_t i) {
  for (const auto& a : iv)
    if (i >= a.start_sample && i < a.end_sample) return true;
  return false;
}

}  // namespace detail

inline SignalRecord synth_record(const SynthConfig& cfg) {
  if (!(cfg.duration_s > 0.0)) throw InvariantError("biosignal-io", "duration must be positive");
  const double fs = static_cast<double>(kSampleRate);
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
  if (n == 0) throw InvariantError("biosignal-io", "duration shorter than one sample");

  SignalRecord r;
  r.patient_id = cfg.patient_id;
  for (const auto& s : cfg.seizure_intervals) {
    if (s.start_s < 0.0 || s.end_s <= s.start_s || s.end_s > cfg.duration_s)
      throw InvariantError("biosignal-io", "seizure interval exceeds the record duration");
    r.annotations.push_back({static_cast<std::size_t>(std::llround(s.start_s * fs)),
                             static_cast<std::size_t>(std::llround(s.end_s * fs))});
  }
  std::sort(r.annotations.begin(), r.annotations.end(),
            [](const auto& a, const auto& b) { return a.start_sample < b.start_sample; });

  std::mt19937_64 rng(derive_seed(cfg.seed, "synth"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // ECG
  std::vector<double> ecg(n, 0.0);
  {
    const double hrv_phase = 2.0 * std::numbers::pi * unit(rng);
    const double wander_phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<double> beats;
    double phase = unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double bpm = (detail::inside(r.annotations, i) ? cfg.seizure_bpm : cfg.baseline_bpm) *
                         (1.0 + 0.03 * std::sin(2.0 * std::numbers::pi * 0.1 * t + hrv_phase));
      phase += bpm / 60.0 / fs;
      if (phase >= 1.0) {
        phase -= 1.0;
        beats.push_back(t);
      }
    }
    for (double bt : beats) {
      const auto lo = static_cast<std::ptrdiff_t>(std::floor((bt - 0.4) * fs));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil((bt + 0.5) * fs));
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i < std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n)); ++i) {
        const double dt = static_cast<double>(i) / fs - bt;
        for (const auto& [off, amp, width] : detail::kBeatWaves) {
          const double u = (dt - off) / width;
          ecg[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * u * u);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      ecg[i] += 0.2 * std::sin(2.0 * std::numbers::pi * 0.25 * t + wander_phase) + cfg.noise_level * gauss(rng);
    }
  }

  // EEG: Kellet's pink-noise filter per channel, shared spike-wave timing.
  auto pink = [&](std::vector<double>& x) {
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    for (auto& v : x) {
      const double w = gauss(rng);
      b0 = 0.99886 * b0 + w * 0.0555179;
      b1 = 0.99332 * b1 + w * 0.0750759;
      b2 = 0.96900 * b2 + w * 0.1538520;
      b3 = 0.86650 * b3 + w * 0.3104856;
      b4 = 0.55000 * b4 + w * 0.5329522;
      b5 = -0.7616 * b5 - w * 0.0168980;
      v = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362) * 0.25;
      b6 = w * 0.115926;
    }
  };
  std::vector<double> eeg1(n), eeg2(n);
  pink(eeg1);
  pink(eeg2);
  const std::array<double, 2> gains = {1.0, 0.8};
  for (const auto& a : r.annotations) {
    const double sw_phase = unit(rng);
    for (std::size_t i = a.start_sample; i < a.end_sample; ++i) {
      const double t = static_cast<double>(i - a.start_sample) / fs;
      const double cyc = std::fmod(3.0 * t + sw_phase, 1.0) / 3.0;  // seconds into the current 3 Hz cycle
      const double spike = 2.5 * std::exp(-0.5 * std::pow((cyc - 0.03) / 0.012, 2.0));
      const double wave = -1.2 * std::sin(std::numbers::pi * std::clamp((cyc - 0.08) / 0.25, 0.0, 1.0));
      eeg1[i] += gains[0] * (spike + wave);
      eeg2[i] += gains[1] * (spike + wave);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    eeg1[i] += cfg.noise_level * gauss(rng);
    eeg2[i] += cfg.noise_level * gauss(rng);
  }

  r.channels = {{"ECG", std::move(ecg)}, {"EEG1", std::move(eeg1)}, {"EEG2", std::move(eeg2)}};
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// Labeling and windows

inline constexpr double kDefaultSeizureOverlap = 0.5;

inline std::size_t seizure_overlap(const SignalRecord& r, std::size_t start, std::size_t len) {
  std::size_t total = 0;
  for (const auto& a : r.annotations) {
    const std::size_t lo = std::max(a.start_sample, start);
    const std::size_t hi = std::min(a.end_sample, start + len);
    if (hi > lo) total += hi - lo;
  }
  return total;
}

/// Seizure iff at least `threshold` of the window lies inside annotated intervals.
inline Label label_window(const SignalRecord& r, std::size_t start, std::size_t len = kWindowLength,
                          double threshold = kDefaultSeizureOverlap) {
  if (len == 0 || start + len > r.length())
    throw InvariantError("biosignal-io", "window [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                             ") outside record of " + std::to_string(r.length()) + " samples");
  const double frac = static_cast<double>(seizure_overlap(r, start, len)) / static_cast<double>(len);
  return frac >= threshold ? Label::seizure : Label::non_seizure;
}

struct LabeledWindow {
  std::array<std::vector<double>, kNumChannels> channels;  // ECG, EEG1, EEG2
  Label label = Label::non_seizure;
  WindowOrigin origin;
};

inline std::vector<LabeledWindow> make_windows(const SignalRecord& r, double threshold = kDefaultSeizureOverlap) {
  std::array<const Channel*, kNumChannels> ch{};
  for (std::size_t c = 0; c < kNumChannels; ++c) ch[c] = &r.channel(kChannelNames[c]);
  std::vector<LabeledWindow> out;
  for (std::size_t s : segment_starts(r.length())) {
    LabeledWindow w;
    for (std::size_t c = 0; c < kNumChannels; ++c)
      w.channels[c].assign(ch[c]->samples.begin() + static_cast<std::ptrdiff_t>(s),
                           ch[c]->samples.begin() + static_cast<std::ptrdiff_t>(s + kWindowLength));
    w.label = label_window(r, s, kWindowLength, threshold);
    w.origin = {r.patient_id, s};
    out.push_back(std::move(w));
  }
  return out;
}

/// Several synthetic patients with the same seizure timetable, each seeded from `seed`.
struct SynthCorpusConfig {
  std::size_t records = 16;
  double duration_s = 600.0;
  std::vector<SecondsInterval> seizure_intervals{{100.0, 190.0}, {400.0, 490.0}};
  double noise_level = 0.1;
  std::uint64_t seed = 1;
};

inline std::vector<LabeledWindow> synth_corpus(const SynthCorpusConfig& cfg) {
  std::vector<LabeledWindow> all;
  for (std::size_t r = 0; r < cfg.records; ++r) {
    SynthConfig c;
    c.duration_s = cfg.duration_s;
    c.seizure_intervals = cfg.seizure_intervals;
    c.noise_level = cfg.noise_level;
    c.seed = derive_seed(cfg.seed, "synth-record", r);
    c.patient_id = "synth" + std::to_string(r);
    auto w = make_windows(synth_record(c));
    std::move(w.begin(), w.end(), std::back_inserter(all));
  }
  return all;
}

template <typename W>
std::array<std::size_t, 2> class_counts(std::span<const W> windows) {
  std::array<std::size_t, 2> n{};
  for (const auto& w : windows) ++n[class_index(w.label)];
  return n;
}

template <typename W>
std::array<std::size_t, 2> class_counts(const std::vector<W>& windows) {
  return class_counts(std::span<const W>(windows));
}

/**
 * Random undersampling of the majority class. Every minority window is kept;
 * the majority is subsampled uniformly to the same size. Relative order of the
 * input is preserved.
 */
template <typename W>
std::vector<W> undersample(const std::vector<W>& windows, std::uint64_t seed) {
  const auto counts = class_counts(windows);
  if (counts[0] == 0 || counts[1] == 0) throw InvariantError("biosignal-io", "undersample needs both classes");
  const std::size_t minority = std::min(counts[0], counts[1]);
  const Label major = counts[1] > counts[0] ? Label::seizure : Label::non_seizure;

  std::vector<std::size_t> major_idx;
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (windows[i].label == major) major_idx.push_back(i);
  std::vector<std::size_t> keep;
  std::mt19937_64 rng(derive_seed(seed, "undersample"));
  std::sample(major_idx.begin(), major_idx.end(), std::back_inserter(keep), minority, rng);

  std::vector<char> chosen(windows.size(), 0);
  for (std::size_t i : keep) chosen[i] = 1;
  std::vector<W> out;
  out.reserve(2 * minority);
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (windows[i].label != major || chosen[i]) out.push_back(windows[i]);
  return out;
}

struct SplitPolicy {
  std::size_t validation_per_class = 400;
  std::size_t test_per_class = 784;
};

struct DatasetSplit {
  std::vector<LabeledWindow> train, validation, test;
};

/**
 * Whole records are assigned to test first, then validation, then train, in a
 * seeded order; a record never contributes to two partitions. Validation and
 * test are then sampled to exactly the requested per-class sizes.
 */
inline DatasetSplit split_dataset(const std::vector<LabeledWindow>& windows, const SplitPolicy& policy,
                                  std::uint64_t seed) {
  const auto total = class_counts(windows);
  const std::size_t need = policy.validation_per_class + policy.test_per_class;
  for (std::size_t c = 0; c < 2; ++c)
    if (total[c] < need)
      throw InvariantError("biosignal-io", "insufficient " + std::string(to_string(static_cast<Label>(c))) +
                                               " windows: have " + std::to_string(total[c]) + ", need " +
                                               std::to_string(need) + " for validation + test");

  std::vector<std::string> records;
  for (const auto& w : windows)
    if (std::find(records.begin(), records.end(), w.origin.record_id) == records.end())
      records.push_back(w.origin.record_id);
  std::mt19937_64 rng(derive_seed(seed, "split"));
  std::shuffle(records.begin(), records.end(), rng);

  auto pool_of = [&](const std::string& id) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < windows.size(); ++i)
      if (windows[i].origin.record_id == id) idx.push_back(i);
    return idx;
  };

  std::array<std::vector<std::size_t>, 2> test_pool, val_pool;
  std::vector<std::size_t> train_idx;
  auto enough = [](const std::array<std::vector<std::size_t>, 2>& p, std::size_t k) {
    return p[0].size() >= k && p[1].size() >= k;
  };
  for (const auto& id : records) {
    auto idx = pool_of(id);
    auto* target = !enough(test_pool, policy.test_per_class)         ? &test_pool
                   : !enough(val_pool, policy.validation_per_class) ? &val_pool
                                                                     : nullptr;
    if (target) {
      for (std::size_t i : idx) (*target)[class_index(windows[i].label)].push_back(i);
    } else {
      train_idx.insert(train_idx.end(), idx.begin(), idx.end());
    }
  }
  if (!enough(test_pool, policy.test_per_class) || !enough(val_pool, policy.validation_per_class))
    throw InvariantError("biosignal-io", "insufficient windows: records cannot fill balanced validation and test sets");

  DatasetSplit out;
  auto draw = [&](const std::array<std::vector<std::size_t>, 2>& pool, std::size_t k, std::vector<LabeledWindow>& dst) {
    std::vector<std::size_t> pick;
    for (std::size_t c = 0; c < 2; ++c) std::sample(pool[c].begin(), pool[c].end(), std::back_inserter(pick), k, rng);
    std::sort(pick.begin(), pick.end());
    for (std::size_t i : pick) dst.push_back(windows[i]);
  };
  draw(test_pool, policy.test_per_class, out.test);
  draw(val_pool, policy.validation_per_class, out.validation);
  std::sort(train_idx.begin(), train_idx.end());
  for (std::size_t i : train_idx) out.train.push_back(windows[i]);
  const auto tc = class_counts(out.train);
  if (tc[0] == 0 || tc[1] == 0)
    throw InvariantError("biosignal-io", "insufficient windows: training records lack one class");
  return out;
}

}  // namespace seizurekd
