#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "seizurekd/biosignal_io.hpp"

using namespace seizurekd;
namespace fs = std::filesystem;

namespace {

SignalRecord minimal_record(std::size_t n = 768) {
  SignalRecord r;
  r.patient_id = "p";
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    Channel ch{std::string(kChannelNames[c]), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) ch.samples[i] = static_cast<double>(c) + 0.001 * static_cast<double>(i);
    r.channels.push_back(std::move(ch));
  }
  return r;
}

RecordErrc errc_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const RecordError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no RecordError thrown";
  return RecordErrc::malformed_header;
}

struct TmpDir {
  fs::path path;
  TmpDir() : path(fs::temp_directory_path() / ("skd_io_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

struct Tag {
  Label label;
  std::size_t id;
};

}  // namespace

TEST(Bsr1, MinimalBinaryRecordRoundTrips) {
  TmpDir d;
  auto r = minimal_record();
  r.annotations = {{10, 20}, {100, 768}};
  save_record(r, d.path / "p.bsr");
  const auto bytes = read_file_bytes((d.path / "p.bsr").string(), "t");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BSR1");
  const auto back = load_record(d.path / "p.bsr");
  EXPECT_EQ(back.length(), 768u);
  EXPECT_EQ(back.channels.size(), 3u);
  EXPECT_EQ(back.channel("EEG2").samples, r.channel("EEG2").samples);
  EXPECT_EQ(back.annotations, r.annotations);
  EXPECT_EQ(encode_bsr1(back), bytes);
}

TEST(Bsr1, DistinctDiagnostics) {
  auto shorter = minimal_record();
  shorter.channels[1].samples.pop_back();
  EXPECT_EQ(errc_of([&] { shorter.validate(); }), RecordErrc::channel_length_mismatch);

  auto good = minimal_record();
  auto bytes = encode_bsr1(good);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(errc_of([&] { decode_bsr1(bad_magic); }), RecordErrc::malformed_header);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 9);
  EXPECT_EQ(errc_of([&] { decode_bsr1(truncated); }), RecordErrc::malformed_header);

  auto out_of_range = minimal_record();
  out_of_range.annotations = {{700, 1000}};
  EXPECT_EQ(errc_of([&] { out_of_range.validate(); }), RecordErrc::annotation_out_of_range);
  auto overlap = minimal_record();
  overlap.annotations = {{10, 50}, {40, 60}};
  EXPECT_EQ(errc_of([&] { overlap.validate(); }), RecordErrc::annotation_order);
  EXPECT_EQ(errc_of([&] { (void)minimal_record().channel("EMG"); }), RecordErrc::missing_channel);

  EXPECT_EQ(RecordError(RecordErrc::malformed_header, "x").kind(), ErrorKind::io);
  EXPECT_EQ(RecordError(RecordErrc::annotation_out_of_range, "x").kind(), ErrorKind::invariant);
  EXPECT_THROW(load_record("/nonexistent/x.bsr"), IoError);
}

TEST(Csv, RoundTripAndAnnotationRange) {
  TmpDir d;
  auto r = minimal_record();
  r.annotations = {{5, 400}};
  save_record(r, d.path / "rec.csv", RecordFormat::csv);
  ASSERT_TRUE(fs::exists(d.path / "rec.ann.csv"));
  const auto back = load_record(d.path / "rec.csv", RecordFormat::csv);
  EXPECT_EQ(back.patient_id, "rec");
  EXPECT_EQ(back.annotations, r.annotations);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back.channels[c].samples, r.channels[c].samples);

  std::ostringstream data, ann;
  write_csv(minimal_record(), data, ann);
  std::istringstream din(data.str()), ain("start_sample,end_sample\n0,1000\n");
  EXPECT_EQ(errc_of([&] { read_csv(din, &ain); }), RecordErrc::annotation_out_of_range);

  std::istringstream bad_header("time,a,b,c\n0,1,2,3\n");
  EXPECT_EQ(errc_of([&] { read_csv(bad_header, nullptr); }), RecordErrc::malformed_header);
  std::istringstream ragged("t,ecg,eeg1,eeg2\n0,1,2,3\n1,1,,3\n");
  EXPECT_EQ(errc_of([&] { read_csv(ragged, nullptr); }), RecordErrc::channel_length_mismatch);
}

TEST(Csv, DirectoryLoaderSkipsAnnotationFiles) {
  TmpDir d;
  save_record(minimal_record(), d.path / "a.bsr");
  save_record(minimal_record(), d.path / "b.csv", RecordFormat::csv);
  const auto recs = load_record_directory(d.path);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].patient_id, "a");
  EXPECT_EQ(recs[1].patient_id, "b");
}

TEST(Synth, Examples) {
  SynthConfig c;
  c.duration_s = 3.0;
  c.seed = 7;
  const auto r = synth_record(c);
  EXPECT_EQ(r.length(), 768u);
  EXPECT_TRUE(r.annotations.empty());
  EXPECT_EQ(encode_bsr1(r), encode_bsr1(synth_record(c)));

  SynthConfig s;
  s.duration_s = 60.0;
  s.seizure_intervals = {{20.0, 30.0}};
  const auto rs = synth_record(s);
  ASSERT_EQ(rs.annotations.size(), 1u);
  EXPECT_EQ(rs.annotations[0].length(), 2560u);
  EXPECT_EQ(rs.annotations[0].start_sample, 5120u);

  SynthConfig bad;
  bad.duration_s = 10.0;
  bad.seizure_intervals = {{5.0, 11.0}};
  EXPECT_THROW(synth_record(bad), InvariantError);
}

TEST(Synth, SeizureRaisesHeartRate) {
  SynthConfig c;
  c.duration_s = 120.0;
  c.seizure_intervals = {{60.0, 120.0}};
  c.noise_level = 0.0;
  const auto r = synth_record(c);
  const auto& ecg = r.channel("ECG").samples;
  // Count R-peaks as local maxima above half the global maximum.
  const double top = *std::max_element(ecg.begin(), ecg.end());
  auto beats = [&](std::size_t lo, std::size_t hi) {
    int n = 0;
    for (std::size_t i = lo + 1; i + 1 < hi; ++i)
      if (ecg[i] > 0.5 * top && ecg[i] >= ecg[i - 1] && ecg[i] > ecg[i + 1]) ++n;
    return n;
  };
  const int normal = beats(0, 60 * 256), ictal = beats(60 * 256, 120 * 256);
  EXPECT_NEAR(normal, 70, 4);
  EXPECT_NEAR(ictal, 120, 5);
}

TEST(Labeling, OverlapRule) {
  auto r = minimal_record(4000);
  r.annotations = {{1000, 3000}};
  EXPECT_EQ(label_window(r, 1200), Label::seizure);
  EXPECT_EQ(label_window(r, 0), Label::non_seizure);
  EXPECT_EQ(label_window(r, 1000 - 384), Label::seizure);      // exactly 384 inside
  EXPECT_EQ(label_window(r, 1000 - 385), Label::non_seizure);  // 383 inside
  EXPECT_THROW(label_window(r, 3500), InvariantError);
}

TEST(Labeling, WindowsAgreeWithBruteForceCounter) {
  SynthConfig c;
  c.duration_s = 300.0;
  c.seizure_intervals = {{12.3, 40.0}, {100.0, 101.0}, {200.5, 260.0}};
  const auto r = synth_record(c);
  const auto ws = make_windows(r);
  ASSERT_EQ(ws.size(), segment_starts(r.length()).size());
  for (const auto& w : ws) {
    std::size_t inside = 0;
    for (std::size_t i = w.origin.start; i < w.origin.start + 768; ++i)
      for (const auto& a : r.annotations)
        if (i >= a.start_sample && i < a.end_sample) ++inside;
    EXPECT_EQ(w.label, 2 * inside >= 768 ? Label::seizure : Label::non_seizure);
    for (const auto& ch : w.channels) EXPECT_EQ(ch.size(), 768u);
  }
}

TEST(Undersample, PaperCounts) {
  std::vector<Tag> tags;
  tags.reserve(6332 + 5760551);
  for (std::size_t i = 0; i < 5760551; ++i) tags.push_back({Label::non_seizure, i});
  for (std::size_t i = 0; i < 6332; ++i) tags.push_back({Label::seizure, 5760551 + i});
  const auto out = undersample(tags, 1);
  const auto n = class_counts(out);
  EXPECT_EQ(n[0], 6332u);
  EXPECT_EQ(n[1], 6332u);
}

TEST(Undersample, BalancedIdentityDeterminismAndMembership) {
  std::vector<Tag> bal;
  for (std::size_t i = 0; i < 20; ++i) bal.push_back({i % 2 ? Label::seizure : Label::non_seizure, i});
  const auto same = undersample(bal, 3);
  ASSERT_EQ(same.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(same[i].id, i);

  std::vector<Tag> skew;
  for (std::size_t i = 0; i < 500; ++i) skew.push_back({i < 37 ? Label::seizure : Label::non_seizure, i});
  const auto a = undersample(skew, 11), b = undersample(skew, 11);
  ASSERT_EQ(a.size(), b.size());
  std::set<std::size_t> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(skew[a[i].id].label, a[i].label);
    ids.insert(a[i].id);
  }
  EXPECT_EQ(ids.size(), a.size());
  EXPECT_EQ(class_counts(a)[0], 37u);

  std::vector<Tag> one_class(5, Tag{Label::seizure, 0});
  EXPECT_THROW(undersample(one_class, 1), InvariantError);
}

namespace {
std::vector<LabeledWindow> corpus(int records, double duration_s) {
  std::vector<LabeledWindow> all;
  for (int r = 0; r < records; ++r) {
    SynthConfig c;
    c.duration_s = duration_s;
    c.seed = 50 + static_cast<std::uint64_t>(r);
    c.patient_id = "rec" + std::to_string(r);
    c.seizure_intervals = {{duration_s * 0.2, duration_s * 0.55}};
    auto w = make_windows(synth_record(c));
    all.insert(all.end(), w.begin(), w.end());
  }
  return all;
}
}  // namespace

TEST(Split, SizesDisjointnessAndDeterminism) {
  const auto all = corpus(30, 400.0);
  const auto s = split_dataset(all, {50, 60}, 4);
  EXPECT_EQ(class_counts(s.validation), (std::array<std::size_t, 2>{50, 50}));
  EXPECT_EQ(class_counts(s.test), (std::array<std::size_t, 2>{60, 60}));
  std::set<std::string> train_ids, test_ids, val_ids;
  for (const auto& w : s.train) train_ids.insert(w.origin.record_id);
  for (const auto& w : s.test) test_ids.insert(w.origin.record_id);
  for (const auto& w : s.validation) val_ids.insert(w.origin.record_id);
  for (const auto& id : test_ids) {
    EXPECT_FALSE(train_ids.count(id)) << id;
    EXPECT_FALSE(val_ids.count(id)) << id;
  }
  const auto again = split_dataset(all, {50, 60}, 4);
  ASSERT_EQ(again.test.size(), s.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) EXPECT_EQ(again.test[i].origin, s.test[i].origin);
}

TEST(Split, PaperSizesAndInsufficiency) {
  const auto all = corpus(40, 1200.0);
  const auto n = class_counts(all);
  ASSERT_GE(n[1], 1184u);
  const auto s = split_dataset(all, {400, 784}, 2);
  EXPECT_EQ(class_counts(s.validation), (std::array<std::size_t, 2>{400, 400}));
  EXPECT_EQ(class_counts(s.test), (std::array<std::size_t, 2>{784, 784}));

  const auto small = corpus(4, 200.0);
  ASSERT_LT(class_counts(small)[1], 400u);
  EXPECT_THROW(split_dataset(small, {400, 10}, 1), InvariantError);
}
