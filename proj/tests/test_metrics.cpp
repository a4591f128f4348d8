#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "seizurekd/metrics.hpp"

using namespace seizurekd;

namespace {
const ConfusionMatrix kTeacher{682, 102, 34, 750};
const ConfusionMatrix kStudent{671, 113, 44, 740};
const ConfusionMatrix kBaseline{634, 150, 160, 624};
}  // namespace

TEST(Confusion, AllCorrectAndAllFlipped) {
  std::vector<Label> truth(10, Label::seizure);
  truth.insert(truth.end(), 10, Label::non_seizure);
  EXPECT_EQ(confusion(truth, truth), (ConfusionMatrix{10, 0, 0, 10}));
  std::vector<Label> flipped;
  for (auto l : truth) flipped.push_back(l == Label::seizure ? Label::non_seizure : Label::seizure);
  EXPECT_EQ(confusion(flipped, truth), (ConfusionMatrix{0, 10, 10, 0}));
}

TEST(Confusion, RandomAgainstCountingOracle) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.4);
  std::vector<Label> p(1000), t(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    p[i] = coin(rng) ? Label::seizure : Label::non_seizure;
    t[i] = coin(rng) ? Label::seizure : Label::non_seizure;
  }
  auto count = [&](Label a, Label b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < 1000; ++i) n += (p[i] == a && t[i] == b);
    return n;
  };
  const auto cm = confusion(p, t);
  EXPECT_EQ(cm.tp, count(Label::seizure, Label::seizure));
  EXPECT_EQ(cm.fn, count(Label::non_seizure, Label::seizure));
  EXPECT_EQ(cm.fp, count(Label::seizure, Label::non_seizure));
  EXPECT_EQ(cm.tn, count(Label::non_seizure, Label::non_seizure));
  EXPECT_EQ(cm.total(), 1000u);

  // order does not matter
  std::vector<std::size_t> idx(1000);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Label> p2, t2;
  for (auto i : idx) {
    p2.push_back(p[i]);
    t2.push_back(t[i]);
  }
  EXPECT_EQ(confusion(p2, t2), cm);
}

TEST(Confusion, LengthMismatchThrows) {
  EXPECT_THROW(confusion(std::vector<Label>(3), std::vector<Label>(2)), InvariantError);
}

TEST(Predict, TieGoesToNonSeizure) {
  EXPECT_EQ(predict_label(std::vector<double>{0.5, 0.5}), Label::non_seizure);
  EXPECT_EQ(predict_label(std::vector<double>{0.4, 0.6}), Label::seizure);
  EXPECT_THROW(predict_label(std::vector<double>{1.0}), InvariantError);
}

TEST(Metrics, TeacherTable) {
  EXPECT_DOUBLE_EQ(round_percent(sensitivity(kTeacher)), 86.99);
  EXPECT_DOUBLE_EQ(round_percent(specificity(kTeacher)), 95.66);
  EXPECT_DOUBLE_EQ(round_percent(gmean(kTeacher)), 91.22);
  EXPECT_DOUBLE_EQ(round_percent(f1(kTeacher)), 90.93);
}

TEST(Metrics, StudentAndBaselineTables) {
  EXPECT_DOUBLE_EQ(round_percent(sensitivity(kStudent)), 85.59);
  EXPECT_DOUBLE_EQ(round_percent(specificity(kStudent)), 94.39);
  EXPECT_DOUBLE_EQ(round_percent(sensitivity(kBaseline)), 80.87);
  EXPECT_DOUBLE_EQ(round_percent(specificity(kBaseline)), 79.59);
}

TEST(Metrics, CrossConsistency) {
  const auto t = MetricsReport::from(kTeacher), s = MetricsReport::from(kStudent), b = MetricsReport::from(kBaseline);
  const auto tb = MetricDeltas::between(b, t);
  EXPECT_NEAR(100.0 * tb.sen, 6.12, 0.005);
  EXPECT_NEAR(100.0 * tb.spe, 16.07, 0.005);
  EXPECT_NEAR(100.0 * (t.gmean - s.gmean), 1.35, 0.05);
}

TEST(Metrics, EqualSenSpeGivesSameGmean) {
  const ConfusionMatrix cm{70, 30, 30, 70};
  EXPECT_DOUBLE_EQ(sensitivity(cm), 0.7);
  EXPECT_DOUBLE_EQ(specificity(cm), 0.7);
  EXPECT_NEAR(gmean(cm), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(accuracy(cm), 0.7);
}

TEST(Metrics, DegenerateAndEmpty) {
  const ConfusionMatrix only_neg{0, 0, 3, 7};
  const auto s = sensitivity(only_neg);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_FALSE(specificity(only_neg).degenerate);
  EXPECT_TRUE(MetricsReport::from(only_neg).degenerate);
  EXPECT_THROW(accuracy(ConfusionMatrix{}), InvariantError);
}

TEST(Metrics, AllInUnitInterval) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> u(0, 50);
  for (int i = 0; i < 200; ++i) {
    const ConfusionMatrix cm{u(rng), u(rng), u(rng), u(rng) + 1};
    const auto r = MetricsReport::from(cm);
    for (double v : {r.sen, r.spe, r.gmean, r.acc, r.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, RoundHalfUp) {
  EXPECT_DOUBLE_EQ(round_percent(0.12345), 12.35);
  EXPECT_DOUBLE_EQ(round_percent(0.5), 50.0);
}

TEST(Report, JsonFields) {
  const auto j = MetricsReport::from(kTeacher).to_json();
  for (const char* k : {"tp", "fn", "fp", "tn", "sen", "spe", "gmean", "acc", "f1"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["tp"], 682);
  const auto d = MetricDeltas::between(MetricsReport::from(kTeacher), MetricsReport::from(kTeacher));
  EXPECT_EQ(d.acc, 0.0);
  EXPECT_EQ(d.gmean, 0.0);
}
