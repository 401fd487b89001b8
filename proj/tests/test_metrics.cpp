#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "seamotion/metrics.hpp"

using namespace seamotion;

namespace {

std::vector<double> random_window(std::mt19937_64& rng, std::size_t m) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(m);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<double> scaled_about_mean(const std::vector<double>& v, double a) {
  const double mu = mean(v);
  std::vector<double> out;
  for (double x : v) out.push_back(a * (x - mu) + mu);
  return out;
}

}  // namespace

TEST(Accuracy, IdenticalWindowsScoreOne) {
  const std::vector<double> y{0.1, 0.7, -0.3, 0.2};
  EXPECT_DOUBLE_EQ(accuracy(y, y, 0.775), 1.0);
}

TEST(Accuracy, OffsetCancels) {
  const std::vector<double> y{0.1, 0.7, -0.3, 0.2};
  std::vector<double> p = y;
  for (double& v : p) v += 4.0;
  EXPECT_NEAR(accuracy(p, y, 0.775), 1.0, 1e-12);
}

TEST(Accuracy, DoubledDeviationsScoreZero) {
  const std::vector<double> y{0.1, 0.7, -0.3, 0.2};
  EXPECT_NEAR(accuracy(scaled_about_mean(y, 2.0), y, 0.775), 0.0, 1e-12);
}

TEST(Accuracy, HandComputedAreas) {
  // truth |dev| {1, 1, 1, 1}: area 0.5 + 1 + 1 + 0.5 = 3
  // pred |dev| {.75, .75, .75, 2.25}: area .375 + .75 + .75 + 1.125 = 3
  const std::vector<double> y{0.0, 2.0, 0.0, 2.0};
  const std::vector<double> p{1.0, 1.0, 1.0, 4.0};
  EXPECT_NEAR(accuracy(p, y, 1.0), 1.0, 1e-12);
  const std::vector<double> q{0.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(accuracy(q, y, 1.0), 0.0, 1e-12);
}

TEST(Accuracy, FlatTruthIsDegenerate) {
  const std::vector<double> y(5, 1.5), p{1.0, 2.0, 3.0, 4.0, 5.0};
  EXPECT_THROW(accuracy(p, y, 1.0), DegenerateDataError);
}

TEST(Accuracy, BadInputsAreDomainErrors) {
  const std::vector<double> a{1.0, 2.0}, b{1.0, 2.0, 3.0}, one{1.0};
  EXPECT_THROW(accuracy(a, b, 1.0), DomainError);
  EXPECT_THROW(accuracy(one, one, 1.0), DomainError);
  EXPECT_THROW(accuracy(a, a, 0.0), DomainError);
}

TEST(Accuracy, RandomizedIdentities) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-50.0, 50.0), dtd(0.1, 3.0), ad(0.0, 5.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 60);
    const auto y = random_window(rng, m);
    const auto p = random_window(rng, m);
    const double dt = dtd(rng);
    const double acc = accuracy(p, y, dt);
    ASSERT_LE(acc, 1.0);
    ASSERT_DOUBLE_EQ(accuracy(y, y, dt), 1.0);
    // Common offset and time-axis scaling leave Acc unchanged.
    const double c = u(rng);
    auto ps = p, ys = y;
    for (double& v : ps) v += c;
    for (double& v : ys) v += c;
    ASSERT_NEAR(accuracy(ps, y, dt), acc, 1e-9);
    ASSERT_NEAR(accuracy(p, ys, dt), acc, 1e-9);
    ASSERT_NEAR(accuracy(p, y, 2.5 * dt), acc, 1e-12);
    const double a = ad(rng);
    ASSERT_NEAR(accuracy(scaled_about_mean(y, a), y, dt), 1.0 - std::abs(1.0 - a), 1e-9);
  }
  for (double a : {0.5, 1.0, 1.5, 2.0}) {
    const auto y = random_window(rng, 20);
    EXPECT_NEAR(accuracy(scaled_about_mean(y, a), y, 0.775), 1.0 - std::abs(1.0 - a), 1e-12);
  }
}

TEST(Accuracy, CanGoNegative) {
  const std::vector<double> y{0.0, 1.0, 0.0, 1.0};
  EXPECT_NEAR(accuracy(scaled_about_mean(y, 3.0), y, 1.0), -1.0, 1e-12);
}

TEST(Boxplot, FiveValues) {
  const auto s = boxplot_stats(std::vector<double>{5, 3, 1, 4, 2});
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.q1, 2);
  EXPECT_EQ(s.median, 3);
  EXPECT_EQ(s.q3, 4);
  EXPECT_EQ(s.max, 5);
  EXPECT_EQ(s.mean, 3);
  EXPECT_EQ(s.count, 5u);
}

TEST(Boxplot, SingleValue) {
  const auto s = boxplot_stats(std::vector<double>{0.42});
  for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.mean}) EXPECT_EQ(v, 0.42);
}

TEST(Boxplot, LinearInterpolation) {
  const auto s = boxplot_stats(std::vector<double>{0, 10});
  EXPECT_DOUBLE_EQ(s.q1, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 5.0);
  EXPECT_DOUBLE_EQ(s.q3, 7.5);
  const auto t = boxplot_stats(std::vector<double>{0.5, 0.7, 0.9});
  EXPECT_EQ(t.min, 0.5);
  EXPECT_EQ(t.median, 0.7);
  EXPECT_EQ(t.max, 0.9);
}

TEST(Boxplot, EmptyIsDomainError) { EXPECT_THROW(boxplot_stats(std::vector<double>{}), DomainError); }

namespace {

WindowedDataset sine_dataset(std::size_t L = 300) {
  TimeSeries motion, wave;
  motion.dt = wave.dt = 0.775;
  for (std::size_t i = 0; i < L; ++i) {
    motion.values.push_back(std::sin(0.21 * static_cast<double>(i)) + 0.3 * std::cos(0.05 * static_cast<double>(i)));
    wave.values.push_back(std::cos(0.21 * static_cast<double>(i)));
  }
  return build_pairs(motion, wave, 12, 5, 5);
}

}  // namespace

TEST(Score, PerfectPredictionsScoreOne) {
  const auto ds = sine_dataset();
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Batch b = make_batch(ds, idx);
  std::vector<std::size_t> anchors;
  for (std::size_t i : idx) anchors.push_back(ds.anchor(i));
  const auto rep = score_predictions(b.targets, b.targets, anchors, ds.dt);
  EXPECT_EQ(rep.degenerate, 0u);
  EXPECT_EQ(rep.accuracy.per_window.size(), ds.size());
  for (double a : rep.accuracy.per_window) EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_EQ(rep.mse, 0.0);
  EXPECT_EQ(rep.window_p.front(), 12u);
}

TEST(Score, FlatWindowsAreCountedAndExcluded) {
  Matrix truth(3, 4), pred = Matrix::Zero(3, 4);
  truth << 1, 0, 2, 5,  //
      1, 1, 2, 6,       //
      1, 0, 2, 7;
  const auto rep = score_predictions(pred, truth, {}, 1.0);
  EXPECT_EQ(rep.evaluated, 4u);
  EXPECT_EQ(rep.degenerate, 2u);
  EXPECT_DOUBLE_EQ(rep.degenerate_fraction, 0.5);
  ASSERT_EQ(rep.accuracy.per_window.size(), 2u);
  EXPECT_EQ(rep.window_p, (std::vector<std::size_t>{1, 3}));
  // Zero predictions have zero deviation area, so Acc = 0.
  for (double a : rep.accuracy.per_window) EXPECT_EQ(a, 0.0);
}

TEST(Evaluate, ZeroNetworkScoresZeroOnNonFlatTruths) {
  const auto ds = sine_dataset();
  Network net(Architecture{2, {4}, {}, 5});
  const auto rep = evaluate(net, ds, ds.norm);
  EXPECT_EQ(rep.evaluated, ds.size());
  EXPECT_EQ(rep.degenerate, 0u);
  for (double a : rep.accuracy.per_window) EXPECT_EQ(a, 0.0);
}

TEST(Evaluate, OrderIndependent) {
  const auto ds = sine_dataset();
  Network net(Architecture{2, {4}, {3}, 5});
  net.init_uniform(2);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  const auto a = evaluate(net, ds, ds.norm).accuracy.summary;
  const auto b = evaluate(net, ds.reordered(order), ds.norm).accuracy.summary;
  EXPECT_DOUBLE_EQ(a.median, b.median);
  EXPECT_DOUBLE_EQ(a.q1, b.q1);
  EXPECT_DOUBLE_EQ(a.q3, b.q3);
  EXPECT_NEAR(a.mean, b.mean, 1e-14);
}

TEST(Evaluate, ScoresDeregularizedMotion) {
  // Acc is affine-invariant, so scoring in physical units matches scoring in
  // regularized units; MSE is reported in regularized units either way.
  auto ds = sine_dataset();
  Network net(Architecture{2, {4}, {3}, 5});
  net.init_uniform(9);
  NormalizationConstants norm;
  norm.heave = {3.0, 2.5};
  const auto plain = evaluate(net, ds, ds.norm);
  const auto scaled = evaluate(net, ds, norm);
  EXPECT_NEAR(plain.accuracy.summary.mean, scaled.accuracy.summary.mean, 1e-12);
  EXPECT_NEAR(plain.mse, scaled.mse, 1e-12);
}

TEST(Evaluate, StrideAndMismatch) {
  const auto ds = sine_dataset();
  Network net(Architecture{2, {4}, {}, 5});
  net.init_uniform(1);
  EXPECT_EQ(evaluate(net, ds, ds.norm, 10).evaluated, (ds.size() + 9) / 10);
  Network wrong(Architecture{2, {4}, {}, 6});
  EXPECT_THROW(evaluate(wrong, ds, ds.norm), DomainError);
  EXPECT_THROW(evaluate(net, ds, ds.norm, 0), DomainError);
}

TEST(Evaluate, OverfitGap) {
  EvaluationReport train, test;
  train.accuracy.summary.mean = 0.93;
  test.accuracy.summary.mean = 0.88;
  EXPECT_NEAR(overfit_gap(train, test), 0.05, 1e-12);
}

TEST(SummaryCsv, HeaderAndLine) {
  SummaryRow r;
  r.dataset = "test";
  r.channel = "heave";
  r.n = 60;
  r.m = 20;
  r.w = 20;
  r.noise = 0.2;
  r.summary = boxplot_stats(std::vector<double>{0.5, 0.75, 1.0});
  EXPECT_STREQ(kSummaryHeader, "dataset,channel,n,m,w,noise,min,q1,median,q3,max,mean");
  EXPECT_EQ(summary_line(r), "test,heave,60,20,20,0.2,0.5,0.625,0.75,0.875,1,0.75");
}
