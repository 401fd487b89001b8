#include <gtest/gtest.h>

#include "seamotion/metrics.hpp"
#include "seamotion/training.hpp"

using namespace seamotion;

namespace {

struct Split {
  WindowedDataset train, test;
};

const Split& three_run_split() {
  static const Split s = [] {
    const auto runs = generate_campaign(campaign_conditions(), 7, default_response_params());
    SplitOptions opts;
    opts.training_ids = {"WC1", "WC3", "WC4"};
    auto [train, test] = split_campaign(runs, Channel::heave, 60, 20, 20, {0.0}, opts);
    return Split{train.strided(16), test.strided(8)};
  }();
  return s;
}

Network reference_net(std::uint64_t seed) {
  Network net(Architecture{});
  net.init_uniform(seed);
  return net;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialNetwork) {
  const auto& s = three_run_split();
  const auto net = reference_net(1);
  TrainingConfig cfg;
  cfg.max_epochs = 0;
  const auto res = train(net, s.train, s.test, cfg);
  EXPECT_TRUE(res.history.empty());
  EXPECT_TRUE(std::equal(net.params().begin(), net.params().end(), res.net.params().begin()));
}

TEST(Train, ShapeMismatchIsRejected) {
  const auto& s = three_run_split();
  Network net(Architecture{2, {8}, {}, 10});
  TrainingConfig cfg;
  cfg.max_epochs = 1;
  EXPECT_THROW(train(net, s.train, s.test, cfg), DomainError);
}

TEST(Train, DeskScaleRunConverges) {
  const auto& s = three_run_split();
  const auto net = reference_net(3);
  TrainingConfig cfg;
  cfg.max_epochs = 100;
  cfg.seed = 3;
  const double initial = dataset_loss(net, s.train);
  const auto res = train(net, s.train, s.test, cfg);
  ASSERT_FALSE(res.diverged) << res.divergence_reason;
  ASSERT_EQ(res.history.size(), 100u);
  EXPECT_LT(res.history.back().train_loss, 0.2 * initial);
  EXPECT_LT(dataset_loss(res.net, s.test), 0.2 * dataset_loss(net, s.test));

  // Both curves fall over the warm phase.
  EXPECT_LT(res.history[19].train_loss, res.history[0].train_loss);
  EXPECT_LT(res.history[19].test_loss, res.history[0].test_loss);
  EXPECT_DOUBLE_EQ(res.history[19].learning_rate, 0.01);
  EXPECT_NEAR(res.history[20].learning_rate, 0.001, 1e-15);

  // Returned parameters are the best-test-loss epoch.
  double best = res.history[0].test_loss;
  for (const auto& r : res.history) best = std::min(best, r.test_loss);
  EXPECT_EQ(res.history[res.best_epoch].test_loss, best);
  EXPECT_NEAR(dataset_loss(res.net, s.test.strided(cfg.test_loss_stride)), best, 1e-12);
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  const auto& s = three_run_split();
  const auto small_train = s.train.strided(4);
  TrainingConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 128;
  cfg.seed = 21;
  const auto a = train(reference_net(5), small_train, s.test, cfg);
  const auto b = train(reference_net(5), small_train, s.test, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].test_loss, b.history[e].test_loss);
  }
  EXPECT_TRUE(std::equal(a.net.params().begin(), a.net.params().end(), b.net.params().begin()));
  cfg.seed = 22;
  const auto c = train(reference_net(5), small_train, s.test, cfg);
  EXPECT_NE(a.history.back().train_loss, c.history.back().train_loss);
}

TEST(Train, DivergenceStopsWithBestSoFar) {
  const auto& s = three_run_split();
  auto net = reference_net(1);
  TrainingConfig cfg;
  cfg.max_epochs = 2;
  cfg.initial_lr = 1e300;
  const auto res = train(net, s.train.strided(8), s.test, cfg);
  EXPECT_TRUE(res.diverged);
  EXPECT_FALSE(res.divergence_reason.empty());
  for (double v : res.net.params()) EXPECT_TRUE(std::isfinite(v));
}
