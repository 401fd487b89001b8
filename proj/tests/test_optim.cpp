#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "seamotion/optim.hpp"

using namespace seamotion;

TEST(AdamStep, ZeroGradientIsFixedPoint) {
  std::vector<double> p{0.5, -1.25, 3.0};
  const auto keep = p;
  AdamState s(p.size());
  for (int k = 0; k < 5; ++k) adam_step(p, std::vector<double>(3, 0.0), s, 0.01);
  EXPECT_EQ(p, keep);
  EXPECT_EQ(s.step_count, 5u);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 5.0);
  std::vector<double> p(50, 0.0), g(50);
  for (double& x : g) x = d(rng);
  AdamState s;
  adam_step(p, g, s, 0.01);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(std::abs(p[i]), 0.01, 0.01 * 1e-6);
    EXPECT_EQ(std::signbit(p[i]), !std::signbit(g[i]));
  }
}

TEST(AdamStep, HandComputedSecondStep) {
  std::vector<double> p{1.0};
  AdamState s(1);
  adam_step(p, std::vector<double>{2.0}, s, 0.1);
  adam_step(p, std::vector<double>{-1.0}, s, 0.1);
  const double m = 0.9 * 0.2 + 0.1 * -1.0;
  const double v = 0.999 * 0.004 + 0.001 * 1.0;
  const double m_hat = m / (1.0 - 0.81), v_hat = v / (1.0 - 0.999 * 0.999);
  const double first = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(p[0], first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(AdamStep, IdenticalInputsGiveIdenticalTrajectories) {
  auto run = [] {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> d;
    std::vector<double> p(20, 0.1), g(20);
    AdamState s;
    for (int k = 0; k < 30; ++k) {
      for (double& x : g) x = d(rng);
      adam_step(p, g, s, 0.01);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(AdamStep, Errors) {
  std::vector<double> p{1.0, 2.0};
  AdamState s;
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0, 1.0}, s, 0.0), DomainError);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0, 1.0}, s, -0.1), DomainError);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0}, s, 0.1), DomainError);
  AdamState wrong(3);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0, 1.0}, wrong, 0.1), DomainError);
}

TEST(LrSchedule, Examples) {
  const TrainingConfig c;
  EXPECT_DOUBLE_EQ(lr_schedule(0, c), 0.01);
  EXPECT_DOUBLE_EQ(lr_schedule(19, c), 0.01);
  EXPECT_NEAR(lr_schedule(20, c), 0.001, 1e-15);
  EXPECT_NEAR(lr_schedule(25, c), 0.001, 1e-15);
  EXPECT_NEAR(lr_schedule(119, c), 0.001, 1e-15);
  EXPECT_NEAR(lr_schedule(120, c), 0.0001, 1e-16);
  EXPECT_NEAR(lr_schedule(150, c), 0.0001, 1e-16);
  EXPECT_NEAR(lr_schedule(220, c), 0.00001, 1e-17);
}

TEST(TrainingConfig, DefaultsAndValidation) {
  TrainingConfig c;
  EXPECT_EQ(c.batch_size, 512u);
  EXPECT_EQ(c.initial_lr, 0.01);
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
