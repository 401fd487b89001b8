#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "seamotion/network.hpp"

using namespace seamotion;

namespace {

Network small_net(std::size_t r, std::vector<std::size_t> hidden, std::vector<std::size_t> fc, std::size_t m,
                  std::uint64_t seed) {
  Architecture a;
  a.input_size = r;
  a.lstm_hidden = std::move(hidden);
  a.fc_widths = std::move(fc);
  a.output_size = m;
  Network net(a);
  net.init_uniform(seed);
  return net;
}

std::vector<WindowSample> random_samples(std::size_t count, std::size_t r, std::size_t n, std::size_t m,
                                         std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<WindowSample> out(count);
  for (auto& s : out) {
    s.channels = r;
    s.n = n;
    for (std::size_t i = 0; i < r * n; ++i) s.X.push_back(d(rng));
    for (std::size_t j = 0; j < m; ++j) s.Y.push_back(d(rng));
  }
  return out;
}

oracle::ScalarLstm to_scalar(ConstLstmView v, int r, int H) {
  oracle::ScalarLstm s;
  s.r = r;
  s.H = H;
  s.Wi.assign(4, std::vector<std::vector<double>>(H, std::vector<double>(r)));
  s.Wh.assign(4, std::vector<std::vector<double>>(H, std::vector<double>(H)));
  s.bi.assign(4, std::vector<double>(H));
  s.bh.assign(4, std::vector<double>(H));
  for (int g = 0; g < 4; ++g)
    for (int j = 0; j < H; ++j) {
      for (int k = 0; k < r; ++k) s.Wi[g][j][k] = v.W_input(g * H + j, k);
      for (int k = 0; k < H; ++k) s.Wh[g][j][k] = v.W_hidden(g * H + j, k);
      s.bi[g][j] = v.b_input(g * H + j);
      s.bh[g][j] = v.b_hidden(g * H + j);
    }
  return s;
}

double loss_of(const Network& net, const Batch& b) { return batch_loss(forward_batch(net, b), b.targets); }

/// Central-difference check of every parameter; returns the max relative error.
double gradient_check(Network net, const Batch& batch) {
  ParamVector grad;
  loss_and_gradient(net, batch, grad);
  const double h = 1e-6;
  double worst = 0.0;
  auto p = net.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = loss_of(net, batch);
    p[i] = keep - h;
    const double down = loss_of(net, batch);
    p[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    // Floor keeps near-zero components from producing meaningless ratios.
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST(LstmForward, ZeroWeightsStayAtZero) {
  Network net({{2, 3}}, {});
  Matrix x = Matrix::Random(5, 2);
  const auto out = lstm_forward(net.lstm(0), x);
  EXPECT_TRUE(out.hidden.isZero(0.0));
  EXPECT_TRUE(out.final_c.isZero(0.0));
}

TEST(LstmForward, ZeroWeightsUnitCellOneStep) {
  Network net({{1, 2}}, {});
  Matrix x = Matrix::Zero(1, 1);
  const Vector c0 = Vector::Ones(2);
  const auto out = lstm_forward(net.lstm(0), x, nullptr, &c0);
  for (int j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(out.final_c(j), 0.5);
    EXPECT_DOUBLE_EQ(out.final_h(j), 0.5 * std::tanh(0.5));
  }
}

TEST(LstmForward, MatchesScalarOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Network net({{2, 3}}, {});
    net.init_uniform(seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Matrix x(4, 2);
    for (int t = 0; t < 4; ++t)
      for (int k = 0; k < 2; ++k) x(t, k) = d(rng);
    Vector h0(3), c0(3);
    for (int j = 0; j < 3; ++j) {
      h0(j) = 0.3 * d(rng);
      c0(j) = 0.3 * d(rng);
    }
    const auto out = lstm_forward(net.lstm(0), x, &h0, &c0);
    const auto ref = to_scalar(net.lstm(0), 2, 3);
    std::vector<double> h(h0.data(), h0.data() + 3), c(c0.data(), c0.data() + 3);
    for (int t = 0; t < 4; ++t) {
      ref.step({x(t, 0), x(t, 1)}, h, c);
      for (int j = 0; j < 3; ++j) ASSERT_NEAR(out.hidden(t, j), h[j], 1e-12);
    }
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(out.final_c(j), c[j], 1e-12);
  }
}

TEST(LstmForward, BatchedPassMatchesSingleSequence) {
  Network net({{2, 4}}, {});
  net.init_uniform(8);
  std::mt19937_64 rng(8);
  const auto samples = random_samples(5, 2, 6, 1, rng);
  const Batch b = make_batch(samples);
  LstmTrace tr;
  lstm_layer_forward(net.lstm(0), b.inputs, 6, Matrix::Zero(4, 5), Matrix::Zero(4, 5), tr);
  for (std::size_t s = 0; s < 5; ++s) {
    Matrix x(6, 2);
    for (int t = 0; t < 6; ++t)
      for (int c = 0; c < 2; ++c) x(t, c) = samples[s].x(c, t);
    const auto single = lstm_forward(net.lstm(0), x);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(tr.hidden(j, 6 * 5 + static_cast<Eigen::Index>(s)), single.final_h(j), 1e-15);
  }
}

TEST(LstmForward, HiddenBoundedAndGatesInUnitInterval) {
  Network net({{2, 6}}, {});
  net.init_uniform(5);
  for (double& v : net.params()) v *= 3.0;
  std::mt19937_64 rng(5);
  const Batch b = make_batch(random_samples(16, 2, 10, 1, rng, 2.0));
  LstmTrace tr;
  lstm_layer_forward(net.lstm(0), b.inputs, 10, Matrix::Zero(6, 16), Matrix::Zero(6, 16), tr);
  EXPECT_LT(tr.hidden.cwiseAbs().maxCoeff(), 1.0);
  const auto H = 6;
  for (Eigen::Index c = 0; c < tr.gates.cols(); ++c)
    for (Eigen::Index j = 0; j < H; ++j)
      for (int g : {0, 1, 3}) {
        ASSERT_GT(tr.gates(g * H + j, c), 0.0);
        ASSERT_LT(tr.gates(g * H + j, c), 1.0);
      }
}

TEST(LstmForward, ShapeMismatchIsDomainError) {
  Network net({{2, 3}}, {});
  EXPECT_THROW(lstm_forward(net.lstm(0), Matrix::Zero(4, 3)), DomainError);
  const Vector h0 = Vector::Zero(2);
  EXPECT_THROW(lstm_forward(net.lstm(0), Matrix::Zero(4, 2), &h0), DomainError);
}

TEST(Forward, ZeroWeightNetworkGivesZero) {
  Network net(Architecture{});
  std::mt19937_64 rng(1);
  const auto s = random_samples(1, 2, 60, 20, rng)[0];
  for (double v : forward(net, s)) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ReferenceArchitectureOutputLength) {
  auto net = small_net(2, {50}, {50, 50, 50}, 20, 3);
  std::mt19937_64 rng(1);
  EXPECT_EQ(forward(net, random_samples(1, 2, 60, 20, rng)[0]).size(), 20u);
}

TEST(Forward, SmallSignalFollowsLastHiddenState) {
  // One FC output layer copying the hidden state: output = h_n.
  Network net({{2, 3}}, {{3, 3, Activation::identity}});
  net.init_uniform(12);
  auto fc = net.fc(0);
  fc.weights.setIdentity();
  fc.bias.setZero();
  std::mt19937_64 rng(12);
  auto s = random_samples(1, 2, 5, 3, rng)[0];
  for (double& v : s.X) v *= 1e-6;
  const auto out = forward(net, s);
  Matrix x(5, 2);
  for (int t = 0; t < 5; ++t)
    for (int c = 0; c < 2; ++c) x(t, c) = s.x(c, t);
  const auto seq = lstm_forward(net.lstm(0), x);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(out[j], seq.final_h(j), 1e-9);

  // tanh layer in its linear regime when the hidden state is tiny.
  Network lin({{2, 3}}, {{3, 3, Activation::tanh}});
  auto p = lin.params();
  std::copy(net.params().begin(), net.params().end(), p.begin());
  for (std::size_t i = 0; i < lin.lstm_shapes()[0].param_count(); ++i) p[i] *= 1e-3;
  lin.fc(0).weights.setIdentity();
  const auto tiny = lstm_forward(lin.lstm(0), x);
  const auto lin_out = forward(lin, s);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(lin_out[j], tiny.final_h(j), 1e-9);
}

TEST(Forward, FeatureMismatchIsDomainError) {
  auto net = small_net(2, {4}, {}, 3, 1);
  std::mt19937_64 rng(1);
  EXPECT_THROW(forward(net, random_samples(1, 1, 5, 3, rng)[0]), DomainError);
}

TEST(MseLoss, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0}, b{2.0, 3.0, 4.0};
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mse_loss(a, b), 1.0);
  EXPECT_EQ(mse_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}), 12.5);
  EXPECT_THROW(mse_loss(a, std::vector<double>{1.0}), DomainError);
}

TEST(Backward, ZeroEverythingGivesZeroGradient) {
  Network net(Architecture{2, {4}, {5}, 3});
  std::vector<WindowSample> batch(3);
  for (auto& s : batch) {
    s.channels = 2;
    s.n = 6;
    s.X.assign(12, 0.0);
    s.Y.assign(3, 0.0);
  }
  const auto lg = backward(net, batch);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(Backward, FiniteDifferenceSpecExample) {
  auto net = small_net(2, {4}, {5}, 3, 99);
  std::mt19937_64 rng(99);
  const Batch b = make_batch(random_samples(4, 2, 6, 3, rng));
  EXPECT_LT(gradient_check(net, b), 1e-5);
}

TEST(Backward, FiniteDifferenceRandomizedNetworks) {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> rd(1, 2), hd(1, 8), nd(1, 8), md(1, 4), layers(1, 2), fcd(0, 2),
      wd(1, 6), bd(1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t r = rd(rng), n = nd(rng), m = md(rng);
    std::vector<std::size_t> hidden(layers(rng));
    for (auto& h : hidden) h = hd(rng);
    std::vector<std::size_t> fc(fcd(rng));
    for (auto& w : fc) w = wd(rng);
    const auto net = small_net(r, hidden, fc, m, 1000 + static_cast<std::uint64_t>(trial));
    const Batch b = make_batch(random_samples(bd(rng), r, n, m, rng));
    const double err = gradient_check(net, b);
    EXPECT_LT(err, 1e-5) << "trial " << trial << ": " << net.describe();
    worst = std::max(worst, err);
  }
  RecordProperty("max_relative_error", std::to_string(worst));
}

TEST(Backward, DuplicatedBatchKeepsGradient) {
  auto net = small_net(2, {5}, {4}, 3, 4);
  std::mt19937_64 rng(4);
  auto batch = random_samples(5, 2, 7, 3, rng);
  const auto once = backward(net, batch);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto twice = backward(net, doubled);
  EXPECT_NEAR(twice.loss, once.loss, 1e-15);
  for (std::size_t i = 0; i < once.gradient.size(); ++i) EXPECT_NEAR(twice.gradient[i], once.gradient[i], 1e-14);
}

TEST(Backward, DatasetLossUsesMeanSemantics) {
  auto net = small_net(1, {3}, {}, 4, 6);
  TimeSeries ts;
  for (int i = 0; i < 80; ++i) ts.values.push_back(std::sin(0.3 * i));
  const auto ds = build_pairs(ts, std::nullopt, 10, 4, 0);
  EXPECT_NEAR(dataset_loss(net, ds.duplicated()), dataset_loss(net, ds), 1e-14);
  EXPECT_NEAR(dataset_loss(net, ds, 7), dataset_loss(net, ds, 1000), 1e-14);
}

TEST(Backward, NonFiniteInputsRaiseNumericalError) {
  auto net = small_net(1, {3}, {}, 2, 6);
  std::mt19937_64 rng(2);
  auto batch = random_samples(2, 1, 4, 2, rng);
  batch[1].X[2] = std::nan("");
  EXPECT_THROW(backward(net, batch), NumericalError);
}

TEST(CountParams, ReferenceArchitecture) {
  EXPECT_EQ(count_params(Architecture{2, {50}, {50, 50, 50}, 20}), 19470u);
  EXPECT_EQ(count_params(Network(Architecture{})), 19470u);
}

TEST(CountParams, MotionOnlyBestCell) {
  EXPECT_EQ(count_params(Architecture{1, {30}, {30, 30, 30}, 20}), 7370u);
}

TEST(CountParams, EmptyNetwork) { EXPECT_EQ(count_params(Network{}), 0u); }

TEST(CountParams, IndependentOfTimeWindow) {
  auto net = small_net(2, {50}, {50, 50, 50}, 20, 1);
  std::mt19937_64 rng(1);
  for (std::size_t n = 10; n <= 120; n += 10) {
    EXPECT_EQ(count_params(net), 19470u);
    EXPECT_EQ(forward(net, random_samples(1, 2, n, 20, rng)[0]).size(), 20u);
  }
  EXPECT_EQ(count_params(Architecture{2, {50}, {50, 50, 50}, 40}), 19470u + 20u * 51u);
}

TEST(Network, InitIsSeededAndBounded) {
  auto a = small_net(2, {50}, {50}, 20, 7);
  auto b = small_net(2, {50}, {50}, 20, 7);
  auto c = small_net(2, {50}, {50}, 20, 8);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  const double bound = 1.0 / std::sqrt(50.0);
  for (double v : a.params()) EXPECT_LE(std::abs(v), bound);
}

TEST(Network, InconsistentShapesAreDomainErrors) {
  EXPECT_THROW(Network({{2, 3}, {4, 5}}, {}), DomainError);
  EXPECT_THROW(Network({{2, 3}}, {{4, 2, Activation::identity}}), DomainError);
  EXPECT_THROW(Network(Architecture{2, {}, {}, 3}), DomainError);
}
