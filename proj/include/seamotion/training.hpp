#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "seamotion/dataset.hpp"
#include "seamotion/network.hpp"
#include "seamotion/optim.hpp"

namespace seamotion {

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
};

struct TrainResult {
  Network net;  // parameters with the lowest test loss seen
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string divergence_reason;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam over seeded shuffles of the training windows. Records the
/// mean training batch loss and the test loss every epoch and returns the
/// parameters with the lowest test loss. A non-finite loss stops training and
/// returns the best parameters so far with `diverged` set.
inline TrainResult train(const Network& initial, const WindowedDataset& training, const WindowedDataset& test,
                         const TrainingConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (training.empty()) throw DegenerateDataError("train: empty training set");
  if (training.n() != test.n() || training.m() != test.m() || training.w() != test.w() || training.r() != test.r())
    throw ConfigError("train: training and test datasets differ in (n, m, w, r)");
  if (initial.input_size() != training.r() || initial.output_size() != training.m())
    throw DomainError("train: network shape does not match the datasets");

  TrainResult result;
  result.net = initial;
  if (config.max_epochs == 0) return result;

  Network net = initial;
  AdamState adam(net.param_count());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const WindowedDataset monitor = test.empty() ? WindowedDataset{} : test.strided(config.test_loss_stride);
  ParamVector grad;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        const Batch batch = make_batch(training, std::span(order).subspan(start, end - start));
        const double loss = loss_and_gradient(net, batch, grad);
        if (!std::isfinite(loss)) throw NumericalError("non-finite training loss");
        loss_sum += loss * static_cast<double>(end - start);
        adam_step(net.params(), grad, adam, lr);
      }
    } catch (const NumericalError& e) {
      result.diverged = true;
      result.divergence_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.test_loss = monitor.empty() ? rec.train_loss : dataset_loss(net, monitor);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!std::isfinite(rec.test_loss)) {
      result.diverged = true;
      result.divergence_reason = "epoch " + std::to_string(epoch) + ": non-finite test loss";
      return result;
    }
    if (rec.test_loss < best) {
      best = rec.test_loss;
      result.best_epoch = epoch;
      result.net = net;
    }
  }
  return result;
}

}  // namespace seamotion
