#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "seamotion/dataset.hpp"
#include "seamotion/error.hpp"
#include "seamotion/network.hpp"

namespace seamotion {

namespace detail {

/// Trapezoidal integral of |v - mean(v)| at spacing dt.
inline double deviation_area(std::span<const double> v, double dt) {
  const double mu = mean(v);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i] - mu);
    acc += (i == 0 || i + 1 == v.size()) ? 0.5 * a : a;
  }
  return acc * dt;
}

}  // namespace detail

/// Area-ratio accuracy of one prediction window:
///   Acc = 1 - |1 - Area(pred - mean(pred)) / Area(truth - mean(truth))|
/// with Area the trapezoidal integral of the absolute deviation. Acc <= 1 and
/// may be negative. Throws DegenerateDataError for a flat truth window.
inline double accuracy(std::span<const double> pred, std::span<const double> truth, double dt) {
  if (pred.size() != truth.size()) throw DomainError("accuracy: length mismatch");
  if (truth.size() < 2) throw DomainError("accuracy: need at least two points");
  if (!(dt > 0.0)) throw DomainError("accuracy: dt must be positive");
  const double truth_area = detail::deviation_area(truth, dt);
  if (!(truth_area > 0.0)) throw DegenerateDataError("accuracy: truth window has zero deviation area");
  return 1.0 - std::abs(1.0 - detail::deviation_area(pred, dt) / truth_area);
}

struct BoxplotSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Five-number summary with quartiles by linear interpolation between order
/// statistics (position q (N - 1) in the sorted sample).
inline BoxplotSummary boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw DomainError("boxplot_stats: empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
  };
  BoxplotSummary s;
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.mean = mean(v);
  s.count = v.size();
  return s;
}

struct AccuracyResult {
  std::vector<double> per_window;
  BoxplotSummary summary;
};

struct EvaluationReport {
  AccuracyResult accuracy;
  std::vector<std::size_t> window_p;  // anchor of each scored window
  std::size_t evaluated = 0;          // windows attempted
  std::size_t degenerate = 0;         // flat-truth windows excluded
  double degenerate_fraction = 0.0;
  double mse = 0.0;  // regularized units, over all attempted windows
};

/// Deregularized predictions and truths, one column per window.
struct WindowPredictions {
  std::vector<std::size_t> indices;
  Matrix prediction;  // m x count
  Matrix truth;
};

inline WindowPredictions predict_windows(const Network& net, const WindowedDataset& ds,
                                         std::span<const std::size_t> indices, std::size_t chunk = 1024) {
  if (net.input_size() != ds.r() || net.output_size() != ds.m())
    throw DomainError("predict_windows: network does not match dataset shape");
  const auto& cn = ds.norm[ds.channel];
  WindowPredictions out;
  out.indices.assign(indices.begin(), indices.end());
  out.prediction.resize(static_cast<Eigen::Index>(ds.m()), static_cast<Eigen::Index>(indices.size()));
  out.truth.resize(out.prediction.rows(), out.prediction.cols());
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const std::size_t len = std::min(chunk, indices.size() - start);
    const Batch b = make_batch(ds, indices.subspan(start, len));
    const Matrix pred = forward_batch(net, b);
    out.prediction.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
        (pred.array() * cn.B + cn.A).matrix();
    out.truth.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
        (b.targets.array() * cn.B + cn.A).matrix();
  }
  return out;
}

/// Scores deregularized prediction/truth columns. Flat-truth windows are
/// counted and left out of the summary.
inline EvaluationReport score_predictions(const Matrix& prediction, const Matrix& truth,
                                          std::span<const std::size_t> anchors, double dt, double B_scale = 1.0) {
  if (prediction.rows() != truth.rows() || prediction.cols() != truth.cols())
    throw DomainError("score_predictions: shape mismatch");
  EvaluationReport rep;
  rep.evaluated = static_cast<std::size_t>(truth.cols());
  double sq = 0.0;
  for (Eigen::Index k = 0; k < truth.cols(); ++k) {
    const std::span<const double> p(prediction.col(k).data(), static_cast<std::size_t>(truth.rows()));
    const std::span<const double> y(truth.col(k).data(), static_cast<std::size_t>(truth.rows()));
    sq += (prediction.col(k) - truth.col(k)).squaredNorm() / static_cast<double>(truth.rows());
    try {
      rep.accuracy.per_window.push_back(accuracy(p, y, dt));
      rep.window_p.push_back(anchors.empty() ? static_cast<std::size_t>(k) : anchors[static_cast<std::size_t>(k)]);
    } catch (const DegenerateDataError&) {
      ++rep.degenerate;
    }
  }
  rep.mse = rep.evaluated ? sq / static_cast<double>(rep.evaluated) / (B_scale * B_scale) : 0.0;
  rep.degenerate_fraction = rep.evaluated ? static_cast<double>(rep.degenerate) / static_cast<double>(rep.evaluated) : 0.0;
  if (!rep.accuracy.per_window.empty()) rep.accuracy.summary = boxplot_stats(rep.accuracy.per_window);
  return rep;
}

/// Accuracy of `net` on every `stride`-th window of `ds`, scored on
/// deregularized motions.
inline EvaluationReport evaluate(const Network& net, const WindowedDataset& ds, const NormalizationConstants& norm,
                                 std::size_t stride = 1) {
  if (ds.empty()) throw DomainError("evaluate: empty dataset");
  if (stride == 0) throw DomainError("evaluate: stride must be >= 1");
  WindowedDataset scored = ds;
  scored.norm = norm;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); i += stride) idx.push_back(i);
  const auto preds = predict_windows(net, scored, idx);
  std::vector<std::size_t> anchors;
  for (std::size_t i : idx) anchors.push_back(ds.anchor(i));
  return score_predictions(preds.prediction, preds.truth, anchors, ds.dt, norm[ds.channel].B);
}

/// Mean training accuracy minus mean test accuracy.
inline double overfit_gap(const EvaluationReport& train, const EvaluationReport& test) {
  return train.accuracy.summary.mean - test.accuracy.summary.mean;
}

inline void write_accuracy_csv(const EvaluationReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "window_p,acc\n";
  for (std::size_t k = 0; k < rep.accuracy.per_window.size(); ++k)
    out << rep.window_p[k] << ',' << detail::format_double(rep.accuracy.per_window[k]) << '\n';
}

/// One experimental cell of a summary table.
struct SummaryRow {
  std::string dataset;
  std::string channel;
  std::size_t n = 0, m = 0, w = 0;
  double noise = 0.0;
  BoxplotSummary summary;
};

inline constexpr const char* kSummaryHeader = "dataset,channel,n,m,w,noise,min,q1,median,q3,max,mean";

inline std::string summary_line(const SummaryRow& r) {
  using detail::format_double;
  return r.dataset + ',' + r.channel + ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
         std::to_string(r.w) + ',' + format_double(r.noise) + ',' + format_double(r.summary.min) + ',' +
         format_double(r.summary.q1) + ',' + format_double(r.summary.median) + ',' + format_double(r.summary.q3) +
         ',' + format_double(r.summary.max) + ',' + format_double(r.summary.mean);
}

inline void write_summary_csv(std::span<const SummaryRow> rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) out << summary_line(r) << '\n';
}

}  // namespace seamotion
