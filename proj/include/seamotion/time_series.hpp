#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "seamotion/error.hpp"

namespace seamotion {

/// Uniformly sampled scalar signal. Sample i sits at start_time + i * dt.
struct TimeSeries {
  double dt = 1.0;
  std::vector<double> values;
  std::string unit = "m";
  double start_time = 0.0;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t i) const { return start_time + static_cast<double>(i) * dt; }

  /// Throws DomainError unless dt > 0, finite, and at least two samples.
  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("TimeSeries: dt must be positive");
    if (values.size() < 2) throw DomainError("TimeSeries: need at least two samples");
  }
};

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mu = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw LoadError(context + ": cannot parse number '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Writes `time_s,value` rows. Values use shortest round-trip formatting so a
/// read back reproduces every sample bit-exactly.
inline void write_series_csv(const TimeSeries& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "time_s,value\n";
  for (std::size_t i = 0; i < ts.size(); ++i)
    out << detail::format_double(ts.time_at(i)) << ',' << detail::format_double(ts.values[i]) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

/// Reads a `time_s,value` CSV. dt is taken from the first two time stamps and
/// every later stamp must agree with uniform sampling to 1e-6 relative.
inline TimeSeries read_series_csv(const std::string& path, std::string unit = "m") {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_s,value") throw LoadError(path + ": expected header 'time_s,value'");
  std::vector<double> times;
  TimeSeries ts;
  ts.unit = std::move(unit);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != 2) throw LoadError(path + ": row " + std::to_string(row) + " needs two columns");
    times.push_back(detail::parse_double(cols[0], path));
    ts.values.push_back(detail::parse_double(cols[1], path));
  }
  if (ts.values.size() < 2) throw LoadError(path + ": need at least two samples");
  ts.start_time = times.front();
  ts.dt = times[1] - times[0];
  if (!(ts.dt > 0.0)) throw LoadError(path + ": time stamps must increase");
  for (std::size_t i = 2; i < times.size(); ++i) {
    const double expected = ts.start_time + static_cast<double>(i) * ts.dt;
    if (std::abs(times[i] - expected) > 1e-6 * std::max(1.0, std::abs(expected)))
      throw LoadError(path + ": non-uniform sampling at row " + std::to_string(i + 2));
  }
  return ts;
}

}  // namespace seamotion
