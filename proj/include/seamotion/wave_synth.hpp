#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "seamotion/error.hpp"
#include "seamotion/time_series.hpp"

namespace seamotion {

/// JONSWAP shape parameters. alpha is derived: use make_spectrum() or
/// calibrate_alpha() rather than setting it by hand.
struct SpectrumParams {
  double Hs = 1.0;  // m
  double Tp = 10.0;  // s
  double gamma = 2.4;
  double tau_low = 0.09;   // applies for omega < omega_p
  double tau_high = 0.07;  // applies for omega > omega_p
  double alpha = 0.0;

  double peak_omega() const { return 2.0 * std::numbers::pi / Tp; }

  /// Hs = 0 is accepted and yields a zero spectrum.
  void validate() const {
    if (!(Hs >= 0.0) || !std::isfinite(Hs)) throw DomainError("SpectrumParams: Hs must be >= 0");
    if (!(Tp > 0.0) || !std::isfinite(Tp)) throw DomainError("SpectrumParams: Tp must be > 0");
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw DomainError("SpectrumParams: gamma must be >= 1");
    if (!(tau_low > 0.0) || !(tau_high > 0.0)) throw DomainError("SpectrumParams: tau must be > 0");
  }
};

/// Evaluates the JONSWAP density S(omega) in m^2 s. The omega^-5 singularity
/// at zero is removed by its limit.
inline double jonswap_density(double omega, const SpectrumParams& p) {
  if (!std::isfinite(omega) || omega < 0.0) throw DomainError("jonswap_density: omega must be finite and >= 0");
  if (omega == 0.0 || p.Hs == 0.0) return 0.0;
  const double wp = p.peak_omega();
  const double ratio = omega / wp;
  const double r4 = ratio * ratio * ratio * ratio;
  const double pm_exp = -1.25 / r4;
  // exp(-1.25 r^-4) underflows long before omega^-5 overflows.
  if (pm_exp < -700.0) return 0.0;
  const double tau = omega < wp ? p.tau_low : p.tau_high;
  const double dev = omega - wp;
  const double peak_shape = std::exp(-(dev * dev) / (2.0 * tau * tau * wp * wp));
  return p.alpha * p.Hs * p.Hs * (wp * wp * wp * wp) / std::pow(omega, 5.0) * std::exp(pm_exp) *
         std::pow(p.gamma, peak_shape);
}

/// Calibration grid: uniform trapezoid on [0, 10 omega_p].
inline constexpr std::size_t kAlphaGridPoints = 20001;
inline constexpr double kAlphaGridUpper = 10.0;

/// Zeroth moment of p's density on the calibration grid.
inline double zeroth_moment(const SpectrumParams& p) {
  const double upper = kAlphaGridUpper * p.peak_omega();
  const double h = upper / static_cast<double>(kAlphaGridPoints - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < kAlphaGridPoints; ++i) {
    const double w = (i + 1 == kAlphaGridPoints) ? upper : h * static_cast<double>(i);
    const double s = jonswap_density(w, p);
    acc += (i == 0 || i + 1 == kAlphaGridPoints) ? 0.5 * s : s;
  }
  return acc * h;
}

/// alpha such that the calibration-grid zeroth moment equals Hs^2 / 16.
/// The density is linear in alpha*Hs^2, so one unit-alpha, unit-Hs integral
/// fixes it; alpha does not depend on Hs.
inline double calibrate_alpha(const SpectrumParams& params) {
  params.validate();
  SpectrumParams unit = params;
  unit.Hs = 1.0;
  unit.alpha = 1.0;
  const double m0 = zeroth_moment(unit);
  if (!(m0 > 0.0) || !std::isfinite(m0))
    throw NumericalError("calibrate_alpha: unit-alpha moment is not positive and finite");
  return (1.0 / 16.0) / m0;
}

/// Builds calibrated parameters.
inline SpectrumParams make_spectrum(double Hs, double Tp, double gamma = 2.4) {
  SpectrumParams p;
  p.Hs = Hs;
  p.Tp = Tp;
  p.gamma = gamma;
  p.alpha = calibrate_alpha(p);
  return p;
}

/// Random-phase superposition layout: equal-width bins over
/// [low_factor, high_factor] * omega_p, one jittered frequency per bin.
struct SynthesisOptions {
  std::size_t bins = 400;
  double low_factor = 0.25;
  double high_factor = 4.0;
  double start_time = 0.0;
};

/// Seeded irregular wave elevation with floor(duration / dt) samples.
/// Component k has frequency omega_lo + (k + u_k) d_omega and amplitude
/// sqrt(2 S(omega_k) d_omega); u_k and the phase are drawn in that order
/// from a mt19937_64 seeded with `seed`.
inline TimeSeries synthesize_wave(const SpectrumParams& params, double duration, double dt, std::uint64_t seed,
                                  const SynthesisOptions& opts = {}) {
  params.validate();
  if (!(dt > 0.0) || !(duration > 0.0)) throw DomainError("synthesize_wave: duration and dt must be positive");
  if (opts.bins < 200 || !(opts.low_factor > 0.0) || !(opts.high_factor > opts.low_factor))
    throw ConfigError("synthesize_wave: need >= 200 bins over a non-empty band");
  const double wp = params.peak_omega();
  const double w_lo = opts.low_factor * wp;
  const double w_hi = opts.high_factor * wp;
  if (w_hi * dt > std::numbers::pi)
    throw ConfigError("synthesize_wave: dt too coarse to resolve the top of the synthesis band");
  const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
  if (n < 2) throw DomainError("synthesize_wave: duration shorter than two samples");

  TimeSeries out;
  out.dt = dt;
  out.unit = "m";
  out.start_time = opts.start_time;
  out.values.assign(n, 0.0);
  if (params.Hs == 0.0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double dw = (w_hi - w_lo) / static_cast<double>(opts.bins);
  std::vector<double> freq(opts.bins), amp(opts.bins), phase(opts.bins);
  for (std::size_t k = 0; k < opts.bins; ++k) {
    const double jitter = unit(rng);
    phase[k] = 2.0 * std::numbers::pi * unit(rng);
    freq[k] = w_lo + (static_cast<double>(k) + jitter) * dw;
    amp[k] = std::sqrt(2.0 * jonswap_density(freq[k], params) * dw);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = out.time_at(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < opts.bins; ++k) acc += amp[k] * std::cos(freq[k] * t + phase[k]);
    out.values[i] = acc;
  }
  return out;
}

struct SpectrumEstimate {
  std::vector<double> frequencies;  // rad/s
  std::vector<double> densities;    // m^2 s
  std::size_t segment_count = 0;

  double bin_width() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }

  /// Rectangle-rule integral of the density (matches the estimator's Parseval
  /// normalization).
  double integral() const {
    double acc = 0.0;
    for (double d : densities) acc += d;
    return acc * bin_width();
  }

  std::size_t peak_index() const {
    return static_cast<std::size_t>(std::max_element(densities.begin(), densities.end()) - densities.begin());
  }
  double peak_frequency() const { return frequencies.at(peak_index()); }
};

namespace detail {

/// |X_k|^2 for k = 0..n/2 of a real sequence.
inline std::vector<double> power_spectrum(const std::vector<double>& x) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, x);
  std::vector<double> out(x.size() / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(freq[k]);
  return out;
}

}  // namespace detail

/// Averaged periodogram: per-segment mean removal, periodic Hann window,
/// 50% overlap, one-sided density in angular frequency. The rectangle-rule
/// integral of the estimate equals the window-weighted variance.
inline SpectrumEstimate estimate_spectrum(const TimeSeries& series, std::size_t segment_length) {
  series.validate();
  if (segment_length < 2 || segment_length > series.size())
    throw DomainError("estimate_spectrum: segment length must be in [2, series length]");
  const std::size_t seg = segment_length;
  const std::size_t hop = std::max<std::size_t>(1, seg / 2);
  const std::size_t count = 1 + (series.size() - seg) / hop;

  std::vector<double> window(seg);
  double wsq = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg)));
    wsq += window[i] * window[i];
  }

  SpectrumEstimate est;
  est.segment_count = count;
  est.densities.assign(seg / 2 + 1, 0.0);
  std::vector<double> buf(seg);
  for (std::size_t s = 0; s < count; ++s) {
    const double* x = series.values.data() + s * hop;
    double mu = 0.0;
    for (std::size_t i = 0; i < seg; ++i) mu += x[i];
    mu /= static_cast<double>(seg);
    for (std::size_t i = 0; i < seg; ++i) buf[i] = (x[i] - mu) * window[i];
    const auto pw = detail::power_spectrum(buf);
    for (std::size_t k = 0; k < pw.size(); ++k) est.densities[k] += pw[k];
  }
  const double scale = series.dt / (std::numbers::pi * wsq * static_cast<double>(count));
  est.frequencies.resize(est.densities.size());
  for (std::size_t k = 0; k < est.densities.size(); ++k) {
    const bool edge = (k == 0) || (seg % 2 == 0 && k == seg / 2);
    est.densities[k] *= edge ? 0.5 * scale : scale;
    est.frequencies[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / (static_cast<double>(seg) * series.dt);
  }
  return est;
}

/// Element-wise mean of estimates on a shared grid.
inline SpectrumEstimate average_spectra(const std::vector<SpectrumEstimate>& estimates) {
  if (estimates.empty()) throw DomainError("average_spectra: empty input");
  SpectrumEstimate out = estimates.front();
  for (std::size_t e = 1; e < estimates.size(); ++e) {
    if (estimates[e].densities.size() != out.densities.size())
      throw DomainError("average_spectra: grids differ");
    for (std::size_t k = 0; k < out.densities.size(); ++k) out.densities[k] += estimates[e].densities[k];
    out.segment_count += estimates[e].segment_count;
  }
  for (double& d : out.densities) d /= static_cast<double>(estimates.size());
  return out;
}

inline void write_spectrum_csv(const SpectrumEstimate& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "omega_rad_s,density_m2s\n";
  for (std::size_t k = 0; k < est.frequencies.size(); ++k)
    out << detail::format_double(est.frequencies[k]) << ',' << detail::format_double(est.densities[k]) << '\n';
}

}  // namespace seamotion
