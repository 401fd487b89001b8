#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamotion/error.hpp"
#include "seamotion/time_series.hpp"
#include "seamotion/wave_synth.hpp"

namespace seamotion {

/// Surrogate platform dynamics. Gains are tuned so that on WC3 the heave and
/// surge standard deviations relative to the wave match the ratios of the
/// measured campaign-wide scales (heave/wave 0.335, surge/wave 1.164), with
/// the surge variance dominated by the slow-drift band.
struct ResponseParams {
  double heave_natural_period = 22.0;  // s
  double heave_damping_ratio = 0.2;
  double heave_gain = 0.4427;  // m/m
  double surge_wf_gain = 0.45;  // m/m
  double surge_natural_period = 180.0;  // s
  double surge_damping_ratio = 0.05;
  double drift_coefficient = 0.0936;  // m/m^2
  /// Low-pass applied to the squared elevation before it drives the drift
  /// oscillator (Butterworth damping by default).
  double envelope_lowpass_period = 60.0;  // s
  double envelope_lowpass_damping = std::numbers::sqrt2 / 2.0;

  void validate() const {
    auto ratio_ok = [](double z) { return z > 0.0 && z < 1.0; };
    if (!(heave_natural_period > 0.0) || !(surge_natural_period > 0.0) || !(envelope_lowpass_period > 0.0))
      throw DomainError("ResponseParams: periods must be positive");
    if (!ratio_ok(heave_damping_ratio) || !ratio_ok(surge_damping_ratio) || !ratio_ok(envelope_lowpass_damping))
      throw DomainError("ResponseParams: damping ratios must lie in (0, 1)");
  }
};

inline ResponseParams default_response_params() { return ResponseParams{}; }

/// Damped linear oscillator x'' + 2 zeta wn x' + wn^2 x = wn^2 gain u(t),
/// discretized exactly for an input held constant over each step.
class SecondOrderFilter {
public:
  SecondOrderFilter(double natural_period, double damping_ratio, double gain, double dt) {
    if (!(natural_period > 0.0) || !(damping_ratio > 0.0 && damping_ratio < 1.0))
      throw DomainError("SecondOrderFilter: need period > 0 and damping in (0, 1)");
    if (!(dt > 0.0)) throw DomainError("SecondOrderFilter: dt must be positive");
    // Aliased dynamics are stable but meaningless.
    if (dt >= natural_period / 2.0)
      throw ConfigError("SecondOrderFilter: dt must be below half the natural period");
    const double wn = 2.0 * std::numbers::pi / natural_period;
    const double a = damping_ratio * wn;
    const double wd = wn * std::sqrt(1.0 - damping_ratio * damping_ratio);
    const double e = std::exp(-a * dt);
    const double c = std::cos(wd * dt);
    const double s = std::sin(wd * dt);
    ad_ = {e * (c + a / wd * s), e * s / wd, -e * wn * wn / wd * s, e * (c - a / wd * s)};
    // Bd = A^-1 (Ad - I) B with B = (0, gain wn^2).
    bd_ = {gain * (-2.0 * a * ad_[1] - (ad_[3] - 1.0)), gain * wn * wn * ad_[1]};
  }

  /// Response from rest; output sample k is the position after k steps.
  std::vector<double> apply(std::span<const double> input) const {
    std::vector<double> out(input.size());
    double x = 0.0, v = 0.0;
    for (std::size_t k = 0; k < input.size(); ++k) {
      out[k] = x;
      const double xn = ad_[0] * x + ad_[1] * v + bd_[0] * input[k];
      const double vn = ad_[2] * x + ad_[3] * v + bd_[1] * input[k];
      x = xn;
      v = vn;
    }
    return out;
  }

private:
  std::array<double, 4> ad_{};
  std::array<double, 2> bd_{};
};

inline TimeSeries heave_response(const TimeSeries& wave, const ResponseParams& params) {
  wave.validate();
  params.validate();
  SecondOrderFilter filt(params.heave_natural_period, params.heave_damping_ratio, params.heave_gain, wave.dt);
  TimeSeries out = wave;
  out.values = filt.apply(wave.values);
  return out;
}

/// Wave-frequency and slow-drift parts of surge; their sum is surge_response.
struct SurgeComponents {
  std::vector<double> wave_frequency;
  std::vector<double> slow_drift;
  std::vector<double> forcing;  // squared-envelope estimate 2 * LP(eta^2)
};

inline SurgeComponents surge_components(const TimeSeries& wave, const ResponseParams& params) {
  wave.validate();
  params.validate();
  SurgeComponents c;
  c.wave_frequency.resize(wave.size());
  std::vector<double> sq(wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i) {
    c.wave_frequency[i] = params.surge_wf_gain * wave.values[i];
    sq[i] = wave.values[i] * wave.values[i];
  }
  // LP(eta^2) keeps a^2/2 of a narrow-band a cos(wt), so 2 LP(eta^2) ~ a^2.
  SecondOrderFilter lowpass(params.envelope_lowpass_period, params.envelope_lowpass_damping, 2.0, wave.dt);
  c.forcing = lowpass.apply(sq);
  SecondOrderFilter drift(params.surge_natural_period, params.surge_damping_ratio, params.drift_coefficient,
                          wave.dt);
  c.slow_drift = drift.apply(c.forcing);
  return c;
}

inline TimeSeries surge_response(const TimeSeries& wave, const ResponseParams& params) {
  auto c = surge_components(wave, params);
  TimeSeries out = wave;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = c.wave_frequency[i] + c.slow_drift[i];
  return out;
}

enum class DatasetRole { training, test };

inline std::string to_string(DatasetRole r) { return r == DatasetRole::test ? "test" : "training"; }
inline DatasetRole role_from_string(const std::string& s) {
  if (s == "test") return DatasetRole::test;
  if (s == "training") return DatasetRole::training;
  throw LoadError("unknown dataset role '" + s + "'");
}

struct WaveCondition {
  std::string id;
  double Hs = 0.0;
  double Tp = 0.0;
  std::string note;
  DatasetRole role = DatasetRole::training;
};

/// The eight conditions of the model-test campaign. WC2 is held out.
inline std::vector<WaveCondition> campaign_conditions() {
  using enum DatasetRole;
  return {
      {"WC1", 13.4, 14.2, "Short Tp", training}, {"WC2", 13.4, 14.7, "Seed 1", test},
      {"WC3", 13.4, 14.7, "Seed 2", training},   {"WC4", 13.4, 15.7, "Long Tp", training},
      {"WC5", 16.9, 14.4, "Short Tp", training}, {"WC6", 16.9, 15.9, "Seed 1", training},
      {"WC7", 16.9, 15.9, "Seed 2", training},   {"WC8", 16.9, 16.9, "Long Tp", training},
  };
}

struct CampaignRun {
  WaveCondition condition;
  TimeSeries wave;
  TimeSeries heave;
  TimeSeries surge;
  std::uint64_t seed = 0;
};

struct CampaignOptions {
  double duration = 10800.0;  // s, 3 h full scale
  double dt = 0.775;          // s
  /// Discarded lead-in so the slow-drift oscillator starts near steady state.
  double spinup = 1800.0;  // s
  SynthesisOptions synthesis{};
};

/// splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed derived from a base seed and a label (FNV-1a), so a condition's seed
/// does not depend on its position in the list.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(base ^ mix_seed(h));
}

inline CampaignRun simulate_run(const WaveCondition& cond, std::uint64_t seed, const ResponseParams& params,
                                const CampaignOptions& opts) {
  const auto spin = static_cast<std::size_t>(std::ceil(opts.spinup / opts.dt - 1e-9));
  const auto keep = static_cast<std::size_t>(std::floor(opts.duration / opts.dt + 1e-9));
  SynthesisOptions syn = opts.synthesis;
  syn.start_time = -static_cast<double>(spin) * opts.dt;
  const auto spec = make_spectrum(cond.Hs, cond.Tp);
  TimeSeries full = synthesize_wave(spec, static_cast<double>(spin + keep) * opts.dt, opts.dt, seed, syn);
  TimeSeries heave = heave_response(full, params);
  TimeSeries surge = surge_response(full, params);
  auto trim = [&](TimeSeries ts) {
    ts.values.erase(ts.values.begin(), ts.values.begin() + static_cast<std::ptrdiff_t>(spin));
    ts.start_time = 0.0;
    return ts;
  };
  return CampaignRun{cond, trim(std::move(full)), trim(std::move(heave)), trim(std::move(surge)), seed};
}

/// One run per condition, seeded from (base_seed, condition id).
inline std::vector<CampaignRun> generate_campaign(const std::vector<WaveCondition>& conditions,
                                                  std::uint64_t base_seed, const ResponseParams& params,
                                                  const CampaignOptions& opts = {}) {
  params.validate();
  std::set<std::string> seen;
  for (const auto& c : conditions)
    if (!seen.insert(c.id).second) throw ConfigError("generate_campaign: duplicate condition id " + c.id);
  std::vector<CampaignRun> runs;
  runs.reserve(conditions.size());
  for (const auto& c : conditions) runs.push_back(simulate_run(c, derive_seed(base_seed, c.id), params, opts));
  return runs;
}

inline const CampaignRun& find_run(const std::vector<CampaignRun>& campaign, const std::string& id) {
  for (const auto& r : campaign)
    if (r.condition.id == id) return r;
  throw ConfigError("campaign has no run '" + id + "'");
}

inline nlohmann::json to_json(const ResponseParams& p) {
  return {{"heave_natural_period", p.heave_natural_period},
          {"heave_damping_ratio", p.heave_damping_ratio},
          {"heave_gain", p.heave_gain},
          {"surge_wf_gain", p.surge_wf_gain},
          {"surge_natural_period", p.surge_natural_period},
          {"surge_damping_ratio", p.surge_damping_ratio},
          {"drift_coefficient", p.drift_coefficient},
          {"envelope_lowpass_period", p.envelope_lowpass_period},
          {"envelope_lowpass_damping", p.envelope_lowpass_damping}};
}

inline ResponseParams response_params_from_json(const nlohmann::json& j) {
  ResponseParams p = default_response_params();
  p.heave_natural_period = j.value("heave_natural_period", p.heave_natural_period);
  p.heave_damping_ratio = j.value("heave_damping_ratio", p.heave_damping_ratio);
  p.heave_gain = j.value("heave_gain", p.heave_gain);
  p.surge_wf_gain = j.value("surge_wf_gain", p.surge_wf_gain);
  p.surge_natural_period = j.value("surge_natural_period", p.surge_natural_period);
  p.surge_damping_ratio = j.value("surge_damping_ratio", p.surge_damping_ratio);
  p.drift_coefficient = j.value("drift_coefficient", p.drift_coefficient);
  p.envelope_lowpass_period = j.value("envelope_lowpass_period", p.envelope_lowpass_period);
  p.envelope_lowpass_damping = j.value("envelope_lowpass_damping", p.envelope_lowpass_damping);
  p.validate();
  return p;
}

/// Writes `<id>_wave.csv`, `<id>_heave.csv`, `<id>_surge.csv` per run and a
/// `manifest.json` with conditions, seeds and response parameters.
inline void write_campaign(const std::filesystem::path& dir, const std::vector<CampaignRun>& runs,
                           const ResponseParams& params, std::uint64_t base_seed) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "seamotion-campaign";
  manifest["version"] = 1;
  manifest["base_seed"] = base_seed;
  manifest["response_params"] = to_json(params);
  manifest["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    write_series_csv(r.wave, (dir / (r.condition.id + "_wave.csv")).string());
    write_series_csv(r.heave, (dir / (r.condition.id + "_heave.csv")).string());
    write_series_csv(r.surge, (dir / (r.condition.id + "_surge.csv")).string());
    manifest["runs"].push_back({{"id", r.condition.id},
                                {"Hs", r.condition.Hs},
                                {"Tp", r.condition.Tp},
                                {"note", r.condition.note},
                                {"role", to_string(r.condition.role)},
                                {"seed", r.seed},
                                {"dt", r.wave.dt},
                                {"samples", r.wave.size()}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

struct LoadedCampaign {
  std::vector<CampaignRun> runs;
  ResponseParams params;
  std::uint64_t base_seed = 0;
};

inline LoadedCampaign read_campaign(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw LoadError("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed campaign manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "seamotion-campaign") throw LoadError("not a campaign manifest");
  LoadedCampaign lc;
  lc.base_seed = manifest.value("base_seed", std::uint64_t{0});
  lc.params = response_params_from_json(manifest.value("response_params", nlohmann::json::object()));
  for (const auto& jr : manifest.at("runs")) {
    CampaignRun r;
    r.condition.id = jr.at("id").get<std::string>();
    r.condition.Hs = jr.at("Hs").get<double>();
    r.condition.Tp = jr.at("Tp").get<double>();
    r.condition.note = jr.value("note", "");
    r.condition.role = role_from_string(jr.at("role").get<std::string>());
    r.seed = jr.at("seed").get<std::uint64_t>();
    r.wave = read_series_csv((dir / (r.condition.id + "_wave.csv")).string());
    r.heave = read_series_csv((dir / (r.condition.id + "_heave.csv")).string());
    r.surge = read_series_csv((dir / (r.condition.id + "_surge.csv")).string());
    if (r.wave.size() != r.heave.size() || r.wave.size() != r.surge.size())
      throw LoadError("run " + r.condition.id + ": channel lengths differ");
    lc.runs.push_back(std::move(r));
  }
  return lc;
}

}  // namespace seamotion
