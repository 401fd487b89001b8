#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamotion/error.hpp"
#include "seamotion/time_series.hpp"
#include "seamotion/vessel_surrogate.hpp"

namespace seamotion {

enum class Channel { wave, heave, surge };

inline std::string to_string(Channel c) {
  switch (c) {
    case Channel::wave: return "wave";
    case Channel::heave: return "heave";
    case Channel::surge: return "surge";
  }
  return "?";
}

inline Channel channel_from_string(const std::string& s) {
  if (s == "heave") return Channel::heave;
  if (s == "surge") return Channel::surge;
  if (s == "wave") return Channel::wave;
  throw ConfigError("unknown channel '" + s + "' (expected heave, surge or wave)");
}

inline const TimeSeries& channel_series(const CampaignRun& run, Channel c) {
  switch (c) {
    case Channel::wave: return run.wave;
    case Channel::heave: return run.heave;
    case Channel::surge: return run.surge;
  }
  throw DomainError("bad channel");
}

/// Affine standardization x -> (x - A) / B for one channel.
struct ChannelNorm {
  double A = 0.0;
  double B = 1.0;
};

/// Campaign-wide constants, one pair per channel.
struct NormalizationConstants {
  ChannelNorm wave, heave, surge;

  const ChannelNorm& operator[](Channel c) const {
    switch (c) {
      case Channel::wave: return wave;
      case Channel::heave: return heave;
      case Channel::surge: return surge;
    }
    throw DomainError("bad channel");
  }
  ChannelNorm& operator[](Channel c) {
    return const_cast<ChannelNorm&>(static_cast<const NormalizationConstants&>(*this)[c]);
  }
};

/// Constants measured in the physical model test (cm, model scale). Kept as a
/// reference fixture; the synthetic campaign computes its own.
inline NormalizationConstants model_test_constants_cm() {
  NormalizationConstants n;
  n.heave = {-0.86, 2.264};
  n.surge = {-100.341, 7.876};
  n.wave = {0.422, 6.766};
  return n;
}

/// A = mean of per-run means, B = mean of per-run population standard
/// deviations, per channel.
inline NormalizationConstants compute_norm_constants(const std::vector<CampaignRun>& campaign) {
  if (campaign.empty()) throw DomainError("compute_norm_constants: empty campaign");
  NormalizationConstants out;
  for (Channel c : {Channel::wave, Channel::heave, Channel::surge}) {
    double a = 0.0, b = 0.0;
    for (const auto& run : campaign) {
      const auto& v = channel_series(run, c).values;
      a += mean(v);
      b += stddev(v);
    }
    const auto k = static_cast<double>(campaign.size());
    out[c] = {a / k, b / k};
    if (!(out[c].B > 0.0))
      throw DegenerateDataError("compute_norm_constants: channel " + to_string(c) + " has zero spread");
  }
  return out;
}

inline TimeSeries regularize(const TimeSeries& series, double A, double B) {
  if (!(B > 0.0) || !std::isfinite(B)) throw DomainError("regularize: B must be positive");
  TimeSeries out = series;
  for (double& x : out.values) x = (x - A) / B;
  out.unit = "1";
  return out;
}

inline TimeSeries deregularize(const TimeSeries& series, double A, double B) {
  if (!(B > 0.0) || !std::isfinite(B)) throw DomainError("deregularize: B must be positive");
  TimeSeries out = series;
  for (double& x : out.values) x = x * B + A;
  out.unit = "m";
  return out;
}

/// Adds seeded N(0, (I sigma)^2) samples, sigma being the population standard
/// deviation of the whole input series. I = 0 returns an exact copy.
inline TimeSeries add_noise(const TimeSeries& series, double level, std::uint64_t seed) {
  if (!(level >= 0.0) || !std::isfinite(level)) throw DomainError("add_noise: noise level must be >= 0");
  TimeSeries out = series;
  if (level == 0.0) return out;
  const double sigma = level * stddev(series.values);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& x : out.values) x += sigma * noise(rng);
  return out;
}

/// One materialized input/output pair. X is row-major [channels x n]:
/// channel 0 is the motion, channel 1 (when present) the wave.
struct WindowSample {
  std::vector<double> X;
  std::vector<double> Y;
  std::size_t p = 0;
  std::size_t channels = 1;
  std::size_t n = 0;

  double x(std::size_t channel, std::size_t t) const { return X[channel * n + t]; }
};

/// Regularized series one run contributes. Inputs may be noisy; target is
/// always the clean motion.
struct WindowSource {
  std::string run_id;
  double noise_level = 0.0;
  std::vector<double> motion_input;
  std::vector<double> wave_input;  // empty when r = 1
  std::vector<double> target;
};

struct WindowRef {
  std::uint32_t source = 0;
  std::uint32_t p = 0;
};

/// Input/output pairs over one or more sources, stored as anchors into the
/// source series. Motion rows cover t_{p-n}..t_{p-1}, wave rows
/// t_{p+w-n}..t_{p+w-1}, targets t_p..t_{p+m-1}.
class WindowedDataset {
public:
  WindowedDataset() = default;
  WindowedDataset(std::size_t n, std::size_t m, std::size_t w, std::size_t r) : n_(n), m_(m), w_(w), r_(r) {
    if (n == 0 || m == 0) throw DomainError("WindowedDataset: n and m must be >= 1");
    if (r != 1 && r != 2) throw DomainError("WindowedDataset: feature count must be 1 or 2");
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t w() const { return w_; }
  std::size_t r() const { return r_; }
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  Channel channel = Channel::heave;
  DatasetRole role = DatasetRole::training;
  NormalizationConstants norm{};
  double dt = 0.775;

  const std::vector<WindowSource>& sources() const { return sources_; }
  const std::vector<WindowRef>& index() const { return index_; }

  /// Distinct noise levels across sources, ascending.
  std::vector<double> noise_levels() const {
    std::vector<double> out;
    for (const auto& s : sources_) out.push_back(s.noise_level);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Anchors valid for a series of length L: p in [n, L - max(m, w)].
  static std::size_t count_for_length(std::size_t L, std::size_t n, std::size_t m, std::size_t w) {
    const std::size_t ahead = std::max(m, w);
    if (L < n + ahead) return 0;
    return L - n - ahead + 1;
  }

  /// Appends every valid anchor of one source. Returns the number added.
  std::size_t add_source(WindowSource src) {
    const std::size_t L = src.target.size();
    if (src.motion_input.size() != L) throw DomainError("add_source: motion input and target lengths differ");
    if ((r_ == 2) != !src.wave_input.empty()) throw DomainError("add_source: wave input present iff r = 2");
    if (r_ == 2 && src.wave_input.size() != L) throw DomainError("add_source: wave input length differs");
    const std::size_t count = count_for_length(L, n_, m_, w_);
    if (count == 0) throw DegenerateDataError("add_source: series too short for a single window");
    const auto sid = static_cast<std::uint32_t>(sources_.size());
    sources_.push_back(std::move(src));
    for (std::size_t p = n_; p < n_ + count; ++p) index_.push_back({sid, static_cast<std::uint32_t>(p)});
    return count;
  }

  double input(std::size_t i, std::size_t channel, std::size_t t) const {
    const auto& ref = index_[i];
    const auto& src = sources_[ref.source];
    if (channel == 0) return src.motion_input[ref.p - n_ + t];
    return src.wave_input[ref.p + w_ - n_ + t];
  }
  double target(std::size_t i, std::size_t j) const {
    const auto& ref = index_[i];
    return sources_[ref.source].target[ref.p + j];
  }
  std::size_t anchor(std::size_t i) const { return index_[i].p; }
  const WindowSource& source_of(std::size_t i) const { return sources_[index_[i].source]; }

  WindowSample sample(std::size_t i) const {
    WindowSample s;
    s.p = anchor(i);
    s.n = n_;
    s.channels = r_;
    s.X.resize(r_ * n_);
    for (std::size_t c = 0; c < r_; ++c)
      for (std::size_t t = 0; t < n_; ++t) s.X[c * n_ + t] = input(i, c, t);
    s.Y.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) s.Y[j] = target(i, j);
    return s;
  }

  /// Every k-th anchor (k >= 1), starting at offset.
  WindowedDataset strided(std::size_t k, std::size_t offset = 0) const {
    if (k == 0) throw DomainError("strided: stride must be >= 1");
    WindowedDataset out = *this;
    out.index_.clear();
    for (std::size_t i = offset; i < index_.size(); i += k) out.index_.push_back(index_[i]);
    return out;
  }

  /// Same anchors in the given order (used by order-independence checks).
  WindowedDataset reordered(const std::vector<std::size_t>& order) const {
    WindowedDataset out = *this;
    out.index_.clear();
    for (std::size_t i : order) out.index_.push_back(index_.at(i));
    return out;
  }

  /// Same windows duplicated back to back.
  WindowedDataset duplicated() const {
    WindowedDataset out = *this;
    out.index_.insert(out.index_.end(), index_.begin(), index_.end());
    return out;
  }

private:
  std::size_t n_ = 1, m_ = 1, w_ = 0, r_ = 1;
  std::vector<WindowSource> sources_;
  std::vector<WindowRef> index_;
};

/// Pairs from a single (already regularized) motion series, with the wave as
/// a second feature when given. Inputs and targets come from the same series.
inline WindowedDataset build_pairs(const TimeSeries& motion, const std::optional<TimeSeries>& wave, std::size_t n,
                                   std::size_t m, std::size_t w) {
  motion.validate();
  if (wave && wave->size() != motion.size()) throw DomainError("build_pairs: motion and wave lengths differ");
  WindowedDataset ds(n, m, w, wave ? 2 : 1);
  ds.dt = motion.dt;
  if (WindowedDataset::count_for_length(motion.size(), n, m, w) == 0)
    throw DegenerateDataError("build_pairs: series too short for a single window");
  WindowSource src;
  src.run_id = "series";
  src.motion_input = motion.values;
  if (wave) src.wave_input = wave->values;
  src.target = motion.values;
  ds.add_source(std::move(src));
  return ds;
}

struct SplitOptions {
  /// Training runs to use; empty means every training-role run.
  std::vector<std::string> training_ids;
  bool use_wave = true;
  std::uint64_t noise_seed = 0;
  /// Noise level applied to the test inputs.
  double test_noise = 0.0;
  /// Campaign-wide constants; computed from the whole campaign when absent.
  std::optional<NormalizationConstants> norm;
};

/// Seed for the noise stream of one (run, channel, level) triple.
inline std::uint64_t noise_seed_for(std::uint64_t base, const std::string& run_id, const std::string& channel,
                                    double level) {
  return derive_seed(base, run_id + "/" + channel + "/" + detail::format_double(level));
}

/// Regularized source for one run at one noise level. Motion and wave inputs
/// receive the same level on independent streams.
inline WindowSource make_source(const CampaignRun& run, Channel channel, const NormalizationConstants& norm,
                                bool use_wave, double level, std::uint64_t noise_seed) {
  WindowSource src;
  src.run_id = run.condition.id;
  src.noise_level = level;
  const auto& cn = norm[channel];
  const TimeSeries clean = regularize(channel_series(run, channel), cn.A, cn.B);
  src.target = clean.values;
  src.motion_input =
      add_noise(clean, level, noise_seed_for(noise_seed, run.condition.id, to_string(channel), level)).values;
  if (use_wave) {
    const TimeSeries wave = regularize(run.wave, norm.wave.A, norm.wave.B);
    src.wave_input = add_noise(wave, level, noise_seed_for(noise_seed, run.condition.id, "wave", level)).values;
  }
  return src;
}

/// Training pairs pooled over training-role runs crossed with every noise
/// level; test pairs from the test-role run. Sources are ordered by run id,
/// then noise level; anchors ascend within a source.
inline std::pair<WindowedDataset, WindowedDataset> split_campaign(const std::vector<CampaignRun>& campaign,
                                                                  Channel channel, std::size_t n, std::size_t m,
                                                                  std::size_t w, std::vector<double> noise_levels,
                                                                  const SplitOptions& opts = {}) {
  if (channel == Channel::wave) throw ConfigError("split_campaign: target channel must be heave or surge");
  if (noise_levels.empty()) noise_levels = {0.0};
  for (double l : noise_levels)
    if (!(l >= 0.0)) throw DomainError("split_campaign: noise levels must be >= 0");
  std::sort(noise_levels.begin(), noise_levels.end());
  noise_levels.erase(std::unique(noise_levels.begin(), noise_levels.end()), noise_levels.end());

  const NormalizationConstants norm = opts.norm ? *opts.norm : compute_norm_constants(campaign);
  const std::size_t r = opts.use_wave ? 2 : 1;

  std::vector<const CampaignRun*> training, test;
  for (const auto& run : campaign) {
    if (run.condition.role == DatasetRole::test) {
      test.push_back(&run);
    } else if (opts.training_ids.empty() || std::find(opts.training_ids.begin(), opts.training_ids.end(),
                                                      run.condition.id) != opts.training_ids.end()) {
      training.push_back(&run);
    }
  }
  if (test.empty()) throw ConfigError("split_campaign: campaign has no test-role run");
  if (training.empty()) throw ConfigError("split_campaign: no training runs selected");
  if (!opts.training_ids.empty() && training.size() != opts.training_ids.size())
    throw ConfigError("split_campaign: some requested training runs are missing or test-role");
  auto by_id = [](const CampaignRun* a, const CampaignRun* b) { return a->condition.id < b->condition.id; };
  std::sort(training.begin(), training.end(), by_id);
  std::sort(test.begin(), test.end(), by_id);

  WindowedDataset train_ds(n, m, w, r), test_ds(n, m, w, r);
  for (auto* ds : {&train_ds, &test_ds}) {
    ds->channel = channel;
    ds->norm = norm;
    ds->dt = campaign.front().wave.dt;
  }
  train_ds.role = DatasetRole::training;
  test_ds.role = DatasetRole::test;
  for (const auto* run : training)
    for (double level : noise_levels)
      train_ds.add_source(make_source(*run, channel, norm, opts.use_wave, level, opts.noise_seed));
  for (const auto* run : test)
    test_ds.add_source(make_source(*run, channel, norm, opts.use_wave, opts.test_noise, opts.noise_seed));
  return {std::move(train_ds), std::move(test_ds)};
}

/// Writes one CSV per source (`p,x..,y..`) and `dataset_manifest.json`.
inline void export_dataset(const WindowedDataset& ds, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "seamotion-dataset";
  manifest["version"] = 1;
  manifest["name"] = name;
  manifest["n"] = ds.n();
  manifest["m"] = ds.m();
  manifest["w"] = ds.w();
  manifest["r"] = ds.r();
  manifest["channel"] = to_string(ds.channel);
  manifest["role"] = to_string(ds.role);
  manifest["dt"] = ds.dt;
  manifest["norm"] = {{"wave", {{"A", ds.norm.wave.A}, {"B", ds.norm.wave.B}}},
                      {"heave", {{"A", ds.norm.heave.A}, {"B", ds.norm.heave.B}}},
                      {"surge", {{"A", ds.norm.surge.A}, {"B", ds.norm.surge.B}}}};
  manifest["noise_levels"] = ds.noise_levels();
  manifest["files"] = nlohmann::json::array();

  std::string header = "p";
  for (std::size_t c = 0; c < ds.r(); ++c)
    for (std::size_t t = 0; t < ds.n(); ++t)
      header += (c == 0 ? ",x_motion_" : ",x_wave_") + std::to_string(t);
  for (std::size_t j = 0; j < ds.m(); ++j) header += ",y_" + std::to_string(j);

  std::vector<std::ofstream> files(ds.sources().size());
  std::vector<std::size_t> rows(ds.sources().size(), 0);
  std::vector<std::string> names(ds.sources().size());
  for (std::size_t s = 0; s < ds.sources().size(); ++s) {
    const auto& src = ds.sources()[s];
    names[s] = name + "_" + src.run_id + "_I" + detail::format_double(src.noise_level) + ".csv";
    files[s].open(dir / names[s]);
    if (!files[s]) throw ConfigError("cannot write " + (dir / names[s]).string());
    files[s] << header << '\n';
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = ds.index()[i].source;
    auto& out = files[s];
    out << ds.anchor(i);
    for (std::size_t c = 0; c < ds.r(); ++c)
      for (std::size_t t = 0; t < ds.n(); ++t) out << ',' << detail::format_double(ds.input(i, c, t));
    for (std::size_t j = 0; j < ds.m(); ++j) out << ',' << detail::format_double(ds.target(i, j));
    out << '\n';
    ++rows[s];
  }
  for (std::size_t s = 0; s < ds.sources().size(); ++s)
    manifest["files"].push_back({{"file", names[s]},
                                 {"run", ds.sources()[s].run_id},
                                 {"noise_level", ds.sources()[s].noise_level},
                                 {"rows", rows[s]}});
  std::ofstream m(dir / (name + "_manifest.json"));
  m << manifest.dump(2) << '\n';
}

}  // namespace seamotion
