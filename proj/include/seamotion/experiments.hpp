#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamotion/checkpoint.hpp"
#include "seamotion/dataset.hpp"
#include "seamotion/metrics.hpp"
#include "seamotion/training.hpp"
#include "seamotion/vessel_surrogate.hpp"

namespace seamotion {

namespace fs = std::filesystem;

struct ArchitectureConfig {
  std::size_t lstm_layers = 1;
  std::size_t hidden = 50;
  std::size_t fc_layers = 3;
  std::size_t fc_width = 50;

  Architecture to_architecture(std::size_t r, std::size_t m) const {
    Architecture a;
    a.input_size = r;
    a.lstm_hidden.assign(lstm_layers, hidden);
    a.fc_widths.assign(fc_layers, fc_width);
    a.output_size = m;
    return a;
  }
  std::string label() const {
    return "L" + std::to_string(lstm_layers) + "-H" + std::to_string(hidden) + "-F" + std::to_string(fc_layers) + "x" +
           std::to_string(fc_width);
  }
};

struct SeedConfig {
  std::uint64_t campaign = 7;
  std::uint64_t init = 1;
  std::uint64_t shuffle = 1;
  std::uint64_t noise = 1;
};

struct SweepConfig {
  std::vector<std::string> channels{"heave", "surge"};
  std::vector<std::size_t> n_values{10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120};
  std::vector<std::size_t> w_values{0, 10, 20, 30, 40, 50, 60};
  std::vector<std::size_t> m_values{20, 40, 60};
  std::vector<std::size_t> hidden_values{10, 20, 30, 40, 50, 60, 80};
  std::vector<std::size_t> lstm_layer_values{1, 2};
  std::vector<std::size_t> fc_layer_values{1, 2, 3, 4};
  std::vector<std::size_t> fc_width_values{10, 30, 50};
  /// Architecture held fixed in the Example 3 sweeps.
  ArchitectureConfig motion_only_architecture{1, 30, 3, 30};
  std::size_t max_epochs = 150;
  std::size_t replicates = 1;
};

/// Everything an experiment run needs. Serialized as JSON; every field has a
/// default so partial files are valid.
struct ExperimentConfig {
  std::string name = "default";
  int example = 1;
  std::string channel = "heave";
  std::size_t n = 60, m = 20, w = 20;
  bool use_wave = true;
  std::vector<std::string> training_runs;  // empty: every training-role run
  std::vector<double> noise_levels{0.0};
  std::vector<double> test_noise_levels{0.0};
  ArchitectureConfig architecture;
  TrainingConfig training;
  std::size_t train_stride = 1;
  std::size_t eval_stride = 1;
  std::size_t train_eval_stride = 10;
  SeedConfig seeds;
  CampaignOptions campaign;
  SweepConfig sweep;
  std::size_t trace_windows = 4;
  std::string output_dir = "seamotion_out";

  void validate() const {
    if (example < 1 || example > 3) throw ConfigError("example must be 1, 2 or 3");
    if (channel != "heave" && channel != "surge") throw ConfigError("channel must be heave or surge");
    if (n == 0 || m == 0) throw ConfigError("n and m must be >= 1");
    if (example == 2 && noise_levels.empty()) throw ConfigError("example 2 needs noise_levels");
    if (test_noise_levels.empty()) throw ConfigError("test_noise_levels must not be empty");
    for (double l : noise_levels)
      if (!(l >= 0.0)) throw ConfigError("noise levels must be >= 0");
    for (double l : test_noise_levels)
      if (!(l >= 0.0)) throw ConfigError("noise levels must be >= 0");
    if (train_stride == 0 || eval_stride == 0 || train_eval_stride == 0) throw ConfigError("strides must be >= 1");
    if (architecture.lstm_layers == 0 || architecture.hidden == 0 || architecture.fc_width == 0)
      throw ConfigError("architecture sizes must be positive");
    if (sweep.replicates == 0) throw ConfigError("sweep.replicates must be >= 1");
    for (const auto& c : sweep.channels) channel_from_string(c);
    training.validate();
    if (!(campaign.dt > 0.0) || !(campaign.duration > 0.0) || campaign.spinup < 0.0)
      throw ConfigError("campaign duration, dt and spinup must be positive");
  }
};

namespace detail {

inline bool has_negative(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>() < 0.0;
  if (j.is_array())
    for (const auto& e : j)
      if (has_negative(e)) return true;
  return false;
}

/// Copies j[key] into out when present; collects the key as consumed.
template <typename T>
void take(const nlohmann::json& j, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!j.contains(key)) return;
  if (has_negative(j.at(key)) && (std::is_unsigned_v<T> || !std::is_arithmetic_v<T>))
    throw ConfigError(std::string("config field '") + key + "' must not be negative");
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& seen, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!seen.count(k)) throw ConfigError("unknown config field '" + (where.empty() ? k : where + "." + k) + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& a = c.architecture;
  const auto& s = c.sweep;
  const auto& t = c.training;
  return {
      {"name", c.name},
      {"example", c.example},
      {"channel", c.channel},
      {"n", c.n},
      {"m", c.m},
      {"w", c.w},
      {"use_wave", c.use_wave},
      {"training_runs", c.training_runs},
      {"noise_levels", c.noise_levels},
      {"test_noise_levels", c.test_noise_levels},
      {"architecture",
       {{"lstm_layers", a.lstm_layers}, {"hidden", a.hidden}, {"fc_layers", a.fc_layers}, {"fc_width", a.fc_width}}},
      {"training",
       {{"initial_lr", t.initial_lr},
        {"warm_epochs", t.warm_epochs},
        {"decay_factor", t.decay_factor},
        {"decay_every", t.decay_every},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"test_loss_stride", t.test_loss_stride}}},
      {"train_stride", c.train_stride},
      {"eval_stride", c.eval_stride},
      {"train_eval_stride", c.train_eval_stride},
      {"seeds",
       {{"campaign", c.seeds.campaign}, {"init", c.seeds.init}, {"shuffle", c.seeds.shuffle}, {"noise", c.seeds.noise}}},
      {"campaign",
       {{"duration", c.campaign.duration}, {"dt", c.campaign.dt}, {"spinup", c.campaign.spinup}}},
      {"sweep",
       {{"channels", s.channels},
        {"n_values", s.n_values},
        {"w_values", s.w_values},
        {"m_values", s.m_values},
        {"hidden_values", s.hidden_values},
        {"lstm_layer_values", s.lstm_layer_values},
        {"fc_layer_values", s.fc_layer_values},
        {"fc_width_values", s.fc_width_values},
        {"motion_only_architecture",
         {{"lstm_layers", s.motion_only_architecture.lstm_layers},
          {"hidden", s.motion_only_architecture.hidden},
          {"fc_layers", s.motion_only_architecture.fc_layers},
          {"fc_width", s.motion_only_architecture.fc_width}}},
        {"max_epochs", s.max_epochs},
        {"replicates", s.replicates}}},
      {"trace_windows", c.trace_windows},
      {"output_dir", c.output_dir},
  };
}

inline ArchitectureConfig architecture_from_json(const nlohmann::json& j, const ArchitectureConfig& base,
                                                 const std::string& where) {
  ArchitectureConfig a = base;
  std::set<std::string> seen;
  detail::take(j, "lstm_layers", a.lstm_layers, seen);
  detail::take(j, "hidden", a.hidden, seen);
  detail::take(j, "fc_layers", a.fc_layers, seen);
  detail::take(j, "fc_width", a.fc_width, seen);
  detail::reject_unknown(j, seen, where);
  return a;
}

/// Reads a config, starting from `base` for absent fields. Unknown fields are
/// configuration errors.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  std::set<std::string> seen;
  detail::take(j, "name", c.name, seen);
  detail::take(j, "example", c.example, seen);
  detail::take(j, "channel", c.channel, seen);
  detail::take(j, "n", c.n, seen);
  detail::take(j, "m", c.m, seen);
  detail::take(j, "w", c.w, seen);
  detail::take(j, "use_wave", c.use_wave, seen);
  detail::take(j, "training_runs", c.training_runs, seen);
  detail::take(j, "noise_levels", c.noise_levels, seen);
  detail::take(j, "test_noise_levels", c.test_noise_levels, seen);
  detail::take(j, "train_stride", c.train_stride, seen);
  detail::take(j, "eval_stride", c.eval_stride, seen);
  detail::take(j, "train_eval_stride", c.train_eval_stride, seen);
  detail::take(j, "trace_windows", c.trace_windows, seen);
  detail::take(j, "output_dir", c.output_dir, seen);
  for (const char* section : {"architecture", "training", "seeds", "campaign", "sweep"}) seen.insert(section);
  detail::reject_unknown(j, seen, "");

  if (j.contains("architecture")) c.architecture = architecture_from_json(j["architecture"], c.architecture, "architecture");
  if (j.contains("training")) {
    const auto& t = j["training"];
    std::set<std::string> s;
    detail::take(t, "initial_lr", c.training.initial_lr, s);
    detail::take(t, "warm_epochs", c.training.warm_epochs, s);
    detail::take(t, "decay_factor", c.training.decay_factor, s);
    detail::take(t, "decay_every", c.training.decay_every, s);
    detail::take(t, "batch_size", c.training.batch_size, s);
    detail::take(t, "max_epochs", c.training.max_epochs, s);
    detail::take(t, "test_loss_stride", c.training.test_loss_stride, s);
    detail::reject_unknown(t, s, "training");
  }
  if (j.contains("seeds")) {
    const auto& t = j["seeds"];
    std::set<std::string> s;
    detail::take(t, "campaign", c.seeds.campaign, s);
    detail::take(t, "init", c.seeds.init, s);
    detail::take(t, "shuffle", c.seeds.shuffle, s);
    detail::take(t, "noise", c.seeds.noise, s);
    detail::reject_unknown(t, s, "seeds");
  }
  if (j.contains("campaign")) {
    const auto& t = j["campaign"];
    std::set<std::string> s;
    detail::take(t, "duration", c.campaign.duration, s);
    detail::take(t, "dt", c.campaign.dt, s);
    detail::take(t, "spinup", c.campaign.spinup, s);
    detail::reject_unknown(t, s, "campaign");
  }
  if (j.contains("sweep")) {
    const auto& t = j["sweep"];
    std::set<std::string> s;
    detail::take(t, "channels", c.sweep.channels, s);
    detail::take(t, "n_values", c.sweep.n_values, s);
    detail::take(t, "w_values", c.sweep.w_values, s);
    detail::take(t, "m_values", c.sweep.m_values, s);
    detail::take(t, "hidden_values", c.sweep.hidden_values, s);
    detail::take(t, "lstm_layer_values", c.sweep.lstm_layer_values, s);
    detail::take(t, "fc_layer_values", c.sweep.fc_layer_values, s);
    detail::take(t, "fc_width_values", c.sweep.fc_width_values, s);
    detail::take(t, "max_epochs", c.sweep.max_epochs, s);
    detail::take(t, "replicates", c.sweep.replicates, s);
    s.insert("motion_only_architecture");
    detail::reject_unknown(t, s, "sweep");
    if (t.contains("motion_only_architecture"))
      c.sweep.motion_only_architecture = architecture_from_json(t["motion_only_architecture"],
                                                                c.sweep.motion_only_architecture,
                                                                "sweep.motion_only_architecture");
  }
  c.validate();
  return c;
}

/// Built-in configurations. "default" (alias "example1"), "example2" and
/// "example3" follow the published protocol: 300 epochs for headline cells,
/// 150 per sweep cell, every training window. A "desk-" prefix trims the
/// budget to minutes on one core by striding the training windows.
inline ExperimentConfig builtin_config(const std::string& name) {
  const bool desk = name.rfind("desk", 0) == 0;
  std::string base = desk ? name.substr(4) : name;
  if (!base.empty() && base.front() == '-') base.erase(0, 1);
  if (base.empty() || base == "default") base = "example1";
  ExperimentConfig c;
  c.name = name;
  if (base == "example2") {
    c.example = 2;
    c.n = 120;
    c.m = 40;
    c.w = 40;
    c.training_runs = {"WC1", "WC3", "WC4"};
    c.noise_levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    c.test_noise_levels = {0.0, 0.2, 0.4, 0.6, 0.8};
  } else if (base == "example3") {
    c.example = 3;
    c.use_wave = false;
    c.architecture = {1, 30, 3, 30};
  } else if (base != "example1") {
    throw ConfigError("unknown built-in config '" + name + "'");
  }
  if (desk) {
    c.train_stride = c.example == 2 ? 48 : 8;
    c.training.max_epochs = 40;
    c.training.test_loss_stride = 10;
    c.sweep.max_epochs = 30;
    c.train_eval_stride = 20;
  }
  return c;
}

inline bool is_builtin_config(const std::string& name) {
  try {
    builtin_config(name);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

/// Built-in name, or path to a JSON file layered over the default config.
inline ExperimentConfig load_config(const std::string& name_or_path) {
  if (!fs::exists(name_or_path) && is_builtin_config(name_or_path)) return builtin_config(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("cannot open config '" + name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config '" + name_or_path + "': " + e.what());
  }
  ExperimentConfig base;
  if (j.contains("base")) {
    base = builtin_config(j["base"].get<std::string>());
    j.erase("base");
  }
  return config_from_json(j, base);
}

/// Sets a dotted key (e.g. "training.max_epochs") from its command-line
/// text. The text is parsed as JSON when possible, else taken as a string.
inline ExperimentConfig apply_override(const ExperimentConfig& c, const std::string& key, const std::string& text) {
  nlohmann::json j = to_json(c);
  nlohmann::json* node = &j;
  std::string rest = key;
  for (std::size_t dot; (dot = rest.find('.')) != std::string::npos;) {
    const std::string part = rest.substr(0, dot);
    if (!node->contains(part) || !(*node)[part].is_object()) throw ConfigError("unknown config field '" + key + "'");
    node = &(*node)[part];
    rest = rest.substr(dot + 1);
  }
  if (!node->contains(rest)) throw ConfigError("unknown config field '" + key + "'");
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if ((*node)[rest].is_array() && !value.is_array()) value = nlohmann::json::array({value});
  (*node)[rest] = value;
  return config_from_json(j);
}

/// Output directory with SEAMOTION_OUTPUT_ROOT prepended to relative paths.
inline fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("SEAMOTION_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
  }
  return p;
}

inline std::vector<CampaignRun> make_campaign(const ExperimentConfig& c) {
  return generate_campaign(campaign_conditions(), c.seeds.campaign, default_response_params(), c.campaign);
}

/// One trained-and-scored configuration.
struct CellSpec {
  std::string sweep = "single";
  Channel channel = Channel::heave;
  std::size_t n = 60, m = 20, w = 20;
  bool use_wave = true;
  ArchitectureConfig architecture;
  std::size_t max_epochs = 300;
  std::vector<std::string> training_runs;
  std::vector<double> noise_levels{0.0};
  std::vector<double> test_noise_levels{0.0};
  bool score_training = false;
  std::size_t replicate = 0;

  std::string label() const {
    std::ostringstream os;
    os << sweep << '_' << to_string(channel) << "_n" << n << "_m" << m << "_w" << (use_wave ? std::to_string(w) : "x")
       << '_' << architecture.label() << "_r" << replicate;
    return os.str();
  }
};

inline nlohmann::json to_json(const CellSpec& s) {
  return {{"sweep", s.sweep},
          {"channel", to_string(s.channel)},
          {"n", s.n},
          {"m", s.m},
          {"w", s.w},
          {"use_wave", s.use_wave},
          {"architecture",
           {{"lstm_layers", s.architecture.lstm_layers},
            {"hidden", s.architecture.hidden},
            {"fc_layers", s.architecture.fc_layers},
            {"fc_width", s.architecture.fc_width}}},
          {"max_epochs", s.max_epochs},
          {"training_runs", s.training_runs},
          {"noise_levels", s.noise_levels},
          {"test_noise_levels", s.test_noise_levels},
          {"score_training", s.score_training},
          {"replicate", s.replicate},
          {"label", s.label()}};
}

/// Cell taken directly from the top-level config fields.
inline CellSpec single_cell(const ExperimentConfig& c) {
  CellSpec s;
  s.channel = channel_from_string(c.channel);
  s.n = c.n;
  s.m = c.m;
  s.w = c.w;
  s.use_wave = c.use_wave;
  s.architecture = c.architecture;
  s.max_epochs = c.training.max_epochs;
  s.training_runs = c.training_runs;
  s.noise_levels = c.noise_levels;
  s.test_noise_levels = c.test_noise_levels;
  s.score_training = c.example == 3;
  return s;
}

struct NoiseEvaluation {
  double level = 0.0;
  EvaluationReport report;
};

struct CellResult {
  CellSpec spec;
  TrainResult training;
  std::vector<NoiseEvaluation> test;
  std::optional<EvaluationReport> train_report;
  std::size_t train_windows = 0;
  std::size_t param_count = 0;
  double seconds = 0.0;

  const EvaluationReport& test_at(double level) const {
    for (const auto& t : test)
      if (t.level == level) return t.report;
    throw DomainError("no test evaluation at noise level " + detail::format_double(level));
  }
};

inline std::uint64_t init_seed_for(const ExperimentConfig& c, std::size_t replicate) {
  return derive_seed(c.seeds.init, "replicate/" + std::to_string(replicate));
}
inline std::uint64_t shuffle_seed_for(const ExperimentConfig& c, std::size_t replicate) {
  return derive_seed(c.seeds.shuffle, "replicate/" + std::to_string(replicate));
}

/// Test-role dataset of a cell at one input noise level.
inline WindowedDataset test_dataset_at(const std::vector<CampaignRun>& campaign, const CellSpec& spec,
                                       const NormalizationConstants& norm, double level, std::uint64_t noise_seed) {
  WindowedDataset ds(spec.n, spec.m, spec.use_wave ? spec.w : 0, spec.use_wave ? 2 : 1);
  ds.channel = spec.channel;
  ds.role = DatasetRole::test;
  ds.norm = norm;
  ds.dt = campaign.front().wave.dt;
  std::vector<const CampaignRun*> runs;
  for (const auto& r : campaign)
    if (r.condition.role == DatasetRole::test) runs.push_back(&r);
  std::sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->condition.id < b->condition.id; });
  if (runs.empty()) throw ConfigError("campaign has no test-role run");
  for (const auto* r : runs) ds.add_source(make_source(*r, spec.channel, norm, spec.use_wave, level, noise_seed));
  return ds;
}

/// Writes `window_p,step,time_s,truth,prediction` for a few evenly spaced
/// test windows, in physical units.
inline void write_trace_csv(const Network& net, const WindowedDataset& ds, std::size_t windows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "window_p,step,time_s,truth,prediction\n";
  if (windows == 0 || ds.empty()) return;
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < windows; ++k) idx.push_back((2 * k + 1) * ds.size() / (2 * windows));
  const auto preds = predict_windows(net, ds, idx);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t p = ds.anchor(idx[k]);
    for (std::size_t j = 0; j < ds.m(); ++j)
      out << p << ',' << j << ',' << detail::format_double(static_cast<double>(p + j) * ds.dt) << ','
          << detail::format_double(preds.truth(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) << ','
          << detail::format_double(preds.prediction(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)))
          << '\n';
  }
}

inline SummaryRow summary_row(const CellSpec& spec, const std::string& dataset, double noise,
                              const EvaluationReport& rep) {
  SummaryRow r;
  r.dataset = dataset;
  r.channel = to_string(spec.channel);
  r.n = spec.n;
  r.m = spec.m;
  r.w = spec.use_wave ? spec.w : 0;
  r.noise = noise;
  r.summary = rep.accuracy.summary;
  return r;
}

inline std::vector<SummaryRow> summary_rows(const CellResult& res) {
  std::vector<SummaryRow> rows;
  const bool arch_sweep = res.spec.sweep == "lstm" || res.spec.sweep == "fc";
  const std::string suffix = arch_sweep ? "/" + res.spec.architecture.label() : "";
  for (const auto& t : res.test) rows.push_back(summary_row(res.spec, "test" + suffix, t.level, t.report));
  if (res.train_report) rows.push_back(summary_row(res.spec, "train" + suffix, 0.0, *res.train_report));
  return rows;
}

inline void log_line(std::ostream* log, const std::string& text) {
  if (log) *log << text << '\n' << std::flush;
}

/// Trains and scores one cell. When `dir` is non-empty writes the cell's
/// artifacts there: cell.json, history.csv, accuracy_I<level>.csv,
/// summary.csv, trace.csv and checkpoint.json.
inline CellResult run_cell(const ExperimentConfig& config, const std::vector<CampaignRun>& campaign,
                           const CellSpec& spec, const fs::path& dir = {}, std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t ahead = std::max(spec.m, spec.use_wave ? spec.w : 0);
  for (const auto& r : campaign)
    if (r.wave.size() < spec.n + ahead)
      throw ConfigError("window (n " + std::to_string(spec.n) + ", m " + std::to_string(spec.m) + ", w " +
                        std::to_string(spec.w) + ") does not fit run " + r.condition.id);

  SplitOptions opts;
  opts.training_ids = spec.training_runs;
  opts.use_wave = spec.use_wave;
  opts.noise_seed = config.seeds.noise;
  auto [full_train, first_test] = split_campaign(campaign, spec.channel, spec.n, spec.m, spec.use_wave ? spec.w : 0,
                                                 spec.noise_levels, opts);
  const WindowedDataset train_ds = full_train.strided(config.train_stride);
  const WindowedDataset monitor = test_dataset_at(campaign, spec, full_train.norm, 0.0, config.seeds.noise);

  CellResult res;
  res.spec = spec;
  res.train_windows = train_ds.size();
  Network net(spec.architecture.to_architecture(train_ds.r(), spec.m));
  net.init_uniform(init_seed_for(config, spec.replicate));
  res.param_count = count_params(net);

  TrainingConfig tc = config.training;
  tc.max_epochs = spec.max_epochs;
  tc.seed = shuffle_seed_for(config, spec.replicate);
  res.training = train(net, train_ds, monitor, tc);
  if (res.training.diverged) log_line(log, "  diverged: " + res.training.divergence_reason);

  for (double level : spec.test_noise_levels) {
    const auto ds = test_dataset_at(campaign, spec, full_train.norm, level, config.seeds.noise);
    res.test.push_back({level, evaluate(res.training.net, ds, ds.norm, config.eval_stride)});
  }
  if (spec.score_training)
    res.train_report = evaluate(res.training.net, full_train, full_train.norm, config.train_eval_stride);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream os;
  os << "cell " << spec.label() << ": windows " << res.train_windows << ", params " << res.param_count << ", epochs "
     << res.training.history.size() << " (best " << res.training.best_epoch << ")";
  for (const auto& t : res.test)
    os << ", I=" << detail::format_double(t.level) << " median " << t.report.accuracy.summary.median << " mean "
       << t.report.accuracy.summary.mean;
  if (res.train_report) os << ", train mean " << res.train_report->accuracy.summary.mean;
  os << ", " << res.seconds << " s";
  log_line(log, os.str());

  if (!dir.empty()) {
    fs::create_directories(dir);
    std::ofstream(dir / "cell.json") << to_json(spec).dump(2) << '\n';
    {
      std::ofstream h(dir / "history.csv");
      h << "epoch,learning_rate,train_loss,test_loss\n";
      for (const auto& r : res.training.history)
        h << r.epoch << ',' << detail::format_double(r.learning_rate) << ',' << detail::format_double(r.train_loss)
          << ',' << detail::format_double(r.test_loss) << '\n';
    }
    for (const auto& t : res.test)
      write_accuracy_csv(t.report, (dir / ("accuracy_I" + detail::format_double(t.level) + ".csv")).string());
    if (res.train_report) write_accuracy_csv(*res.train_report, (dir / "accuracy_train.csv").string());
    const auto rows = summary_rows(res);
    write_summary_csv(rows, (dir / "summary.csv").string());
    write_trace_csv(res.training.net, monitor, config.trace_windows, dir / "trace.csv");
    nlohmann::json meta = {{"cell", to_json(spec)},
                           {"r", train_ds.r()},
                           {"dt", train_ds.dt},
                           {"norm",
                            {{"wave", {{"A", full_train.norm.wave.A}, {"B", full_train.norm.wave.B}}},
                             {"heave", {{"A", full_train.norm.heave.A}, {"B", full_train.norm.heave.B}}},
                             {"surge", {{"A", full_train.norm.surge.A}, {"B", full_train.norm.surge.B}}}}},
                           {"seeds",
                            {{"campaign", config.seeds.campaign},
                             {"init", init_seed_for(config, spec.replicate)},
                             {"shuffle", tc.seed},
                             {"noise", config.seeds.noise}}}};
    save_checkpoint(res.training.net, dir / "checkpoint.json", meta);
  }
  return res;
}

/// Runs cells in order, reusing results of identical cells, writing each
/// under `root/cells/<label>`.
class CellRunner {
public:
  CellRunner(const ExperimentConfig& config, const std::vector<CampaignRun>& campaign, fs::path root,
             std::ostream* log)
      : config_(config), campaign_(campaign), root_(std::move(root)), log_(log) {}

  const CellResult& operator()(const CellSpec& spec) {
    const std::string key = to_json(spec).dump();
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const fs::path dir = root_.empty() ? fs::path{} : root_ / "cells" / spec.label();
    return cache_.emplace(key, run_cell(config_, campaign_, spec, dir, log_)).first->second;
  }

private:
  const ExperimentConfig& config_;
  const std::vector<CampaignRun>& campaign_;
  fs::path root_;
  std::ostream* log_;
  std::map<std::string, CellResult> cache_;
};

struct ExampleResult {
  std::vector<CellResult> cells;
};

/// Time-window, wave-lag and prediction-length sweeps per channel.
inline ExampleResult run_example1(const ExperimentConfig& c, const std::vector<CampaignRun>& campaign,
                                  const fs::path& root = {}, std::ostream* log = nullptr) {
  CellRunner run(c, campaign, root, log);
  ExampleResult out;
  for (std::size_t rep = 0; rep < c.sweep.replicates; ++rep)
    for (const auto& ch : c.sweep.channels) {
      CellSpec base;
      base.channel = channel_from_string(ch);
      base.architecture = c.architecture;
      base.max_epochs = c.sweep.max_epochs;
      base.training_runs = c.training_runs;
      base.replicate = rep;
      for (std::size_t n : c.sweep.n_values) {
        CellSpec s = base;
        s.sweep = "n";
        s.n = n;
        s.m = 20;
        s.w = 20;
        out.cells.push_back(run(s));
      }
      for (std::size_t w : c.sweep.w_values) {
        CellSpec s = base;
        s.sweep = "w";
        s.n = 60;
        s.m = 20;
        s.w = w;
        out.cells.push_back(run(s));
      }
      for (std::size_t m : c.sweep.m_values) {
        CellSpec s = base;
        s.sweep = "m";
        s.n = 3 * m;
        s.m = m;
        s.w = m;
        out.cells.push_back(run(s));
      }
    }
  return out;
}

/// One noise-extended model evaluated at every test noise level.
inline ExampleResult run_example2(const ExperimentConfig& c, const std::vector<CampaignRun>& campaign,
                                  const fs::path& root = {}, std::ostream* log = nullptr) {
  CellRunner run(c, campaign, root, log);
  ExampleResult out;
  for (std::size_t rep = 0; rep < c.sweep.replicates; ++rep) {
    CellSpec s = single_cell(c);
    s.sweep = "noise";
    s.use_wave = true;
    s.score_training = false;
    s.replicate = rep;
    out.cells.push_back(run(s));
  }
  return out;
}

/// Motion-only LSTM and FC architecture sweeps with train/test accuracy.
inline ExampleResult run_example3(const ExperimentConfig& c, const std::vector<CampaignRun>& campaign,
                                  const fs::path& root = {}, std::ostream* log = nullptr) {
  CellRunner run(c, campaign, root, log);
  ExampleResult out;
  for (std::size_t rep = 0; rep < c.sweep.replicates; ++rep) {
    CellSpec base = single_cell(c);
    base.use_wave = false;
    base.score_training = true;
    base.max_epochs = c.sweep.max_epochs;
    base.test_noise_levels = {0.0};
    base.noise_levels = {0.0};
    base.replicate = rep;
    for (std::size_t layers : c.sweep.lstm_layer_values)
      for (std::size_t h : c.sweep.hidden_values) {
        CellSpec s = base;
        s.sweep = "lstm";
        s.architecture = c.sweep.motion_only_architecture;
        s.architecture.lstm_layers = layers;
        s.architecture.hidden = h;
        out.cells.push_back(run(s));
      }
    for (std::size_t f : c.sweep.fc_layer_values)
      for (std::size_t width : c.sweep.fc_width_values) {
        CellSpec s = base;
        s.sweep = "fc";
        s.architecture = c.sweep.motion_only_architecture;
        s.architecture.fc_layers = f;
        s.architecture.fc_width = width;
        out.cells.push_back(run(s));
      }
  }
  return out;
}

/// Report file name for each sweep tag.
inline std::string report_name(const std::string& sweep) {
  if (sweep == "n") return "time_window";
  if (sweep == "w") return "wave_lag";
  if (sweep == "m") return "prediction_length";
  if (sweep == "noise") return "noise_robustness";
  if (sweep == "lstm") return "lstm_layers";
  if (sweep == "fc") return "fc_layers";
  return "single";
}

namespace detail {

/// CSV rows ordered field by field, numerically where both fields are numbers.
inline bool csv_row_less(const std::string& a, const std::string& b) {
  const auto fa = split_csv_line(a), fb = split_csv_line(b);
  for (std::size_t i = 0; i < std::min(fa.size(), fb.size()); ++i) {
    double x = 0.0, y = 0.0;
    const auto [pa, ea] = std::from_chars(fa[i].data(), fa[i].data() + fa[i].size(), x);
    const auto [pb, eb] = std::from_chars(fb[i].data(), fb[i].data() + fb[i].size(), y);
    const bool numeric = ea == std::errc{} && eb == std::errc{} && pa == fa[i].data() + fa[i].size() &&
                         pb == fb[i].data() + fb[i].size();
    if (numeric ? x != y : fa[i] != fb[i]) return numeric ? x < y : fa[i] < fb[i];
  }
  return fa.size() < fb.size();
}

}  // namespace detail

/// Aggregates every `cells/*/summary.csv` under `root` into one summary CSV
/// per sweep in `root/report`, plus `<fig>_architecture.csv` for the
/// architecture sweeps. Returns the files written.
inline std::vector<fs::path> write_report(const fs::path& root) {
  const fs::path cells = root / "cells";
  if (!fs::is_directory(cells)) throw ConfigError("no cells directory under " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(cells))
    if (e.is_directory() && fs::exists(e.path() / "cell.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("no finished cells under " + cells.string());

  std::map<std::string, std::vector<std::string>> lines;
  std::map<std::string, std::vector<std::string>> arch_lines;
  for (const auto& d : dirs) {
    nlohmann::json spec;
    std::ifstream(d / "cell.json") >> spec;
    const std::string sweep = spec.at("sweep").get<std::string>();
    std::ifstream in(d / "summary.csv");
    std::string line;
    std::getline(in, line);
    if (line != kSummaryHeader) throw LoadError("bad summary header in " + (d / "summary.csv").string());
    double train_mean = 0.0, test_mean = 0.0;
    bool has_train = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      lines[sweep].push_back(line);
      const auto fields = detail::split_csv_line(line);
      const double mean_acc = detail::parse_double(fields.back(), line);
      if (fields[0].rfind("train", 0) == 0) {
        train_mean = mean_acc;
        has_train = true;
      } else if (fields[0].rfind("test", 0) == 0 && detail::parse_double(fields[5], line) == 0.0) {
        test_mean = mean_acc;
      }
    }
    if (has_train) {
      const auto& a = spec.at("architecture");
      std::ostringstream os;
      os << a.at("lstm_layers").get<std::size_t>() << ',' << a.at("hidden").get<std::size_t>() << ','
         << a.at("fc_layers").get<std::size_t>() << ',' << a.at("fc_width").get<std::size_t>() << ','
         << spec.at("replicate").get<std::size_t>() << ',' << detail::format_double(train_mean) << ','
         << detail::format_double(test_mean) << ',' << detail::format_double(train_mean - test_mean);
      arch_lines[sweep].push_back(os.str());
    }
  }
  const fs::path out_dir = root / "report";
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (auto& [sweep, rows] : lines) {
    std::sort(rows.begin(), rows.end(), detail::csv_row_less);
    const fs::path p = out_dir / (report_name(sweep) + ".csv");
    std::ofstream out(p);
    out << kSummaryHeader << '\n';
    for (const auto& r : rows) out << r << '\n';
    written.push_back(p);
  }
  for (auto& [sweep, rows] : arch_lines) {
    std::sort(rows.begin(), rows.end(), detail::csv_row_less);
    const fs::path p = out_dir / (report_name(sweep) + "_architecture.csv");
    std::ofstream out(p);
    out << "lstm_layers,hidden,fc_layers,fc_width,replicate,train_mean,test_mean,gap\n";
    for (const auto& r : rows) out << r << '\n';
    written.push_back(p);
  }
  return written;
}

/// Runs the configured example end to end under `root` (cells/, report/).
inline ExampleResult run_sweep(const ExperimentConfig& c, const fs::path& root, std::ostream* log = nullptr) {
  fs::create_directories(root);
  const auto campaign = make_campaign(c);
  ExampleResult res;
  switch (c.example) {
    case 1: res = run_example1(c, campaign, root, log); break;
    case 2: res = run_example2(c, campaign, root, log); break;
    default: res = run_example3(c, campaign, root, log); break;
  }
  write_report(root);
  return res;
}

}  // namespace seamotion
