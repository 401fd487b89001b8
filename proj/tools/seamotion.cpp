// seamotion command-line harness: simulate, build-dataset, train, predict,
// evaluate, sweep, report.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seamotion/experiments.hpp"

namespace fs = std::filesystem;
using namespace seamotion;

namespace {

struct Common {
  std::string config = "default";
  std::string out;
};

/// `--key value` / `--key=value` pairs left over after CLI11 parsing become
/// config overrides.
ExperimentConfig resolve_config(const Common& common, const std::vector<std::string>& extras) {
  ExperimentConfig c = load_config(common.config);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for '" + tok + "'");
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    c = apply_override(c, key, value);
  }
  if (!common.out.empty()) c.output_dir = common.out;
  return c;
}

class RunLog {
public:
  RunLog(const fs::path& dir, const std::string& command, const ExperimentConfig& c)
      : start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir);
    out_.open(dir / "run.log", std::ios::app);
    out_ << "== " << command << '\n' << "config " << to_json(c).dump() << '\n';
  }
  ~RunLog() {
    out_ << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()
         << " s\n";
  }
  std::ostream& stream() { return out_; }

private:
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<CampaignRun> campaign_for(const ExperimentConfig& c, const std::string& dir) {
  if (dir.empty()) return make_campaign(c);
  return read_campaign(dir).runs;
}

NormalizationConstants norm_from_meta(const nlohmann::json& meta) {
  NormalizationConstants n;
  try {
    const auto& j = meta.at("norm");
    n.wave = {j.at("wave").at("A").get<double>(), j.at("wave").at("B").get<double>()};
    n.heave = {j.at("heave").at("A").get<double>(), j.at("heave").at("B").get<double>()};
    n.surge = {j.at("surge").at("A").get<double>(), j.at("surge").at("B").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint metadata lacks normalization constants: ") + e.what());
  }
  return n;
}

/// Forecast of m steps from anchor p of a physical-units motion series (and
/// wave series when the model takes one).
int predict(const std::string& checkpoint, const std::string& input, const std::string& wave_path,
            std::optional<std::size_t> anchor, const std::string& out_path) {
  const auto ck = load_checkpoint(checkpoint);
  const auto& cell = ck.meta.at("cell");
  const std::size_t n = cell.at("n"), m = cell.at("m");
  const bool use_wave = cell.at("use_wave");
  const std::size_t w = use_wave ? cell.at("w").get<std::size_t>() : 0;
  const Channel channel = channel_from_string(cell.at("channel"));
  const auto norm = norm_from_meta(ck.meta);

  const TimeSeries motion = read_series_csv(input);
  std::optional<TimeSeries> wave;
  if (use_wave) {
    if (wave_path.empty()) throw ConfigError("this model needs --wave (wave elevation CSV)");
    wave = read_series_csv(wave_path);
    if (std::abs(wave->dt - motion.dt) > 1e-9) throw ConfigError("motion and wave CSVs differ in time step");
  }
  const std::size_t latest = use_wave ? std::min(motion.size(), wave->size() < w ? 0 : wave->size() - w) : motion.size();
  const std::size_t p = anchor.value_or(latest);
  if (p < n || p > latest) throw ConfigError("anchor " + std::to_string(p) + " outside [" + std::to_string(n) + ", " +
                                            std::to_string(latest) + "]");

  WindowSample x;
  x.n = n;
  x.channels = use_wave ? 2 : 1;
  x.p = p;
  const auto& cn = norm[channel];
  for (std::size_t t = 0; t < n; ++t) x.X.push_back((motion.values[p - n + t] - cn.A) / cn.B);
  if (use_wave)
    for (std::size_t t = 0; t < n; ++t) x.X.push_back((wave->values[p + w - n + t] - norm.wave.A) / norm.wave.B);
  const auto pred = forward(ck.net, x);

  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write " + out_path);
  const bool has_truth = p + m <= motion.size();
  out << "step,time_s,forecast" << (has_truth ? ",truth" : "") << '\n';
  for (std::size_t j = 0; j < m; ++j) {
    out << j << ',' << detail::format_double(motion.time_at(p + j)) << ','
        << detail::format_double(pred[j] * cn.B + cn.A);
    if (has_truth) out << ',' << detail::format_double(motion.values[p + j]);
    out << '\n';
  }
  std::cout << "wrote " << m << "-step forecast from anchor " << p << " to " << out_path << '\n';
  return 0;
}

/// Acc of a forecast CSV carrying a truth column.
int evaluate_forecast(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "step,time_s,forecast,truth") throw LoadError(path + ": expected header step,time_s,forecast,truth");
  std::vector<double> pred, truth, times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw LoadError(path + ": expected 4 columns");
    times.push_back(detail::parse_double(f[1], path));
    pred.push_back(detail::parse_double(f[2], path));
    truth.push_back(detail::parse_double(f[3], path));
  }
  if (times.size() < 2) throw LoadError(path + ": need at least two rows");
  const double acc = accuracy(pred, truth, times[1] - times[0]);
  std::cout << "acc," << detail::format_double(acc) << '\n';
  return 0;
}

int evaluate_checkpoint(const ExperimentConfig& c, const std::string& checkpoint, const std::string& campaign_dir,
                        const fs::path& out_dir) {
  const auto ck = load_checkpoint(checkpoint);
  const auto& cell = ck.meta.at("cell");
  CellSpec spec;
  spec.channel = channel_from_string(cell.at("channel"));
  spec.n = cell.at("n");
  spec.m = cell.at("m");
  spec.w = cell.at("w");
  spec.use_wave = cell.at("use_wave");
  const auto norm = norm_from_meta(ck.meta);
  const auto campaign = campaign_for(c, campaign_dir);
  fs::create_directories(out_dir);
  std::vector<SummaryRow> rows;
  for (double level : c.test_noise_levels) {
    const auto ds = test_dataset_at(campaign, spec, norm, level, c.seeds.noise);
    const auto rep = evaluate(ck.net, ds, norm, c.eval_stride);
    write_accuracy_csv(rep, (out_dir / ("accuracy_I" + detail::format_double(level) + ".csv")).string());
    rows.push_back(summary_row(spec, "test", level, rep));
    std::cout << summary_line(rows.back()) << '\n';
    if (rep.degenerate) std::cout << "excluded " << rep.degenerate << " flat-truth windows\n";
  }
  write_summary_csv(rows, (out_dir / "evaluation_summary.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seamotion: synthetic platform-motion campaigns and LSTM motion prediction"};
  app.require_subcommand(1);
  Common common;
  std::string campaign_dir, checkpoint, input, wave, forecast, out_file, report_dir;
  std::optional<std::size_t> anchor;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "built-in config name or JSON file")->capture_default_str();
    sub->add_option("--out", common.out, "output directory (overrides output_dir)");
    sub->allow_extras();
    sub->footer("Any config field can be overridden as --key value, e.g. --training.max_epochs 40 --n 90");
  };

  auto* simulate = app.add_subcommand("simulate", "generate the wave/heave/surge campaign");
  add_common(simulate);
  auto* build = app.add_subcommand("build-dataset", "export windowed training and test datasets as CSV");
  add_common(build);
  build->add_option("--campaign", campaign_dir, "campaign directory written by simulate");
  auto* trn = app.add_subcommand("train", "train one cell and write checkpoint, history and accuracy");
  add_common(trn);
  trn->add_option("--campaign", campaign_dir, "campaign directory written by simulate");
  auto* pred = app.add_subcommand("predict", "multi-step forecast from a checkpoint");
  pred->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  pred->add_option("--input", input, "motion CSV (time_s,value) in physical units")->required();
  pred->add_option("--wave", wave, "wave elevation CSV (time_s,value)");
  pred->add_option("--anchor", anchor, "first forecast sample index (default: latest possible)");
  pred->add_option("--output", out_file, "forecast CSV")->required();
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test run, or a forecast CSV");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON");
  eval->add_option("--campaign", campaign_dir, "campaign directory written by simulate");
  eval->add_option("--forecast", forecast, "forecast CSV with a truth column");
  auto* sweep = app.add_subcommand("sweep", "run the configured example's sweep");
  add_common(sweep);
  auto* report = app.add_subcommand("report", "aggregate finished sweep cells into summary CSVs");
  report->add_option("--dir", report_dir, "sweep output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*pred) return predict(checkpoint, input, wave, anchor, out_file);
    if (*report) {
      for (const auto& p : write_report(report_dir)) std::cout << "wrote " << p.string() << '\n';
      return 0;
    }
    if (*eval && !forecast.empty()) return evaluate_forecast(forecast);

    CLI::App* sub = app.get_subcommands().front();
    const ExperimentConfig c = resolve_config(common, sub->remaining());
    const fs::path root = resolve_output_dir(c.output_dir);
    RunLog log(root, sub->get_name(), c);

    if (*simulate) {
      const auto runs = make_campaign(c);
      write_campaign(root / "campaign", runs, default_response_params(), c.seeds.campaign);
      std::cout << "wrote " << runs.size() << " runs to " << (root / "campaign").string() << '\n';
      return 0;
    }
    if (*build) {
      const auto campaign = campaign_for(c, campaign_dir);
      const auto spec = single_cell(c);
      SplitOptions opts;
      opts.training_ids = spec.training_runs;
      opts.use_wave = spec.use_wave;
      opts.noise_seed = c.seeds.noise;
      opts.test_noise = c.test_noise_levels.front();
      auto [train_ds, test_ds] =
          split_campaign(campaign, spec.channel, spec.n, spec.m, spec.use_wave ? spec.w : 0, spec.noise_levels, opts);
      export_dataset(train_ds.strided(c.train_stride), root / "dataset", "train");
      export_dataset(test_ds, root / "dataset", "test");
      std::cout << "training pairs " << train_ds.strided(c.train_stride).size() << ", test pairs " << test_ds.size()
                << " in " << (root / "dataset").string() << '\n';
      return 0;
    }
    if (*trn) {
      const auto campaign = campaign_for(c, campaign_dir);
      const auto res = run_cell(c, campaign, single_cell(c), root, &log.stream());
      for (const auto& row : summary_rows(res)) std::cout << summary_line(row) << '\n';
      if (res.training.diverged) {
        std::cerr << "training diverged: " << res.training.divergence_reason << '\n';
        return 3;
      }
      return 0;
    }
    if (*eval) {
      if (checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint or --forecast");
      return evaluate_checkpoint(c, checkpoint, campaign_dir, root);
    }
    if (*sweep) {
      run_sweep(c, root, &log.stream());
      for (const auto& p : write_report(root)) std::cout << "wrote " << p.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
