// speedprof: command-line front end of the speed-profile pipeline.
//
//   speedprof generate --passes 20 --seed 7 --out data
//   speedprof profile data/passes.csv --out profiles
//   speedprof register profiles --landmark-count 2 --out registered
//   speedprof boxplot registered/registered --out boxplot
//   speedprof simulate --function F1 --seed 42 --out sim
//
// Settings resolve as defaults < --config file < flags. Failures print one
// JSON object on stderr and exit with status 1 (2 for bad arguments).

#include "speedprof/errors.hpp"
#include "speedprof/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

namespace {

using speedprof::config::PipelineConfig;

struct Overrides {
  std::optional<std::string> config_path;
  std::map<std::string, std::string> values;  // config key -> flag text
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void add_overrides(CLI::App* cmd, Overrides& ov, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    cmd->add_option_function<std::string>(
           flag_name(key), [&ov, key](const std::string& v) { ov.values[key] = v; }, "override " + key)
        ->type_name("VALUE");
  }
}

PipelineConfig resolve(const Overrides& ov) {
  PipelineConfig cfg;
  try {
    if (ov.config_path) cfg = speedprof::config::load(*ov.config_path);
    for (const auto& [key, value] : ov.values) cfg.set(key, value);
    cfg.validate();
  } catch (const speedprof::ParseError& e) {
    throw speedprof::StageError("config", e.detail(), e.line());
  } catch (const std::exception& e) {
    throw speedprof::StageError("config", e.what());
  }
  return cfg;
}

void report_error(const std::string& command, const std::string& stage, const std::string& message,
                  std::size_t line) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["stage"] = stage;
  j["message"] = message;
  if (line) j["line"] = line;
  std::cerr << nlohmann::ordered_json{{"error", j}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speed-profile smoothing, registration and variability analysis"};
  app.require_subcommand(1);
  Overrides ov;

  const auto common = [&](CLI::App* cmd) {
    cmd->add_option_function<std::string>("--config", [&](const std::string& p) { ov.config_path = p; },
                                          "key=value configuration file")
        ->check(CLI::ExistingFile);
    add_overrides(cmd, ov, {"seed"});
    cmd->add_option_function<std::string>("--out", [&](const std::string& v) { ov.values["output_dir"] = v; },
                                          "output directory");
  };
  const std::vector<std::string> estimator_keys{"m", "lambda_min", "lambda_max", "criterion",
                                                "lambda_mono", "trim", "stop_threshold", "grid_step"};

  std::string input;
  auto* smooth = app.add_subcommand("smooth", "trace CSV -> monotone fit samples and fit summary");
  smooth->add_option("trace", input, "trace CSV (t,x,v[,pass_id])")->required()->check(CLI::ExistingFile);
  common(smooth);
  add_overrides(smooth, ov, estimator_keys);

  auto* profile = app.add_subcommand("profile", "trace CSV -> space-speed CSV, summary and SVG");
  profile->add_option("trace", input, "trace CSV (t,x,v[,pass_id])")->required()->check(CLI::ExistingFile);
  common(profile);
  add_overrides(profile, ov, estimator_keys);

  auto* reg = app.add_subcommand("register", "directory of x,v profiles -> registered curves and mean");
  reg->add_option("profiles", input, "directory of x,v CSV curves")->required()->check(CLI::ExistingDirectory);
  common(reg);
  add_overrides(reg, ov, {"landmark_count", "stop_window", "stop_threshold", "grid_step"});

  double station_step = 50.0;
  auto* box = app.add_subcommand("boxplot", "directory of registered curves -> depths, boxplot JSON and SVG");
  box->add_option("curves", input, "directory of x,v CSV curves")->required()->check(CLI::ExistingDirectory);
  box->add_option("--station-step", station_step, "spacing of pointwise boxplots (m)")->check(CLI::PositiveNumber);
  common(box);
  add_overrides(box, ov, {"boxplot_proportions", "grid_step"});

  bool pilot = false;
  int pilot_runs = 20;
  std::vector<double> candidates{1e-4, 1e-6, 1e-8, 1e-10, 1e-11, 1e-12};
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo MISE study of the two-step estimator");
  sim->add_flag("--pilot", pilot, "run the lambda_mono pilot instead of the study");
  sim->add_option("--pilot-runs", pilot_runs, "runs per pilot candidate")->check(CLI::PositiveNumber);
  sim->add_option("--candidates", candidates, "pilot lambda_mono candidates")->delimiter(',');
  common(sim);
  add_overrides(sim, ov, {"function", "runs", "sample_size", "sigma_x", "sigma_v", "m", "lambda_min", "lambda_max",
                          "criterion", "lambda_mono"});

  int passes = 20;
  auto* gen = app.add_subcommand("generate", "synthetic multi-stop passes as a trace CSV");
  gen->add_option("--passes", passes, "number of passes")->check(CLI::PositiveNumber);
  common(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "arguments",
                 e.what(), 0);
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    const PipelineConfig cfg = resolve(ov);
    const std::filesystem::path out = cfg.output_dir;
    speedprof::pipeline::Written written;
    if (cmd == smooth) {
      written = speedprof::pipeline::smooth(cfg, input, out);
    } else if (cmd == profile) {
      written = speedprof::pipeline::profile(cfg, input, out);
    } else if (cmd == reg) {
      written = speedprof::pipeline::register_curves(cfg, input, out);
    } else if (cmd == box) {
      written = speedprof::pipeline::boxplot(cfg, input, out, station_step);
    } else if (cmd == sim) {
      written = speedprof::pipeline::simulate(cfg, out, pilot ? pilot_runs : 0, candidates);
    } else {
      written = speedprof::pipeline::generate(cfg, passes, out);
    }
    std::vector<std::string> paths;
    for (const auto& p : written) paths.push_back(p.generic_string());
    std::cout << nlohmann::ordered_json{{"command", name}, {"written", paths}}.dump() << std::endl;
  } catch (const speedprof::StageError& e) {
    report_error(name, e.stage(), e.detail(), e.line());
    return 1;
  } catch (const std::exception& e) {
    report_error(name, "internal", e.what(), 0);
    return 1;
  }
  return 0;
}
