#include "speedprof/pipeline.hpp"

#include "speedprof/depth_boxplot.hpp"
#include "speedprof/errors.hpp"
#include "speedprof/parallel.hpp"
#include "speedprof/profile.hpp"
#include "speedprof/registration.hpp"
#include "speedprof/simulation.hpp"
#include "speedprof/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>

namespace speedprof::pipeline {

namespace {

using json = nlohmann::ordered_json;

template <class Body>
auto stage(const char* name, Body&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ParseError& e) {
    throw StageError(name, e.what(), e.line());
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// File-name-safe pass name.
std::string pass_name(const fs::path& trace, const io::Trace& t, std::size_t count) {
  std::string name = t.pass_id.empty() ? trace.stem().string() : t.pass_id;
  if (count > 1 && t.pass_id.empty()) name += "_" + std::to_string(count);
  for (char& c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return name;
}

std::vector<io::Trace> load_traces(const fs::path& trace) {
  return stage("ingest", [&] {
    auto traces = io::ingest(trace);
    if (traces.empty()) throw DataError("no observations in " + trace.string());
    return traces;
  });
}

std::vector<profile::TwoStepResult> estimate_all(const config::PipelineConfig& cfg,
                                                 const std::vector<io::Trace>& traces) {
  const auto est = cfg.estimator();
  std::vector<std::optional<profile::TwoStepResult>> slots(traces.size());
  parallel_for(traces.size(), worker_count(), [&](std::size_t i) {
    try {
      slots[i] = profile::two_step_estimate(traces[i].data, est);
    } catch (const StageError& e) {
      const std::string who = traces[i].pass_id.empty() ? "" : " (pass " + traces[i].pass_id + ")";
      throw StageError(e.stage(), e.detail() + who);
    }
  });
  std::vector<profile::TwoStepResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

json fit_summary(const std::string& name, const io::Trace& trace, const profile::TwoStepResult& r) {
  json j;
  j["pass"] = name;
  j["observations"] = trace.data.size();
  j["resampled"] = trace.data.resampled();
  j["variances"] = {{"criterion", kernel_spline::to_string(r.variances.criterion)},
                    {"sigma_x_sq", r.variances.sigma_x_sq},
                    {"sigma_v_sq", r.variances.sigma_v_sq}};
  j["spline"] = {{"order", r.spline.order},
                 {"lambda", r.lambda.lambda},
                 {"lambda_at_lower_bound", r.lambda.at_lower_bound},
                 {"lambda_at_upper_bound", r.lambda.at_upper_bound},
                 {"reciprocal_condition", r.spline.reciprocal_condition},
                 {"ill_conditioned", r.spline.ill_conditioned},
                 {"d", std::vector<double>(r.spline.d.begin(), r.spline.d.end())},
                 {"c", std::vector<double>(r.spline.c.begin(), r.spline.c.end())},
                 {"c_prime", std::vector<double>(r.spline.c_prime.begin(), r.spline.c_prime.end())}};
  const auto& m = r.monotone;
  j["monotone"] = {{"beta0", m.beta0()},
                   {"beta1", m.beta1()},
                   {"lambda", m.lambda()},
                   {"converged", m.converged},
                   {"iterations", m.iterations},
                   {"criterion", m.criterion},
                   {"w", std::vector<double>(m.w_coeffs().begin(), m.w_coeffs().end())}};
  return j;
}

std::vector<double> interpolate_onto(const io::GridCurve& c, const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = registration::interpolate(c.x, c.v, grid[j]);
  return out;
}

const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

}  // namespace

NamedCurves read_curve_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv curves in " + dir.string());
  NamedCurves out;
  for (const auto& f : files) {
    out.names.push_back(f.stem().string());
    out.curves.push_back(io::read_curve(f));
  }
  return out;
}

std::vector<double> common_grid(const std::vector<io::GridCurve>& curves, double step) {
  if (curves.empty()) throw DataError("no curves");
  double lo = -INFINITY, hi = INFINITY;
  for (const auto& c : curves) {
    lo = std::max(lo, c.x.front());
    hi = std::min(hi, c.x.back());
  }
  std::vector<double> grid;
  for (double k = std::ceil(lo / step - 1e-9); k * step <= hi + 1e-9 * step; k += 1.0) {
    grid.push_back(std::clamp(k * step, lo, hi));
  }
  if (grid.size() < 2) throw DataError("curves do not overlap on at least two grid nodes");
  return grid;
}

Written smooth(const config::PipelineConfig& cfg, const fs::path& trace, const fs::path& out_dir) {
  const auto traces = load_traces(trace);
  const auto results = estimate_all(cfg, traces);
  Written written;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string name = pass_name(trace, traces[i], traces.size() > 1 ? i + 1 : 0);
    const auto& m = results[i].monotone;
    const auto& t = traces[i].data.times();
    std::vector<double> x(t.size()), v(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      x[k] = m.value(t[k]);
      v[k] = m.derivative(t[k]);
    }
    stage("write", [&] {
      written.push_back(out_dir / (name + ".smooth.csv"));
      io::write_atomic(written.back(), io::emit_table({"t", "x", "v"}, {t, x, v}));
      written.push_back(out_dir / (name + ".fit.json"));
      io::write_atomic(written.back(), dump(fit_summary(name, traces[i], results[i])));
      return 0;
    });
  }
  return written;
}

Written profile(const config::PipelineConfig& cfg, const fs::path& trace, const fs::path& out_dir) {
  const auto traces = load_traces(trace);
  const auto results = estimate_all(cfg, traces);
  Written written;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string name = pass_name(trace, traces[i], traces.size() > 1 ? i + 1 : 0);
    const auto& p = *results[i].profile;
    io::GridCurve curve;
    const double step = cfg.grid_step;
    for (double k = std::ceil(p.x_lo() / step - 1e-9); k * step <= p.x_hi() + 1e-9 * step; k += 1.0) {
      const double xk = std::clamp(k * step, p.x_lo(), p.x_hi());
      curve.x.push_back(xk);
      curve.v.push_back(p.speed(xk));
    }
    if (curve.x.size() < 2) {
      throw StageError("profile", "trimmed domain of " + name + " holds fewer than two grid nodes");
    }
    json summary = fit_summary(name, traces[i], results[i]);
    summary["domain"] = {p.x_lo(), p.x_hi()};
    summary["stop_threshold"] = p.stop_threshold();
    json stops = json::array();
    std::vector<double> markers;
    for (const auto& s : p.stop_set()) {
      stops.push_back({{"begin", s.begin}, {"end", s.end}, {"min_speed", s.min_speed}});
      markers.push_back(0.5 * (s.begin + s.end));
    }
    summary["stops"] = stops;

    svg::Plot plot;
    plot.title = "Space-speed profile: " + name;
    plot.x_label = "distance (m)";
    plot.y_label = "speed (m/s)";
    plot.series.push_back({curve.x, curve.v, "", palette(0)});
    plot.markers = markers;
    stage("write", [&] {
      written.push_back(out_dir / (name + ".profile.csv"));
      io::write_atomic(written.back(), io::emit_curve(curve));
      written.push_back(out_dir / (name + ".profile.json"));
      io::write_atomic(written.back(), dump(summary));
      written.push_back(out_dir / (name + ".profile.svg"));
      io::write_atomic(written.back(), svg::render(plot));
      return 0;
    });
  }
  return written;
}

Written register_curves(const config::PipelineConfig& cfg, const fs::path& in_dir, const fs::path& out_dir) {
  const auto input = stage("ingest", [&] { return read_curve_directory(in_dir); });
  const auto grid = stage("grid", [&] { return common_grid(input.curves, cfg.grid_step); });
  std::vector<std::vector<double>> curves;
  for (const auto& c : input.curves) curves.push_back(interpolate_onto(c, grid));

  const auto reg = stage("register", [&] {
    registration::RegistrationOptions opt;
    opt.landmark_count = cfg.landmark_count;
    opt.window = cfg.stop_window;
    opt.landmarks.stop_threshold = cfg.stop_threshold;
    return registration::register_sample(grid, curves, opt);
  });

  json j;
  j["grid"] = {{"start", grid.front()}, {"end", grid.back()}, {"step", cfg.grid_step}, {"size", grid.size()}};
  j["reference"] = reg.reference;
  json per = json::array();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& l = reg.landmarks[i];
    per.push_back({{"name", input.names[i]},
                   {"landmarks", l.positions},
                   {"from_minimum", std::vector<bool>(l.from_minimum.begin(), l.from_minimum.end())},
                   {"count_mismatch", l.count_mismatch},
                   {"window_width", reg.warps[i].window_width},
                   {"windows_shrunk", reg.warps[i].windows_shrunk}});
  }
  j["curves"] = per;

  svg::Plot plot;
  plot.title = "Registered speed profiles";
  plot.x_label = "distance (m)";
  plot.y_label = "speed (m/s)";
  for (const auto& c : reg.curves) plot.series.push_back({grid, c, "", "#999999", 0.8, 0.6});
  plot.series.push_back({grid, reg.unregistered_mean, "unregistered mean", "#ff7f0e", 2.0, 1.0, true});
  plot.series.push_back({grid, reg.mean, "registered mean", "#d62728", 2.5});
  plot.markers = reg.reference;

  Written written;
  stage("write", [&] {
    for (std::size_t i = 0; i < curves.size(); ++i) {
      written.push_back(out_dir / "registered" / (input.names[i] + ".csv"));
      io::write_atomic(written.back(), io::emit_curve({grid, reg.curves[i]}));
    }
    written.push_back(out_dir / "mean.csv");
    io::write_atomic(written.back(),
                     io::emit_table({"x", "registered", "unregistered"}, {grid, reg.mean, reg.unregistered_mean}));
    written.push_back(out_dir / "registration.json");
    io::write_atomic(written.back(), dump(j));
    written.push_back(out_dir / "registration.svg");
    io::write_atomic(written.back(), svg::render(plot));
    return 0;
  });
  return written;
}

Written boxplot(const config::PipelineConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                double station_step) {
  const auto input = stage("ingest", [&] { return read_curve_directory(in_dir); });
  depth::FunctionalSample sample;
  sample.grid = stage("grid", [&] { return common_grid(input.curves, cfg.grid_step); });
  for (const auto& c : input.curves) sample.curves.push_back(interpolate_onto(c, sample.grid));

  depth::Bandwidth bandwidth;
  std::vector<double> depths;
  const auto box = stage("depth", [&] {
    bandwidth = depth::depth_bandwidth(sample);
    depths = depth::h_modal_depth(sample, bandwidth.value);
    return depth::functional_boxplot(sample, depths, cfg.boxplot_proportions);
  });
  const auto stations = stage("stations", [&] { return depth::pointwise_boxplots(sample, station_step); });

  const auto names_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(input.names[i]);
    return out;
  };
  json j;
  j["bandwidth"] = bandwidth.value;
  j["bandwidth_self_distances"] = bandwidth.self_distances;
  json per = json::array();
  for (std::size_t i = 0; i < sample.size(); ++i) per.push_back({{"name", input.names[i]}, {"depth", depths[i]}});
  j["curves"] = per;
  j["median"] = input.names[box.median_index];
  j["order"] = names_of(box.order);
  json regions = json::array();
  for (double p : box.proportions) {
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sample.size()) - 1e-12));
    regions.push_back(
        {{"proportion", p}, {"members", names_of({box.order.begin(), box.order.begin() + static_cast<long>(k)})}});
  }
  j["regions"] = regions;
  j["outliers"] = names_of(box.outliers);

  std::vector<std::string> header{"x"};
  std::vector<std::vector<double>> cols{sample.grid};
  for (std::size_t r = 0; r < box.proportions.size(); ++r) {
    const std::string tag = io::format_double(box.proportions[r]);
    header.push_back("lower_" + tag);
    header.push_back("upper_" + tag);
    cols.push_back(box.regions[r].lower);
    cols.push_back(box.regions[r].upper);
  }
  header.insert(header.end(), {"fence_lower", "fence_upper", "whisker_lower", "whisker_upper"});
  cols.insert(cols.end(), {box.fences.lower, box.fences.upper, box.whiskers.lower, box.whiskers.upper});

  std::vector<std::vector<double>> st(7);
  for (const auto& s : stations) {
    for (std::size_t c = 0; double v : {s.position, s.min, s.q1, s.median, s.q3, s.max, s.p85}) st[c++].push_back(v);
  }

  svg::Plot plot;
  plot.title = "Functional boxplot";
  plot.x_label = "distance (m)";
  plot.y_label = "speed (m/s)";
  for (std::size_t r = box.proportions.size(); r-- > 0;) {
    if (box.proportions[r] == 0.5) {
      plot.ribbons.push_back({sample.grid, box.regions[r].lower, box.regions[r].upper, "50% region", "#6baed6", 0.6});
    }
  }
  plot.series.push_back({sample.grid, box.whiskers.lower, "", "#08519c", 1.2});
  plot.series.push_back({sample.grid, box.whiskers.upper, "whiskers", "#08519c", 1.2});
  for (auto i : box.outliers) plot.series.push_back({sample.grid, sample.curves[i], "", "#d62728", 1.0, 0.8, true});
  plot.series.push_back({sample.grid, sample.curves[box.median_index], "median", "#000000", 2.0});

  Written written;
  stage("write", [&] {
    written.push_back(out_dir / "boxplot.json");
    io::write_atomic(written.back(), dump(j));
    written.push_back(out_dir / "boxplot_bands.csv");
    io::write_atomic(written.back(), io::emit_table(header, cols));
    written.push_back(out_dir / "stations.csv");
    io::write_atomic(written.back(), io::emit_table({"x", "min", "q1", "median", "q3", "max", "p85"}, st));
    written.push_back(out_dir / "boxplot.svg");
    io::write_atomic(written.back(), svg::render(plot));
    return 0;
  });
  return written;
}

Written simulate(const config::PipelineConfig& cfg, const fs::path& out_dir, int pilot_runs,
                 const std::vector<double>& pilot_candidates) {
  using simulation::TestFunction;
  const std::vector<TestFunction> functions =
      cfg.function == "all" ? std::vector<TestFunction>{TestFunction::F1, TestFunction::F2, TestFunction::F3}
                            : std::vector<TestFunction>{simulation::test_function_from_string(cfg.function)};
  Written written;
  std::string table;
  for (auto f : functions) {
    const auto sim = cfg.simulation(f);
    const std::string tag = simulation::to_string(f);
    if (pilot_runs > 0) {
      const auto points = stage("pilot", [&] { return simulation::pilot_lambda_mono(sim, pilot_candidates, pilot_runs); });
      json j;
      j["function"] = tag;
      j["runs"] = pilot_runs;
      j["seed"] = sim.seed;
      json rows = json::array();
      for (const auto& p : points) rows.push_back({{"lambda_mono", p.lambda_mono}, {"mise_derivative", p.mise_derivative}});
      j["candidates"] = rows;
      const auto best = std::min_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
        return a.mise_derivative < b.mise_derivative;
      });
      if (best != points.end()) j["best"] = best->lambda_mono;
      written.push_back(out_dir / ("pilot_" + tag + ".json"));
      stage("write", [&] { io::write_atomic(written.back(), dump(j)); return 0; });
      continue;
    }
    const auto report = stage("simulate", [&] { return simulation::run_study(sim); });
    const std::string csv = report.to_csv();
    table += table.empty() ? csv : csv.substr(csv.find('\n') + 1);
    written.push_back(out_dir / ("mise_" + tag + ".json"));
    stage("write", [&] { io::write_atomic(written.back(), report.to_json()); return 0; });
  }
  if (!table.empty()) {
    written.push_back(out_dir / "mise.csv");
    stage("write", [&] { io::write_atomic(written.back(), table); return 0; });
  }
  return written;
}

Written generate(const config::PipelineConfig& cfg, int passes, const fs::path& out_dir) {
  if (passes < 1) throw StageError("generate", "need at least one pass");
  const simulation::PassScenario scenario;
  std::vector<io::Trace> traces(static_cast<std::size_t>(passes));
  json truth = json::array();
  const int width = passes >= 100 ? 3 : 2;
  for (int i = 0; i < passes; ++i) {
    const auto pass = stage("generate", [&] { return simulation::generate_pass(scenario, cfg.seed, static_cast<std::uint64_t>(i)); });
    std::string id = std::to_string(i);
    id = "p" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;
    traces[static_cast<std::size_t>(i)] = {id, pass.data};
    truth.push_back({{"pass_id", id}, {"stops", pass.stop_positions}, {"duration", pass.truth.duration()}});
  }
  json j;
  j["seed"] = cfg.seed;
  j["length"] = scenario.length;
  j["passes"] = truth;
  Written written{out_dir / "passes.csv", out_dir / "truth.json"};
  stage("write", [&] {
    io::write_atomic(written[0], io::emit_traces(traces));
    io::write_atomic(written[1], dump(j));
    return 0;
  });
  return written;
}

}  // namespace speedprof::pipeline
