#include "speedprof/simulation.hpp"

#include "speedprof/errors.hpp"
#include "speedprof/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace speedprof::simulation {

std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::F1: return "F1";
    case TestFunction::F2: return "F2";
    case TestFunction::F3: return "F3";
  }
  return "?";
}

TestFunction test_function_from_string(const std::string& name) {
  if (name == "F1" || name == "f1") return TestFunction::F1;
  if (name == "F2" || name == "f2") return TestFunction::F2;
  if (name == "F3" || name == "f3") return TestFunction::F3;
  throw DomainError("unknown test function '" + name + "' (expected F1, F2 or F3)");
}

std::pair<double, double> domain(TestFunction f) { return f == TestFunction::F3 ? std::pair{0.0, 3.0} : std::pair{0.0, 1.0}; }

int default_sample_size(TestFunction f) { return f == TestFunction::F3 ? 150 : 50; }

std::pair<double, double> composite_range(TestFunction f) {
  return f == TestFunction::F3 ? std::pair{0.1, 1.9} : std::pair{0.1, 0.9};
}

double default_lambda_mono(TestFunction f) {
  // Minimizers of the F'_mc MISE over {1e-4, 1e-6, 1e-8, 1e-10, 1e-11, 1e-12}
  // on 20 pilot runs with seed 7 (speedprof simulate --pilot).
  switch (f) {
    case TestFunction::F1: return 1e-12;
    case TestFunction::F2: return 1e-12;
    case TestFunction::F3: return 1e-12;
  }
  return 1e-4;
}

namespace {

void check_domain(TestFunction f, double t) {
  const auto [lo, hi] = domain(f);
  const double slack = 1e-12 * (hi - lo);
  if (!(t >= lo - slack && t <= hi + slack)) throw DomainError("t outside the test function's domain");
}

}  // namespace

double true_function(TestFunction f, double t) {
  check_domain(f, t);
  switch (f) {
    case TestFunction::F1: return t * t;
    case TestFunction::F2: return 0.5 * std::pow(2.0 * t - 1.0, 3) + 0.5;
    case TestFunction::F3:
      if (t <= 1.0) return std::pow(t - 1.0, 3) + 1.0;
      if (t <= 2.0) return 1.0;
      return std::pow(t - 2.0, 3) + 1.0;
  }
  return 0.0;
}

double true_derivative(TestFunction f, double t) {
  check_domain(f, t);
  switch (f) {
    case TestFunction::F1: return 2.0 * t;
    case TestFunction::F2: return 3.0 * std::pow(2.0 * t - 1.0, 2);
    case TestFunction::F3:
      if (t <= 1.0) return 3.0 * (t - 1.0) * (t - 1.0);
      if (t <= 2.0) return 0.0;
      return 3.0 * (t - 2.0) * (t - 2.0);
  }
  return 0.0;
}

double true_composite(TestFunction f, double x) {
  switch (f) {
    case TestFunction::F1:
      if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x outside [0, 1]");
      return 2.0 * std::sqrt(x);
    case TestFunction::F2: {
      if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x outside [0, 1]");
      const double c = std::cbrt(2.0 * x - 1.0);
      return 3.0 * c * c;
    }
    case TestFunction::F3: {
      if (!(x >= 0.0 && x <= 2.0)) throw DomainError("x outside [0, 2]");
      const double c = std::cbrt(x - 1.0);
      return 3.0 * c * c;
    }
  }
  return 0.0;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ stream);
}

void SimulationConfig::validate() const {
  if (n < 0 || sample_size() < 4) throw DomainError("sample size must be at least 4");
  if (runs <= 0) throw DomainError("runs must be positive");
  if (!(sigma_x >= 0.0) || !(sigma_v >= 0.0)) throw DomainError("noise levels must be non-negative");
  if (!(lambda_mono >= 0.0)) throw DomainError("lambda_mono must be non-negative");
}

kernel_spline::ObservationSet simulate_dataset(const SimulationConfig& config, std::uint64_t run_index) {
  config.validate();
  const auto [lo, hi] = domain(config.function);
  const int n = config.sample_size();
  std::mt19937_64 rng(stream_seed(config.seed, run_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(n)), y(t.size()), v(t.size());
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    t[k] = i + 1 == n ? hi : lo + (hi - lo) * i / (n - 1);
    const double ex = normal(rng);
    const double ev = normal(rng);
    y[k] = true_function(config.function, t[k]) + config.sigma_x * ex;
    v[k] = true_derivative(config.function, t[k]) + config.sigma_v * ev;
  }
  return {std::move(t), std::move(y), std::move(v)};
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  g.back() = hi;
  return g;
}

std::vector<double> step_grid(double lo, double hi, double step) {
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  return linspace(lo, hi, count);
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

struct RunErrors {
  bool ok = false;
  bool converged = false;
  std::vector<double> value, derivative, composite;
};

RunErrors one_run(const SimulationConfig& config, std::uint64_t run, const std::vector<double>& grid,
                  const std::vector<double>& comp_grid) {
  RunErrors out;
  const auto data = simulate_dataset(config, run);
  profile::EstimatorConfig est = config.estimator;
  est.monotone.lambda = config.monotone_lambda();
  const auto result = profile::two_step_estimate(data, est);
  const auto& fit = result.monotone;
  const auto& curve = result.profile->curve();
  out.converged = fit.converged;
  out.value.resize(grid.size());
  out.derivative.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dv = fit.value(grid[i]) - true_function(config.function, grid[i]);
    const double dd = fit.derivative(grid[i]) - true_derivative(config.function, grid[i]);
    out.value[i] = dv * dv;
    out.derivative[i] = dd * dd;
  }
  out.composite.resize(comp_grid.size());
  for (std::size_t i = 0; i < comp_grid.size(); ++i) {
    const double x = comp_grid[i];
    const double d = curve.derivative(curve.inverse(x)) - true_composite(config.function, x);
    out.composite[i] = d * d;
  }
  out.ok = true;
  return out;
}

}  // namespace

MiseReport run_study(const SimulationConfig& config) {
  config.validate();
  const auto [lo, hi] = domain(config.function);
  const auto [clo, chi] = composite_range(config.function);
  const auto grid = linspace(lo, hi, static_cast<std::size_t>(2 * config.sample_size()));
  const auto comp_grid = step_grid(clo, chi, 0.01);

  const auto runs = static_cast<std::size_t>(config.runs);
  std::vector<RunErrors> results(runs);
  parallel_for(runs, worker_count(config.threads), [&](std::size_t r) {
    try {
      results[r] = one_run(config, r, grid, comp_grid);
    } catch (const Error&) {
      results[r].ok = false;
    }
  });

  MiseReport rep;
  rep.function = config.function;
  rep.runs = config.runs;
  rep.seed = config.seed;
  rep.lambda_mono = config.monotone_lambda();
  rep.value = {grid, std::vector<double>(grid.size(), 0.0)};
  rep.derivative = {grid, std::vector<double>(grid.size(), 0.0)};
  rep.composite = {comp_grid, std::vector<double>(comp_grid.size(), 0.0)};
  int good = 0;
  for (const auto& r : results) {
    if (!r.ok) {
      ++rep.failures;
      continue;
    }
    ++good;
    if (!r.converged) ++rep.nonconverged;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      rep.value.mse[i] += r.value[i];
      rep.derivative.mse[i] += r.derivative[i];
    }
    for (std::size_t i = 0; i < comp_grid.size(); ++i) rep.composite.mse[i] += r.composite[i];
  }
  if (good == 0) throw SolverError("every simulation run failed");
  for (auto* c : {&rep.value, &rep.derivative, &rep.composite}) {
    for (double& e : c->mse) e /= good;
  }
  rep.mise_value = trapezoid(rep.value.grid, rep.value.mse);
  rep.mise_derivative = trapezoid(rep.derivative.grid, rep.derivative.mse);
  rep.mise_composite = trapezoid(rep.composite.grid, rep.composite.mse);
  return rep;
}

std::string MiseReport::to_json() const {
  nlohmann::ordered_json j;
  j["function"] = to_string(function);
  j["runs"] = runs;
  j["failures"] = failures;
  j["nonconverged"] = nonconverged;
  j["seed"] = seed;
  j["lambda_mono"] = lambda_mono;
  j["mise"] = {{"F_mc", mise_value}, {"dF_mc", mise_derivative}, {"composite", mise_composite}};
  const auto curve = [](const PointwiseCurve& c) { return nlohmann::ordered_json{{"grid", c.grid}, {"mse", c.mse}}; };
  j["pointwise"] = {{"F_mc", curve(value)}, {"dF_mc", curve(derivative)}, {"composite", curve(composite)}};
  return j.dump(2) + "\n";
}

std::string MiseReport::to_csv() const {
  std::ostringstream os;
  char buf[64];
  os << "function,estimator,mise\n";
  const auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << to_string(function) << ',' << name << ',' << buf << '\n';
  };
  row("F_mc", mise_value);
  row("dF_mc", mise_derivative);
  row("composite", mise_composite);
  return os.str();
}

std::vector<PilotPoint> pilot_lambda_mono(SimulationConfig config, const std::vector<double>& candidates,
                                          int pilot_runs) {
  config.runs = pilot_runs;
  std::vector<PilotPoint> out;
  for (double lam : candidates) {
    config.lambda_mono = lam;
    out.push_back({lam, run_study(config).mise_derivative});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-stop passes

PassKinematics::PassKinematics(std::vector<Phase> phases) : phases_(std::move(phases)) {
  if (phases_.empty()) throw DomainError("pass needs at least one phase");
}

double PassKinematics::duration() const noexcept { return phases_.back().t0 + phases_.back().duration; }

const PassKinematics::Phase& PassKinematics::phase_at(double t) const {
  auto it = std::upper_bound(phases_.begin(), phases_.end(), t, [](double v, const Phase& p) { return v < p.t0; });
  return it == phases_.begin() ? phases_.front() : *(it - 1);
}

double PassKinematics::position(double t) const {
  t = std::clamp(t, 0.0, duration());
  const auto& p = phase_at(t);
  const double s = std::min(t - p.t0, p.duration);
  return p.x0 + p.v0 * s + 0.5 * p.acceleration * s * s;
}

double PassKinematics::speed(double t) const {
  t = std::clamp(t, 0.0, duration());
  const auto& p = phase_at(t);
  const double s = std::min(t - p.t0, p.duration);
  return std::max(p.v0 + p.acceleration * s, 0.0);
}

SyntheticPass generate_pass(const PassScenario& sc, std::uint64_t seed, std::uint64_t pass_index) {
  if (!(sc.length > 0.0 && sc.cruise_speed > 0.0 && sc.acceleration > 0.0 && sc.deceleration > 0.0 &&
        sc.sample_period > 0.0)) {
    throw DomainError("invalid pass scenario");
  }
  for (const auto& site : sc.stops) {
    if (!(site.dwell_max >= site.dwell_min && site.dwell_min >= 0.0)) throw DomainError("invalid stop dwell range");
  }
  std::mt19937_64 rng(stream_seed(seed, pass_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double vc = std::max(sc.cruise_speed + sc.cruise_jitter * normal(rng), 0.25 * sc.cruise_speed);
  const double brake = vc * vc / (2.0 * sc.deceleration);
  const double launch = vc * vc / (2.0 * sc.acceleration);

  std::vector<double> stops;
  for (const auto& site : sc.stops) {
    const double pos = site.position + sc.stop_jitter * normal(rng);
    const bool stop = unit(rng) < site.probability;
    const double dwell = site.dwell_min + (site.dwell_max - site.dwell_min) * unit(rng);
    if (!stop) continue;
    const double prev_end = stops.empty() ? 0.0 : stops.back() + launch;
    if (pos - brake < prev_end || pos + launch > sc.length) continue;  // no room to stop here
    stops.push_back(pos);
    stops.push_back(dwell);  // interleaved (position, dwell); unpacked below
  }

  std::vector<PassKinematics::Phase> phases;
  double t = 0.0, x = 0.0;
  const auto add = [&](double v0, double a, double dur) {
    if (dur <= 0.0) return;
    phases.push_back({t, x, v0, a, dur});
    x += v0 * dur + 0.5 * a * dur * dur;
    t += dur;
  };
  std::vector<double> stop_positions;
  for (std::size_t k = 0; k < stops.size(); k += 2) {
    const double pos = stops[k], dwell = stops[k + 1];
    add(vc, 0.0, (pos - brake - x) / vc);
    add(vc, -sc.deceleration, vc / sc.deceleration);
    x = pos;  // remove rounding drift
    add(0.0, 0.0, dwell);
    add(0.0, sc.acceleration, vc / sc.acceleration);
    stop_positions.push_back(pos);
  }
  add(vc, 0.0, (sc.length - x) / vc);
  PassKinematics truth(std::move(phases));

  std::vector<double> ts, xs, vs;
  for (std::size_t i = 0;; ++i) {
    const double ti = sc.sample_period * static_cast<double>(i);
    if (ti > truth.duration()) break;
    ts.push_back(ti);
    xs.push_back(truth.position(ti) + sc.sigma_x * normal(rng));
    vs.push_back(truth.speed(ti) + sc.sigma_v * normal(rng));
  }
  return {kernel_spline::ObservationSet(std::move(ts), std::move(xs), std::move(vs)), std::move(truth),
          std::move(stop_positions)};
}

}  // namespace speedprof::simulation
