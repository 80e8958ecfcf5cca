// Acceptance checks, one PASS/FAIL line per criterion.
//
//   speedprof_acceptance               all criteria
//   speedprof_acceptance --criterion 2 one criterion
//
// Exit status is 0 only when every selected criterion passes.

#include "speedprof/depth_boxplot.hpp"
#include "speedprof/io.hpp"
#include "speedprof/kernel_spline.hpp"
#include "speedprof/monotone.hpp"
#include "speedprof/pipeline.hpp"
#include "speedprof/profile.hpp"
#include "speedprof/registration.hpp"
#include "speedprof/simulation.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>

namespace ks = speedprof::kernel_spline;
namespace mono = speedprof::monotone;
namespace pr = speedprof::profile;
namespace reg = speedprof::registration;
namespace dp = speedprof::depth;
namespace sim = speedprof::simulation;
namespace fs = std::filesystem;

namespace {

// Collects failed sub-checks so a criterion reports all of them at once.
class Verdict {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool passed() const { return failures_.empty(); }
  std::string summary() const {
    std::string out;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + f;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double fd(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

// ---------------------------------------------------------------------------

Verdict mise_table() {
  Verdict v;
  struct Row {
    sim::TestFunction f;
    double value, derivative, composite;
  };
  const std::vector<Row> published{{sim::TestFunction::F1, 0.00074, 0.0059, 0.0033},
                                   {sim::TestFunction::F2, 0.00084, 0.0017, 0.033},
                                   {sim::TestFunction::F3, 0.00034, 0.0044, 0.0092}};
  std::vector<double> composite;
  for (const auto& row : published) {
    sim::SimulationConfig cfg;
    cfg.function = row.f;
    cfg.runs = 100;
    cfg.seed = 42;
    const auto r = sim::run_study(cfg);
    const std::string tag = sim::to_string(row.f);
    const auto within = [&](double got, double want, const std::string& what) {
      v.note(tag + " " + what + "=" + num(got) + " (table " + num(want) + ")");
      v.expect(got <= 3 * want && got >= want / 3, tag + " " + what + " " + num(got) + " not within 3x of " + num(want));
    };
    within(r.mise_value, row.value, "F");
    within(r.mise_derivative, row.derivative, "F'");
    within(r.mise_composite, row.composite, "F'oF^-1");
    v.expect(r.failures == 0, tag + " had " + std::to_string(r.failures) + " failed runs");
    composite.push_back(r.mise_composite);
  }
  v.expect(composite[1] > composite[2] && composite[2] > composite[0], "composite ordering F2 > F3 > F1 violated");
  return v;
}

Verdict cusp() {
  Verdict v;
  const auto F = [](double t) { return sim::true_function(sim::TestFunction::F3, t); };
  const auto dF = [](double t) { return sim::true_derivative(sim::TestFunction::F3, t); };
  const auto d = pr::cusp_diagnostic(F, dF, 0.0, 3.0, 2.0, {0.04, 0.02, 0.01});
  v.expect(d.points.size() == 3, "expected three secant points");
  for (const auto& p : d.points) {
    v.note("theta " + num(p.theta) + ": ratio " + num(p.ratio));
    v.expect(std::abs(p.ratio - 1.0) <= 0.05, "ratio " + num(p.ratio) + " at theta " + num(p.theta));
  }
  if (d.points.size() == 3) {
    v.expect(d.points[2].secant_slope > 250.0, "slope at 0.01 is " + num(d.points[2].secant_slope));
  }
  return v;
}

Verdict spline_suite() {
  Verdict v;
  // (a) degree m-1 polynomials.
  std::vector<double> t, x, s;
  for (int i = 0; i < 15; ++i) {
    const double u = i / 14.0;
    t.push_back(u);
    x.push_back(1 - 3 * u + 2 * u * u);
    s.push_back(-3 + 4 * u);
  }
  const ks::ObservationSet poly(t, x, s);
  for (double lambda : {1e-6, 1.0, 1e6}) {
    const auto f = ks::fit(poly, 3, lambda, {1.0, 1.0});
    double err = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) err = std::max(err, std::abs(ks::evaluate(f, t[i]) - x[i]));
    v.expect(err < 1e-6, "polynomial error " + num(err) + " at lambda " + num(lambda));
  }
  // (b) T'(c, c') = 0.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int n = 6 + k % 10, m = 2 + k % 3;
    std::vector<double> tt(n), xx(n), vv(n);
    double clock = 0.0;
    for (int i = 0; i < n; ++i) {
      clock += 0.1 + u(rng);
      tt[i] = clock;
      xx[i] = clock + u(rng);
      vv[i] = 2 * u(rng);
    }
    const auto f = ks::fit({tt, xx, vv}, m, std::pow(10.0, -6 + 8 * u(rng)), {0.5 + u(rng), 0.5 + u(rng)});
    Eigen::VectorXd cc(2 * n);
    cc << f.c, f.c_prime;
    const Eigen::MatrixXd T = ks::null_space_matrix(tt, m);
    worst = std::max(worst, (T.transpose() * cc).norm() / std::max(1.0, cc.norm()));
  }
  v.expect(worst <= 1e-8, "constraint residual " + num(worst));
  // (c) kernel blocks against finite differences.
  const std::vector<double> knots{0.1, 0.45, 0.7, 1.3};
  const auto n = static_cast<Eigen::Index>(knots.size());
  double rel = 0.0;
  for (int m = 2; m <= 4; ++m) {
    const auto K = ks::kernel_matrix(knots, m);
    const auto E = [m](double a, double b) { return ks::semi_kernel(a, b, m); };
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const double a = knots[j], b = knots[i];
        const double ref[4] = {E(a, b), fd([&](double y) { return E(a, y); }, b),
                               fd([&](double y) { return E(y, b); }, a),
                               fd([&](double y) { return fd([&](double z) { return E(z, y); }, a, 1e-4); }, b, 1e-4)};
        const double got[4] = {K(j, i), K(j, n + i), K(n + j, i), K(n + j, n + i)};
        for (int q = 0; q < 4; ++q) rel = std::max(rel, std::abs(got[q] - ref[q]) / std::max(1e-12, std::abs(ref[q])));
      }
    }
  }
  v.expect(rel <= 1e-5, "kernel block relative error " + num(rel));
  // (d) hat trace limits.
  const std::vector<double> design{0.0, 0.15, 0.4, 0.55, 0.9, 1.2, 1.25, 1.8, 2.0, 2.6};
  const double high = ks::hat_matrix(design, 3, 1e12).trace();
  const double low = ks::hat_matrix(design, 3, 1e-12).trace();
  v.expect(std::abs(high - 3) < 1e-3, "tr A(1e12) = " + num(high));
  v.expect(std::abs(low - static_cast<double>(design.size())) < 0.1, "tr A(1e-12) = " + num(low));
  return v;
}

Verdict monotone_suite() {
  Verdict v;
  std::vector<double> t, y;
  for (int i = 0; i < 40; ++i) {
    t.push_back(i / 39.0);
    y.push_back(-1.5 + 4.0 * t.back());
  }
  const auto line = mono::fit_monotone(t, y);
  v.expect(std::abs(line.beta0() + 1.5) < 1e-4 && std::abs(line.beta1() - 4.0) < 1e-4,
           "betas " + num(line.beta0()) + ", " + num(line.beta1()));
  v.expect(line.w_coeffs().cwiseAbs().maxCoeff() < 1e-4, "w not flat on linear data");

  const auto increasing = [](const mono::MonotoneFit& f) {
    double prev = f.value(f.t_min());
    for (int i = 1; i < 1000; ++i) {
      const double cur = f.value(f.t_min() + (f.t_max() - f.t_min()) * i / 999.0);
      if (!(cur > prev)) return false;
      prev = cur;
    }
    return true;
  };
  // Fits the estimator produces (spline values, shipped penalty) and direct
  // fits of the raw positions at the default penalty.
  int converged = 0;
  for (auto f : {sim::TestFunction::F1, sim::TestFunction::F2, sim::TestFunction::F3}) {
    sim::SimulationConfig cfg;
    cfg.function = f;
    pr::EstimatorConfig est = cfg.estimator;
    est.monotone.lambda = cfg.monotone_lambda();
    for (std::uint64_t run = 0; run < 10; ++run) {
      const auto data = sim::simulate_dataset(cfg, run);
      const std::string tag = sim::to_string(f) + " run " + std::to_string(run);
      const auto two_step = pr::two_step_estimate(data, est).monotone;
      const auto direct = mono::fit_monotone(data.times(), data.positions());
      if (two_step.converged) v.expect(increasing(two_step), tag + " estimator fit not increasing");
      if (direct.converged) v.expect(increasing(direct), tag + " direct fit not increasing");
      converged += two_step.converged + direct.converged;
    }
  }
  v.note(std::to_string(converged) + " of 60 fits converged and were scanned");

  speedprof::BSplineBasis basis(0.0, 1.0, 10);
  const mono::MonotoneFit one(0.0, 1.0, basis, Eigen::VectorXd::Ones(basis.size()), 1e-4, 3);
  double err = 0.0;
  for (int i = 0; i <= 100; ++i) err = std::max(err, std::abs(mono::h_value(one, i / 100.0) - std::expm1(i / 100.0)));
  v.expect(err < 1e-6, "h for w = 1 off by " + num(err));
  return v;
}

Verdict registration_suite() {
  Verdict v;
  const double X = 1100.0;
  const auto identity = reg::build_warping({240, 730}, {240, 730}, X);
  double dev = 0.0;
  for (int i = 0; i <= 11000; ++i) dev = std::max(dev, std::abs(identity(i * 0.1) - i * 0.1));
  v.expect(dev < 1e-9, "identity deviation " + num(dev));

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad_ends = 0, bad_align = 0, bad_monotone = 0, bad_slope = 0, shrunk = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 3;
    std::vector<double> ref, cur;
    for (std::size_t j = 0; j < k; ++j) {
      const double base = X * (j + 1.0) / (k + 1.0);
      ref.push_back(base + (u(rng) - 0.5) * 60.0);
      cur.push_back(base + (u(rng) - 0.5) * 60.0);
    }
    const auto h = reg::build_warping(cur, ref, X);
    bad_ends += !(h(0.0) == 0.0 && h(X) == X);
    for (std::size_t j = 0; j < k; ++j) bad_align += std::abs(h(ref[j]) - cur[j]) > 1e-9;
    double prev = 0.0;
    for (int i = 1; i <= 11000; ++i) {
      const double y = h(i * 0.1);
      if (!(y > prev)) {
        ++bad_monotone;
        break;
      }
      prev = y;
    }
    shrunk += h.windows_shrunk;
    for (const auto& [a, b] : h.windows) {
      for (int i = 0; i <= 10; ++i) bad_slope += std::abs(h.derivative(a + (b - a) * i / 10.0) - 1.0) > 1e-9;
    }
  }
  v.expect(bad_ends == 0, std::to_string(bad_ends) + " warps move the endpoints");
  v.expect(bad_align == 0, std::to_string(bad_align) + " misaligned landmarks");
  v.expect(bad_monotone == 0, std::to_string(bad_monotone) + " non-increasing warps");
  v.expect(bad_slope == 0, std::to_string(bad_slope) + " window points off unit slope");
  v.expect(shrunk == 0, std::to_string(shrunk) + " windows narrower than 100 m");

  // Exact profiles of synthetic passes that all stop at both sites.
  const sim::PassScenario scenario;
  std::vector<pr::SpeedProfile> exact, estimated;
  for (std::uint64_t i = 0; i < 8; ++i) {
    const auto pass = sim::generate_pass(scenario, 42, i);
    const auto truth = std::make_shared<sim::PassKinematics>(pass.truth);
    exact.push_back(pr::analytic_profile([truth](double t) { return truth->position(t); },
                                         [truth](double t) { return truth->speed(t); }, 0.0, truth->duration()));
    estimated.push_back(*pr::two_step_estimate(pass.data).profile);
  }
  reg::RegistrationOptions opt;
  opt.landmark_count = 2;
  const auto grid_over = [](const std::vector<pr::SpeedProfile>& ps) {
    double lo = 0.0, hi = INFINITY;
    for (const auto& p : ps) {
      lo = std::max(lo, p.x_lo());
      hi = std::min(hi, p.x_hi());
    }
    std::vector<double> grid;
    for (double x = std::ceil(lo); x <= hi; x += 1.0) grid.push_back(x);
    return grid;
  };
  // Means are taken exactly at each reference stop: a 1 m grid straddling a
  // cusp would interpolate speeds of order 1 m/s into them.
  const auto mean_at = [](const std::vector<pr::SpeedProfile>& ps, const reg::RegisteredSample& rs, double x,
                          bool warped) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) sum += ps[i].speed(warped ? rs.warps[i](x) : x);
    return sum / static_cast<double>(ps.size());
  };
  const auto r = reg::register_profiles(exact, grid_over(exact), opt);
  for (double s : r.reference) {
    const double registered = mean_at(exact, r, s, true);
    v.note("stop at " + num(s) + ": registered " + num(registered));
    v.expect(registered < pr::kDefaultStopThreshold, "registered mean " + num(registered) + " at " + num(s));
  }

  // Estimated profiles: short stops may be smoothed above the threshold, so
  // only the contrast with the unregistered mean is required.
  const auto e = reg::register_profiles(estimated, grid_over(estimated), opt);
  for (double s : e.reference) {
    const double registered = mean_at(estimated, e, s, true);
    const double unregistered = mean_at(estimated, e, s, false);
    v.note("estimated, stop at " + num(s) + ": registered " + num(registered) + ", unregistered " + num(unregistered));
    v.expect(registered < 0.25 * unregistered, "estimated registered mean " + num(registered) + " not well below " +
                                                   num(unregistered) + " at " + num(s));
  }
  return v;
}

Verdict depth_suite() {
  Verdict v;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto random_sample = [&](int n) {
    dp::FunctionalSample s;
    for (int j = 0; j < 50; ++j) s.grid.push_back(j / 49.0);
    for (int i = 0; i < n; ++i) {
      const double a = z(rng), b = z(rng), c = z(rng);
      std::vector<double> curve;
      for (double x : s.grid) curve.push_back(a + b * x + 0.4 * c * std::cos(5 * x));
      s.curves.push_back(std::move(curve));
    }
    return s;
  };
  const auto constants = [](const std::vector<double>& levels) {
    dp::FunctionalSample s{{0.0, 0.5, 1.0}, {}};
    for (double c : levels) s.curves.push_back({c, c, c});
    return s;
  };

  int moved = 0, unnested = 0, uncontained = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_sample(12 + trial);
    const double h = dp::default_bandwidth(s);
    const auto d = dp::h_modal_depth(s, h);
    auto shifted = s;
    for (auto& c : shifted.curves) {
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += 3.0 * std::sin(4.0 * s.grid[j]);
    }
    const auto d2 = dp::h_modal_depth(shifted, h);
    for (std::size_t i = 0; i < d.size(); ++i) moved += std::abs(d[i] - d2[i]) > 1e-9 * std::abs(d[i]);

    const auto box = dp::functional_boxplot(s, d);
    const auto& med = s.curves[box.median_index];
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
      for (std::size_t r = 1; r < box.regions.size(); ++r) {
        unnested += box.regions[r - 1].lower[j] < box.regions[r].lower[j];
        unnested += box.regions[r - 1].upper[j] > box.regions[r].upper[j];
      }
      uncontained += med[j] < box.regions[0].lower[j] || med[j] > box.regions[0].upper[j];
    }
  }
  v.expect(moved == 0, std::to_string(moved) + " depths changed under translation");
  v.expect(unnested == 0, std::to_string(unnested) + " region nesting violations");
  v.expect(uncontained == 0, std::to_string(uncontained) + " median containment violations");

  const double bw = dp::default_bandwidth(constants({0, 1, 3}));
  v.expect(bw == 0.2, "bandwidth of {0,1,3} is " + num(bw) + ", expected 0.2");

  int missed = 0, false_alarms = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Inliers: one random shape under evenly spaced offsets; the outlier
    // sits far above the band they span.
    dp::FunctionalSample s;
    for (int j = 0; j < 50; ++j) s.grid.push_back(j / 49.0);
    const double a = z(rng), b = z(rng), spacing = 0.05 + std::abs(z(rng));
    for (int i = 0; i <= 15; ++i) {
      const double offset = i < 15 ? spacing * i : spacing * (40.0 + trial);
      std::vector<double> curve;
      for (double x : s.grid) curve.push_back(5.0 + a * x + b * std::sin(3 * x) + offset);
      s.curves.push_back(std::move(curve));
    }
    const auto box = dp::functional_boxplot(s, dp::h_modal_depth(s, dp::default_bandwidth(s)));
    missed += std::find(box.outliers.begin(), box.outliers.end(), 15u) == box.outliers.end();
    false_alarms += static_cast<int>(std::count_if(box.outliers.begin(), box.outliers.end(),
                                                   [](std::size_t i) { return i != 15u; }));
  }
  v.expect(missed == 0, std::to_string(missed) + " constructed outliers missed");
  v.expect(false_alarms == 0, std::to_string(false_alarms) + " inliers flagged");
  return v;
}

Verdict determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / ("speedprof_acceptance_" + std::to_string(std::random_device{}()));
  speedprof::config::PipelineConfig cfg;
  cfg.seed = 42;
  cfg.runs = 10;
  const auto first = speedprof::pipeline::simulate(cfg, root / "a");
  const auto second = speedprof::pipeline::simulate(cfg, root / "b");
  v.expect(first.size() == second.size(), "different report sets");
  for (std::size_t i = 0; i < std::min(first.size(), second.size()); ++i) {
    v.expect(speedprof::io::read_file(first[i]) == speedprof::io::read_file(second[i]),
             first[i].filename().string() + " differs between runs");
  }
  std::error_code ec;
  fs::remove_all(root, ec);

  for (auto f : {sim::TestFunction::F1, sim::TestFunction::F2, sim::TestFunction::F3}) {
    sim::SimulationConfig c;
    c.function = f;
    c.runs = 8;
    c.threads = 1;
    const auto sequential = sim::run_study(c).to_json();
    c.threads = 4;
    v.expect(sim::run_study(c).to_json() == sequential, sim::to_string(f) + " report depends on thread count");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-7)")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"MISE table reproduction", mise_table},
      {"cusp asymptotics", cusp},
      {"spline correctness", spline_suite},
      {"monotone fit", monotone_suite},
      {"registration", registration_suite},
      {"depth and boxplot", depth_suite},
      {"determinism", determinism},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Verdict verdict;
    try {
      verdict = criteria[i].second();
    } catch (const std::exception& e) {
      verdict.expect(false, std::string("exception: ") + e.what());
    }
    all = all && verdict.passed();
    std::printf("%s %zu %s: %s\n", verdict.passed() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                verdict.summary().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
