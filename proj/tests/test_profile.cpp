#include "speedprof/errors.hpp"
#include "speedprof/profile.hpp"
#include "speedprof/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

namespace pr = speedprof::profile;
namespace sim = speedprof::simulation;
namespace ks = speedprof::kernel_spline;

namespace {

double F3(double t) { return sim::true_function(sim::TestFunction::F3, t); }
double dF3(double t) { return sim::true_derivative(sim::TestFunction::F3, t); }

pr::SpeedProfile f3_profile(double trim = 0.0) { return pr::analytic_profile(F3, dF3, 0.0, 3.0, trim); }

double max_jump(const pr::SpeedProfile& p, double lo, double hi, double step) {
  double jump = 0.0, prev = p.speed(lo);
  for (double x = lo + step; x <= hi + 1e-12; x += step) {
    const double v = p.speed(x);
    jump = std::max(jump, std::abs(v - prev));
    prev = v;
  }
  return jump;
}

}  // namespace

TEST_SUITE("profile") {
  TEST_CASE("generalized inverse") {
    const auto sq = [](double t) { return t * t; };
    CHECK(pr::generalized_inverse(sq, 0.0, 1.0, 0.25) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK_THROWS_AS(pr::generalized_inverse(sq, 0.0, 1.0, 1.5), speedprof::DomainError);
    CHECK_THROWS_AS(pr::generalized_inverse(sq, 0.0, 1.0, -0.1), speedprof::DomainError);

    // Plateau [1, 2] at level 1: the infimum is its left edge, up to the
    // floating-point resolution of F3 next to t = 1 (F3(1 - d) = 1 - 4 d^3).
    const double t = pr::generalized_inverse(F3, 0.0, 3.0, 1.0);
    CHECK(t == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(t <= 1.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = 0.5 + u(rng), b = u(rng), c = 0.2 + u(rng);
    const auto cubic = [&](double s) { return a * s + b * s * s + c * s * s * s; };
    for (int k = 0; k < 20; ++k) {
      const double x = cubic(2.0) * u(rng);
      CHECK(std::abs(cubic(pr::generalized_inverse(cubic, 0.0, 2.0, x)) - x) < 1e-8);
    }
  }

  TEST_CASE("lookup-table inverse round trip") {
    const pr::TimeDistanceCurve curve(F3, dF3, 0.0, 3.0);
    for (double x : {0.05, 0.3, 0.99, 1.2, 1.9}) CHECK(std::abs(F3(curve.inverse(x)) - x) < 1e-9);
    CHECK(curve.inverse(1.0) <= 1.0 + 1e-9);
  }

  TEST_CASE("analytic compositions") {
    const auto p = pr::analytic_profile([](double t) { return t * t; }, [](double t) { return 2 * t; }, 0.0, 1.0);
    CHECK(p.speed(0.25) == doctest::Approx(1.0).epsilon(1e-4));
    for (double x : {0.01, 0.3, 0.64, 0.9}) CHECK(p.speed(x) == doctest::Approx(2 * std::sqrt(x)).epsilon(1e-6));

    const auto f3 = f3_profile();
    CHECK(f3.speed(1.0) <= 0.1);
    CHECK(f3.speed(1.0) < f3.speed(0.9));
    CHECK(f3.speed(1.0) < f3.speed(1.1));
    for (double x = 0.0; x <= 2.0; x += 0.01) CHECK(f3.speed(x) >= 0.0);

    const auto stops = f3.stop_set();
    bool plateau = false;
    for (const auto& s : stops) plateau = plateau || (s.begin <= 1.0 + 1e-6 && s.end >= 1.0 - 1e-6);
    CHECK(plateau);
  }

  TEST_CASE("trimmed domain and the 0.01 grid") {
    const auto p = pr::analytic_profile(F3, dF3, 0.0, 3.0, 0.05);
    CHECK(p.x_lo() == doctest::Approx(0.1));
    CHECK(p.x_hi() == doctest::Approx(1.9));
    const auto grid = p.sample(0.01);
    REQUIRE(grid.size() >= 2);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i].first - grid[i - 1].first == doctest::Approx(0.01));
    CHECK(p.speed(-5.0) == p.speed(p.x_lo()));
  }

  TEST_CASE("continuity near the cusp") {
    // v behaves like |x - 1|^(2/3) next to the plateau, so a 10x finer grid
    // shrinks the largest jump by 10^(2/3) = 4.64 and no more.
    const auto p = f3_profile();
    const double coarse = max_jump(p, 0.9, 1.1, 1e-3);
    const double fine = max_jump(p, 0.9, 1.1, 1e-4);
    const double finest = max_jump(p, 0.9, 1.1, 1e-5);
    CHECK(coarse / fine == doctest::Approx(std::pow(10.0, 2.0 / 3.0)).epsilon(0.03));
    CHECK(fine / finest == doctest::Approx(std::pow(10.0, 2.0 / 3.0)).epsilon(0.03));
    // Away from the cusp v is Lipschitz and the jump shrinks tenfold.
    CHECK(max_jump(p, 0.3, 0.7, 1e-3) / max_jump(p, 0.3, 0.7, 1e-4) >= 5.0);
  }

  TEST_CASE("cusp diagnostic") {
    const auto d = pr::cusp_diagnostic(F3, dF3, 0.0, 3.0, 2.0, {0.04, 0.02, 0.01});
    CHECK(d.hypothesis_met);
    REQUIRE(d.points.size() == 3);
    for (const auto& pt : d.points) CHECK(std::abs(pt.ratio - 1.0) <= 0.05);
    CHECK(d.points[2].secant_slope > 250.0);
    CHECK(d.points[2].secant_slope / d.points[1].secant_slope == doctest::Approx(2.0).epsilon(0.05));

    const auto sq = pr::cusp_diagnostic([](double t) { return t * t; }, [](double t) { return 2 * t; }, 0.0, 1.0,
                                        0.0, {0.01});
    CHECK_FALSE(sq.hypothesis_met);
  }

  TEST_CASE("two-step estimate on a noise-free null-space polynomial") {
    std::vector<double> t, x, v;
    for (int i = 0; i < 50; ++i) {
      t.push_back(i / 49.0);
      x.push_back(1 + 2 * t.back() + t.back() * t.back());
      v.push_back(2 + 2 * t.back());
    }
    // w = (log F')' = 1/(1 + t) is not zero here, so the monotone penalty
    // biases the fit; 1e-4 needs it lowered from its default.
    pr::EstimatorConfig cfg;
    cfg.monotone.lambda = 1e-10;
    const auto r = pr::two_step_estimate({t, x, v}, cfg);
    REQUIRE(r.profile);
    double sup = 0.0;
    for (const auto& [xs, vs] : r.profile->sample(0.01)) sup = std::max(sup, std::abs(vs - 2 * std::sqrt(xs)));
    CHECK(sup < 1e-4);
  }

  TEST_CASE("a missing speed sample goes through resampling") {
    sim::SimulationConfig cfg;
    const auto full = sim::simulate_dataset(cfg, 0);
    std::vector<double> tv, v;
    for (std::size_t i = 0; i < full.size(); ++i) {
      if (i == 17) continue;
      tv.push_back(full.times()[i]);
      v.push_back(full.speeds()[i]);
    }
    const auto set = ks::resample(full.times(), full.positions(), tv, v);
    CHECK(set.resampled());
    CHECK(set.size() == full.size());
    const auto r = pr::two_step_estimate(set);
    CHECK(r.profile.has_value());
  }

  TEST_CASE("failures are stage-tagged") {
    const ks::ObservationSet tiny({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
    try {
      (void)pr::two_step_estimate(tiny);
      FAIL("expected a stage error");
    } catch (const speedprof::StageError& e) {
      CHECK(e.stage() == "variance");
    }
  }
}
