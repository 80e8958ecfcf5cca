#include "speedprof/errors.hpp"
#include "speedprof/registration.hpp"
#include "speedprof/simulation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace reg = speedprof::registration;

namespace {

std::vector<double> road_grid(double X = 1100.0, double step = 1.0) {
  std::vector<double> g;
  for (double x = 0.0; x <= X + 1e-9; x += step) g.push_back(x);
  return g;
}

// Cruise at 12 m/s with V-shaped dips and a 6 m standstill at each stop.
std::vector<double> dipped(const std::vector<double>& grid, const std::vector<double>& stops, double half_width = 60.0) {
  std::vector<double> v(grid.size(), 12.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double s : stops) v[i] = std::min(v[i], 12.0 * std::clamp((std::abs(grid[i] - s) - 3.0) / half_width, 0.0, 1.0));
  }
  return v;
}

}  // namespace

TEST_SUITE("registration") {
  TEST_CASE("landmarks are midpoints of sub-threshold intervals") {
    const auto grid = road_grid();
    std::vector<double> v(grid.size(), 10.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (grid[i] >= 235 && grid[i] <= 245) v[i] = 0.0;
      if (grid[i] >= 725 && grid[i] <= 735) v[i] = 0.05;
    }
    const auto lm = reg::extract_landmarks(grid, v, 2);
    REQUIRE(lm.positions.size() == 2);
    CHECK(lm.positions[0] == doctest::Approx(240.0));
    CHECK(lm.positions[1] == doctest::Approx(730.0));
    CHECK_FALSE(lm.count_mismatch);
    CHECK_FALSE(lm.from_minimum[0]);
  }

  TEST_CASE("a missing stop is filled from the deepest minimum and flagged") {
    const auto grid = road_grid();
    auto v = dipped(grid, {240.0});
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = std::min(v[i], 2.0 + std::abs(grid[i] - 730.0) / 10.0);
    const auto lm = reg::extract_landmarks(grid, v, 2);
    REQUIRE(lm.positions.size() == 2);
    CHECK(lm.count_mismatch);
    CHECK(lm.positions[0] == doctest::Approx(240.0));
    CHECK(lm.positions[1] == doctest::Approx(730.0));
    CHECK_FALSE(lm.from_minimum[0]);
    CHECK(lm.from_minimum[1]);
  }

  TEST_CASE("surplus stops drop the shallowest") {
    const auto grid = road_grid();
    auto v = dipped(grid, {240.0, 730.0});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid[i] - 500.0) <= 2.0) v[i] = 0.09;
    }
    const auto lm = reg::extract_landmarks(grid, v, 2);
    REQUIRE(lm.positions.size() == 2);
    CHECK(lm.count_mismatch);
    CHECK(lm.positions[0] == doctest::Approx(240.0));
    CHECK(lm.positions[1] == doctest::Approx(730.0));
    CHECK(reg::extract_landmarks(grid, v, 0).positions.size() == 3);
  }

  TEST_CASE("noisy sub-threshold samples within the tolerance form one stop") {
    const auto grid = road_grid();
    std::vector<double> v(grid.size(), 10.0);
    for (double x : {236.0, 238.0, 243.0, 251.0}) v[static_cast<std::size_t>(x)] = 0.02;
    const auto lm = reg::extract_landmarks(grid, v, 0);
    REQUIRE(lm.positions.size() == 1);
    CHECK(lm.positions[0] == doctest::Approx(243.5));
  }

  TEST_CASE("reference landmarks") {
    const auto ref = reg::reference_landmarks({{230, 720}, {250, 740}, {240, 730}});
    CHECK(ref == std::vector<double>{240, 730});
    CHECK_THROWS_AS(reg::reference_landmarks({{230, 720}, {250}}), speedprof::DataError);
    CHECK_THROWS_AS(reg::reference_landmarks({}), speedprof::DataError);
  }

  TEST_CASE("identity warp when landmarks match the reference") {
    const auto h = reg::build_warping({240, 730}, {240, 730}, 1100);
    for (double x = 0; x <= 1100; x += 7.3) CHECK(h(x) == doctest::Approx(x).epsilon(1e-12));
  }

  TEST_CASE("a single landmark pair") {
    const double X = 1100;
    const auto h = reg::build_warping({280}, {240}, X);
    CHECK(h(0.0) == 0.0);
    CHECK(h(X) == X);
    CHECK(h(240.0) == doctest::Approx(280.0));
    CHECK_FALSE(h.windows_shrunk);
    REQUIRE(h.windows.size() == 1);
    CHECK(h.windows[0].first == doctest::Approx(190.0));
    CHECK(h.windows[0].second == doctest::Approx(290.0));
    for (double x = 190; x <= 290; x += 5) {
      CHECK(h.derivative(x) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(h(x) - x == doctest::Approx(40.0).epsilon(1e-9));
    }
  }

  TEST_CASE("randomized landmark configurations give increasing warps") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double X = 800.0 + 600.0 * u(rng);
      const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 3);
      std::vector<double> ref, cur;
      for (std::size_t j = 0; j < k; ++j) {
        const double base = X * (j + 1.0) / (k + 1.0);
        ref.push_back(base + (u(rng) - 0.5) * X / (4.0 * (k + 1)));
        cur.push_back(base + (u(rng) - 0.5) * X / (4.0 * (k + 1)));
      }
      const auto h = reg::build_warping(cur, ref, X);
      CHECK(h(0.0) == 0.0);
      CHECK(h(X) == X);
      for (std::size_t j = 0; j < k; ++j) CHECK(h(ref[j]) == doctest::Approx(cur[j]).epsilon(1e-9));
      double prev = h(0.0);
      bool increasing = true;
      for (int i = 1; i <= 2000; ++i) {
        const double y = h(X * i / 2000.0);
        increasing = increasing && y > prev;
        prev = y;
      }
      CHECK(increasing);
      for (const auto& [a, b] : h.windows) CHECK(h.derivative(0.5 * (a + b)) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("unordered or out-of-range landmarks are rejected") {
    CHECK_THROWS_AS(reg::build_warping({730, 240}, {240, 730}, 1100), speedprof::DataError);
    CHECK_THROWS_AS(reg::build_warping({1200}, {240}, 1100), speedprof::DataError);
  }

  TEST_CASE("apply and undo a warp") {
    const auto grid = road_grid();
    const auto v = dipped(grid, {260.0, 700.0});
    const auto h = reg::build_warping({260, 700}, {240, 730}, 1100);
    const auto registered = reg::apply_warp(grid, v, h);
    CHECK(registered[240] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(registered[730] == doctest::Approx(0.0).epsilon(1e-9));
    const auto back = reg::unwarp(grid, registered, h);
    for (std::size_t i = 0; i < grid.size(); i += 10) CHECK(std::abs(back[i] - v[i]) < 0.25);
    CHECK(h.inverse(h(512.0)) == doctest::Approx(512.0).epsilon(1e-10));
  }

  TEST_CASE("cross-sectional mean") {
    CHECK(reg::cross_sectional_mean({{1, 2, 3}, {3, 4, 5}}) == std::vector<double>{2, 3, 4});
    CHECK_THROWS_AS(reg::cross_sectional_mean({}), speedprof::DataError);
    CHECK_THROWS_AS(reg::cross_sectional_mean({{1, 2}, {1}}), speedprof::DataError);
  }

  TEST_CASE("the registered mean keeps the stops") {
    const auto grid = road_grid();
    std::vector<std::vector<double>> curves;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> jitter(0.0, 15.0);
    for (int i = 0; i < 12; ++i) curves.push_back(dipped(grid, {240.0 + jitter(rng), 730.0 + jitter(rng)}));
    const auto r = reg::register_sample(grid, curves);
    REQUIRE(r.reference.size() == 2);
    const auto at = [&](const std::vector<double>& c, double x) { return reg::interpolate(grid, c, x); };
    for (double s : r.reference) {
      CHECK(at(r.mean, s) < 0.1);
      CHECK(at(r.unregistered_mean, s) > at(r.mean, s));
    }
  }

  TEST_CASE("modal landmark count and parallel determinism") {
    const auto grid = road_grid();
    std::vector<std::vector<double>> curves;
    for (int i = 0; i < 6; ++i) curves.push_back(dipped(grid, {230.0 + 4 * i, 720.0 + 3 * i}));
    curves.push_back(dipped(grid, {250.0}));
    const auto a = reg::register_sample(grid, curves);
    CHECK(a.reference.size() == 2);
    CHECK(a.landmarks.back().count_mismatch);
    const auto b = reg::register_sample(grid, curves);
    CHECK(a.curves == b.curves);
  }
}
