#include "speedprof/depth_boxplot.hpp"
#include "speedprof/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace dp = speedprof::depth;

namespace {

std::vector<double> unit_grid(int points = 101) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = static_cast<double>(i) / (points - 1);
  return g;
}

dp::FunctionalSample constants(const std::vector<double>& levels, int points = 101) {
  dp::FunctionalSample s{unit_grid(points), {}};
  for (double c : levels) s.curves.emplace_back(points, c);
  return s;
}

dp::FunctionalSample random_sample(std::mt19937_64& rng, int n, int points = 60) {
  std::normal_distribution<double> z(0.0, 1.0);
  dp::FunctionalSample s{unit_grid(points), {}};
  for (int i = 0; i < n; ++i) {
    const double a = z(rng), b = z(rng), c = 0.3 * z(rng);
    std::vector<double> curve(points);
    for (int j = 0; j < points; ++j) curve[j] = a + b * s.grid[j] + c * std::sin(6.0 * s.grid[j]);
    s.curves.push_back(std::move(curve));
  }
  return s;
}

}  // namespace

TEST_SUITE("depth_boxplot") {
  TEST_CASE("L2 distance") {
    const auto g = unit_grid();
    const std::vector<double> zero(g.size(), 0.0), one(g.size(), 1.0);
    CHECK(dp::l2_distance(one, one, g) == 0.0);
    CHECK(dp::l2_distance(zero, one, g) == doctest::Approx(1.0));
    CHECK_THROWS_AS(dp::l2_distance(zero, std::vector<double>(3, 0.0), g), speedprof::DataError);

    const auto f = [](double x) { return std::sin(3 * x); };
    const auto k = [](double x) { return x * x; };
    const auto eval = [](const std::vector<double>& grid, auto fn) {
      std::vector<double> y;
      for (double x : grid) y.push_back(fn(x));
      return y;
    };
    const auto coarse = unit_grid(51), fine = unit_grid(501);
    const double dc = dp::l2_distance(eval(coarse, f), eval(coarse, k), coarse);
    const double df = dp::l2_distance(eval(fine, f), eval(fine, k), fine);
    CHECK(std::abs(dc - df) / df < 1e-3);
  }

  TEST_CASE("percentile interpolates between order statistics") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(3 + trial);
      for (auto& x : v) x = u(rng);
      auto sorted = v;
      std::sort(sorted.begin(), sorted.end());
      for (double p : {0.0, 0.15, 0.5, 0.85, 1.0}) {
        const double pos = p * (sorted.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double expected =
            i + 1 < sorted.size() ? sorted[i] + (pos - i) * (sorted[i + 1] - sorted[i]) : sorted[i];
        CHECK(dp::percentile(v, p) == doctest::Approx(expected).epsilon(1e-14));
      }
    }
    CHECK_THROWS_AS(dp::percentile({}, 0.5), speedprof::DataError);
    CHECK_THROWS_AS(dp::percentile({1.0}, 1.5), speedprof::DomainError);
  }

  TEST_CASE("default bandwidth") {
    CHECK(dp::default_bandwidth(constants({2, 2, 2})) == 0.0);
    CHECK_THROWS_AS(dp::default_bandwidth(constants({1})), speedprof::DataError);
    // Pairwise multiset {0,0,0,1,1,2,2,3,3}: position 0.15 * 8 = 1.2 lies
    // between two zeros.
    CHECK(dp::default_bandwidth(constants({0, 1, 3})) == doctest::Approx(0.0));
    // Off-diagonal multiset {1,1,2,2,3,3}: position 0.75 -> 1.
    CHECK(dp::default_bandwidth(constants({0, 1, 3}), false) == doctest::Approx(1.0));
  }

  TEST_CASE("depth bandwidth falls back to off-diagonal distances") {
    const auto small = dp::depth_bandwidth(constants({0, 1, 3}));
    CHECK_FALSE(small.self_distances);
    CHECK(small.value == doctest::Approx(1.0));
    const auto same = dp::depth_bandwidth(constants({2, 2}));
    CHECK(same.value == 0.0);
    CHECK(same.self_distances);
    const auto wide = dp::depth_bandwidth(constants({0, 1, 2, 3, 4, 5, 6, 7}));
    CHECK(wide.self_distances);
    CHECK(wide.value == dp::default_bandwidth(constants({0, 1, 2, 3, 4, 5, 6, 7})));
  }

  TEST_CASE("depth values") {
    const double k0 = dp::truncated_gaussian(0.0);
    CHECK(k0 == doctest::Approx(2.0 / std::sqrt(2.0 * M_PI)));
    CHECK(dp::truncated_gaussian(-0.1) == 0.0);

    for (double d : dp::h_modal_depth(constants({1.5, 1.5, 1.5, 1.5}), 0.7)) CHECK(d == doctest::Approx(4 * k0));
    for (double d : dp::h_modal_depth(constants({1.5, 1.5, 1.5}), 0.0)) CHECK(d == 3.0);
    CHECK_THROWS_AS(dp::h_modal_depth(constants({0, 1}), 0.0), speedprof::DomainError);
    CHECK_THROWS_AS(dp::h_modal_depth(constants({0, 1}), -1.0), speedprof::DomainError);

    // c / h stays small enough that the cross terms register next to K(0).
    for (double c : {0.1, 1.0, 7.0}) {
      for (double h : {0.2 * c, c, 20.0 * c}) {
        const auto d = dp::h_modal_depth(constants({0, c, 2 * c}), h);
        CHECK(d[1] > d[0]);
        CHECK(d[1] > d[2]);
      }
    }
  }

  TEST_CASE("depth invariances") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      auto s = random_sample(rng, 12);
      const double h = dp::default_bandwidth(s);
      const auto base = dp::h_modal_depth(s, h);

      auto shifted = s;
      for (auto& c : shifted.curves) {
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += std::cos(5.0 * s.grid[j]) + 2.0;
      }
      const auto moved = dp::h_modal_depth(shifted, h);
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(moved[i] == doctest::Approx(base[i]).epsilon(1e-10));

      auto scaled = s;
      for (auto& c : scaled.curves) {
        for (auto& y : c) y *= 3.5;
      }
      const auto stretched = dp::h_modal_depth(scaled, 3.5 * h);
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(stretched[i] == doctest::Approx(base[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("boxplot of nine constants and one far curve") {
    const auto s = constants({0, 1, 2, 3, 4, 5, 6, 7, 8, 100});
    const auto depths = dp::h_modal_depth(s, dp::default_bandwidth(s));
    const auto box = dp::functional_boxplot(s, depths);
    CHECK(box.outliers == std::vector<std::size_t>{9});
    CHECK(box.median_index == 4);
    CHECK(box.whiskers.upper.front() == 8.0);
    CHECK(box.whiskers.lower.front() == 0.0);
  }

  TEST_CASE("identical curves give flat regions and no outliers") {
    const auto s = constants({2, 2, 2, 2, 2});
    const auto box = dp::functional_boxplot(s, dp::h_modal_depth(s, 0.0));
    CHECK(box.outliers.empty());
    for (const auto& r : box.regions) CHECK(r.upper == r.lower);
    CHECK(box.median_index == 0);
  }

  TEST_CASE("regions nest and contain the median") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_sample(rng, 15 + trial);
      const auto box = dp::functional_boxplot(s, dp::h_modal_depth(s, dp::default_bandwidth(s)));
      REQUIRE(box.regions.size() == 3);
      const auto& med = s.curves[box.median_index];
      CHECK(box.order.front() == box.median_index);
      for (std::size_t j = 0; j < s.grid.size(); ++j) {
        CHECK(box.regions[0].lower[j] >= box.regions[1].lower[j]);
        CHECK(box.regions[1].lower[j] >= box.regions[2].lower[j]);
        CHECK(box.regions[0].upper[j] <= box.regions[1].upper[j]);
        CHECK(box.regions[1].upper[j] <= box.regions[2].upper[j]);
        CHECK(med[j] >= box.regions[0].lower[j]);
        CHECK(med[j] <= box.regions[0].upper[j]);
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (std::find(box.outliers.begin(), box.outliers.end(), i) != box.outliers.end()) continue;
        for (std::size_t j = 0; j < s.grid.size(); ++j) {
          CHECK(s.curves[i][j] >= box.whiskers.lower[j]);
          CHECK(s.curves[i][j] <= box.whiskers.upper[j]);
        }
      }
    }
  }

  TEST_CASE("a constructed outlier is flagged and inliers are not") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      // Inliers: a random base shape shifted by evenly spaced offsets.
      auto s = constants({}, 40);
      std::normal_distribution<double> z(0.0, 1.0);
      const double a = z(rng), b = z(rng), spacing = 0.1 + std::abs(z(rng));
      for (int i = 0; i < 19; ++i) {
        std::vector<double> c;
        for (double x : s.grid) c.push_back(10.0 + a * x + b * x * x + spacing * i);
        s.curves.push_back(std::move(c));
      }
      s.curves.emplace_back(s.curves[9]);
      for (auto& y : s.curves.back()) y += 40.0 * spacing;
      const auto box = dp::functional_boxplot(s, dp::h_modal_depth(s, dp::default_bandwidth(s)));
      CHECK(box.outliers == std::vector<std::size_t>{19});
    }
  }

  TEST_CASE("boxplot input errors") {
    const auto s = constants({0, 1, 2, 3});
    CHECK_THROWS_AS(dp::functional_boxplot(s, {1, 2, 3}), speedprof::DataError);
    CHECK_THROWS_AS(dp::functional_boxplot(s, {1, 2, 3, 4}, {0.25, 0.75}), speedprof::DataError);
  }

  TEST_CASE("pointwise boxplots") {
    const auto flat = constants({4, 4, 4});
    for (const auto& st : dp::pointwise_boxplots(flat, 0.1)) {
      CHECK(st.min == 4.0);
      CHECK(st.median == 4.0);
      CHECK(st.p85 == 4.0);
    }
    const auto two = dp::pointwise_boxplots(constants({0, 10}), 0.25);
    CHECK(two.size() == 5);
    for (const auto& st : two) CHECK(st.median == 5.0);

    std::mt19937_64 rng(2);
    const auto s = random_sample(rng, 31, 51);
    const auto stations = dp::pointwise_boxplots(s, 0.2);
    for (const auto& st : stations) {
      std::vector<double> col;
      const auto j = static_cast<std::size_t>(std::lround(st.position * (s.grid.size() - 1)));
      for (const auto& c : s.curves) col.push_back(c[j]);
      std::sort(col.begin(), col.end());
      const double pos = 0.85 * 30;
      const auto i = static_cast<std::size_t>(pos);
      CHECK(st.p85 == doctest::Approx(col[i] + (pos - i) * (col[i + 1] - col[i])).epsilon(1e-9));
    }
  }
}
