#pragma once

// Landmark registration of grid-sampled speed profiles. A warp h maps the
// reference axis onto a curve's own axis, h(reference_j) = landmark_j, and
// the registered curve is f(h(x)). Around each reference landmark h has unit
// slope so a stop keeps its shape.

#include "speedprof/profile.hpp"

#include <cstddef>
#include <vector>

namespace speedprof::registration {

inline constexpr double kDefaultWindow = 100.0;            // m
inline constexpr double kDefaultGroupingTolerance = 20.0;  // m

struct Landmarks {
  std::vector<double> positions;
  // Per landmark: true when it came from a local minimum rather than a stop.
  std::vector<bool> from_minimum;
  bool count_mismatch = false;
};

struct LandmarkOptions {
  double stop_threshold = profile::kDefaultStopThreshold;
  double grouping_tolerance = kDefaultGroupingTolerance;
};

/// Stops are maximal groups of sub-threshold samples (gaps up to the grouping
/// tolerance are bridged); each contributes the midpoint of its extent. With
/// n_expected > 0, missing stops are filled from the deepest local minima and
/// surplus stops drop the shallowest; either case sets count_mismatch.
/// n_expected = 0 returns every stop found.
Landmarks extract_landmarks(const std::vector<double>& grid, const std::vector<double>& speeds,
                            std::size_t n_expected, const LandmarkOptions& options = {});
/// Stops from the profile's time-domain stop set (the option's threshold is
/// ignored in favour of the profile's); fills from minima on a `step` grid.
Landmarks extract_landmarks(const profile::SpeedProfile& profile, std::size_t n_expected, double step = 1.0,
                            const LandmarkOptions& options = {});

/// Component-wise mean. Throws DataError on mismatched counts or an empty list.
std::vector<double> reference_landmarks(const std::vector<std::vector<double>>& sets);

/// Monotone piecewise-cubic Hermite map of [0, X] onto itself.
class WarpingFunction {
 public:
  WarpingFunction() = default;
  WarpingFunction(std::vector<double> knots, std::vector<double> values, std::vector<double> slopes);

  double operator()(double x) const;
  double derivative(double x) const;
  /// h^-1(y) by bisection, |dx| < 1e-12 X.
  double inverse(double y) const;

  double domain_end() const noexcept { return knots_.empty() ? 0.0 : knots_.back(); }
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& slopes() const noexcept { return slopes_; }

  /// Unit-slope intervals in reference coordinates.
  std::vector<std::pair<double, double>> windows;
  double window_width = 0.0;
  bool windows_shrunk = false;

 private:
  std::size_t segment(double x) const;

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

/// Fritsch-Carlson slopes for increasing data, with `fixed[k]` slopes left
/// untouched. Free slopes are limited so each segment stays monotone.
std::vector<double> fritsch_carlson_slopes(const std::vector<double>& x, const std::vector<double>& y,
                                           const std::vector<double>& fixed_slopes, const std::vector<bool>& fixed);

/// Warp with h(0) = 0, h(X) = X, h(reference_j) = curve_j and unit slope on
/// [reference_j - w/2, reference_j + w/2]. Windows that overlap, leave
/// (0, X), or force a non-monotone segment are halved until they fit
/// (windows_shrunk); if they vanish the warp interpolates the landmarks alone.
/// Throws DataError for unordered landmarks or landmarks outside (0, X).
WarpingFunction build_warping(const std::vector<double>& curve_landmarks,
                              const std::vector<double>& reference, double X, double window = kDefaultWindow);

/// Linear interpolation of (grid, values) at x, clamped to the grid.
double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double x);

/// Registered curve f(h(x)) on the same grid.
std::vector<double> apply_warp(const std::vector<double>& grid, const std::vector<double>& values,
                               const WarpingFunction& h);
/// Undoes apply_warp: g(h^-1(x)).
std::vector<double> unwarp(const std::vector<double>& grid, const std::vector<double>& values,
                           const WarpingFunction& h);

/// Pointwise mean. Throws DataError for an empty sample or ragged curves.
std::vector<double> cross_sectional_mean(const std::vector<std::vector<double>>& curves);

struct RegistrationOptions {
  std::size_t landmark_count = 0;  // 0: use the stop count of the first curve
  double window = kDefaultWindow;
  LandmarkOptions landmarks;
};

struct RegisteredSample {
  std::vector<double> grid;
  std::vector<double> reference;
  std::vector<Landmarks> landmarks;
  std::vector<WarpingFunction> warps;
  std::vector<std::vector<double>> curves;
  std::vector<double> mean;
  std::vector<double> unregistered_mean;
};

/// Landmarks, reference, warps and registered curves for curves sampled on a
/// common grid starting at 0. Curves are processed in parallel.
RegisteredSample register_sample(const std::vector<double>& grid, const std::vector<std::vector<double>>& curves,
                                 const RegistrationOptions& options = {});

/// As register_sample, but landmarks come from each profile's stop set and
/// registered curves are evaluated exactly, v(h(x)), on `grid`.
RegisteredSample register_profiles(const std::vector<profile::SpeedProfile>& profiles,
                                   const std::vector<double>& grid, const RegistrationOptions& options = {});

}  // namespace speedprof::registration
