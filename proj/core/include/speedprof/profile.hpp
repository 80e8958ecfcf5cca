#pragma once

// Space-speed profiles v(x) = F'(F^-1(x)) built from increasing time-distance
// curves, with a plateau-safe generalized inverse.

#include "speedprof/kernel_spline.hpp"
#include "speedprof/monotone.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace speedprof::profile {

inline constexpr double kDefaultStopThreshold = 0.1;  // m/s
inline constexpr double kDefaultTrim = 0.1;

using Curve = std::function<double(double)>;

/// inf{t in [lo, hi] : F(t) >= x} for non-decreasing F, by bisection until
/// the bracket is narrower than `t_tol` (default 1e-10 (hi - lo)). On a
/// plateau at level x this is its left endpoint.
/// Throws DomainError when x lies outside [F(lo), F(hi)].
double generalized_inverse(const Curve& f, double lo, double hi, double x, double t_tol = 0.0);

/// Increasing curve on [t_lo, t_hi] with a 4096-sample lookup table that
/// seeds the bisection of its inverse.
class TimeDistanceCurve {
 public:
  TimeDistanceCurve(Curve value, Curve derivative, double t_lo, double t_hi, int table_size = 4096);

  double t_lo() const noexcept { return t_lo_; }
  double t_hi() const noexcept { return t_hi_; }
  double x_lo() const noexcept { return table_.front(); }
  double x_hi() const noexcept { return table_.back(); }

  double value(double t) const { return value_(t); }
  double derivative(double t) const { return derivative_(t); }
  /// Generalized inverse, x clamped to [x_lo, x_hi].
  double inverse(double x) const;

 private:
  Curve value_;
  Curve derivative_;
  double t_lo_ = 0.0;
  double t_hi_ = 1.0;
  std::vector<double> table_;
};

struct StopInterval {
  double begin = 0.0;
  double end = 0.0;
  double min_speed = 0.0;
};

class SpeedProfile {
 public:
  /// The evaluable domain is [x_lo + trim range, x_hi - trim range].
  SpeedProfile(std::shared_ptr<const TimeDistanceCurve> curve, double trim = kDefaultTrim,
               double stop_threshold = kDefaultStopThreshold);

  double x_lo() const noexcept { return x_lo_; }
  double x_hi() const noexcept { return x_hi_; }
  double stop_threshold() const noexcept { return stop_threshold_; }
  const TimeDistanceCurve& curve() const noexcept { return *curve_; }

  /// Speed at position x; x is clamped to the trimmed domain.
  double speed(double x) const;
  double operator()(double x) const { return speed(x); }
  /// Time at which position x is first reached (unclamped to the trim).
  double time_at(double x) const { return curve_->inverse(x); }

  /// Speeds on a uniform grid of the given step over the trimmed domain.
  std::vector<std::pair<double, double>> sample(double step) const;

  /// Positions where the speed drops below the stop threshold. A stop is a
  /// time interval that collapses to (nearly) one position, so the scan runs
  /// over `samples` uniform times and maps each sub-threshold run to [x(t_a),
  /// x(t_b)]; runs outside the trimmed domain are dropped.
  std::vector<StopInterval> stop_set(int samples = 8192) const;

 private:
  std::shared_ptr<const TimeDistanceCurve> curve_;
  double x_lo_ = 0.0;
  double x_hi_ = 0.0;
  double stop_threshold_ = kDefaultStopThreshold;
};

SpeedProfile compose_speed_profile(const monotone::MonotoneFit& fit, double trim = kDefaultTrim,
                                   double stop_threshold = kDefaultStopThreshold);

SpeedProfile analytic_profile(Curve value, Curve derivative, double t_lo, double t_hi,
                              double trim = 0.0, double stop_threshold = kDefaultStopThreshold);

struct CuspPoint {
  double theta = 0.0;
  double secant_slope = 0.0;
  double ratio = 0.0;  // secant_slope / (3 / theta)
};

struct CuspDiagnostic {
  bool hypothesis_met = false;  // F'(t0) = 0 and F'''(t0) != 0
  double first_derivative = 0.0;
  double third_derivative = 0.0;  // right-sided estimate
  std::vector<CuspPoint> points;
};

/// Secant slopes [v(x0 + d) - v(x0)] / d with d = F(t0 + theta) - F(t0),
/// which grow like 3/theta at a zero of F' with F''' != 0.
CuspDiagnostic cusp_diagnostic(const Curve& value, const Curve& derivative, double t_lo, double t_hi,
                               double t0, const std::vector<double>& thetas);

struct EstimatorConfig {
  int m = 3;
  kernel_spline::Criterion criterion = kernel_spline::Criterion::GML;
  kernel_spline::LambdaSearch search;
  monotone::MonotoneOptions monotone;
  double trim = kDefaultTrim;
  double stop_threshold = kDefaultStopThreshold;
};

struct TwoStepResult {
  kernel_spline::VarianceEstimates variances;
  kernel_spline::LambdaChoice lambda;
  kernel_spline::SplineFit spline;
  monotone::MonotoneFit monotone;
  std::optional<SpeedProfile> profile;
};

/// Variances, lambda, derivative-informed spline, monotonization, profile.
/// Failures are rethrown as StageError naming the stage.
TwoStepResult two_step_estimate(const kernel_spline::ObservationSet& trace, const EstimatorConfig& config = {});

}  // namespace speedprof::profile
