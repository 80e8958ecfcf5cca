#include "speedprof/profile.hpp"

#include "speedprof/errors.hpp"

#include <algorithm>
#include <cmath>

namespace speedprof::profile {

namespace {

double bisect_first_reach(const Curve& f, double a, double b, double x, double t_tol) {
  // Invariant: f(a) < x <= f(b), except when a is the domain start.
  while (b - a > t_tol) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (f(mid) >= x) {
      b = mid;
    } else {
      a = mid;
    }
  }
  return b;
}

double sq_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double generalized_inverse(const Curve& f, double lo, double hi, double x, double t_tol) {
  if (!(hi > lo)) throw DomainError("generalized_inverse: empty time interval");
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  const double slack = 1e-12 * std::max({1.0, std::abs(f_lo), std::abs(f_hi)});
  if (!(x >= f_lo - slack && x <= f_hi + slack)) {
    throw DomainError("generalized_inverse: x outside [F(lo), F(hi)]");
  }
  if (t_tol <= 0.0) t_tol = 1e-10 * (hi - lo);
  if (x <= f_lo) return lo;
  return bisect_first_reach(f, lo, hi, x, t_tol);
}

// ---------------------------------------------------------------------------

TimeDistanceCurve::TimeDistanceCurve(Curve value, Curve derivative, double t_lo, double t_hi, int table_size)
    : value_(std::move(value)), derivative_(std::move(derivative)), t_lo_(t_lo), t_hi_(t_hi) {
  if (!(t_hi > t_lo)) throw DomainError("time-distance curve needs t_hi > t_lo");
  if (table_size < 2) throw DomainError("lookup table needs at least 2 samples");
  table_.resize(static_cast<std::size_t>(table_size));
  for (int i = 0; i < table_size; ++i) {
    const double t = i + 1 == table_size ? t_hi : t_lo + (t_hi - t_lo) * i / (table_size - 1);
    table_[static_cast<std::size_t>(i)] = value_(t);
  }
  const double wobble = 1e-12 * std::max({1.0, std::abs(table_.front()), std::abs(table_.back())});
  for (std::size_t i = 1; i < table_.size(); ++i) {
    if (table_[i] < table_[i - 1] - wobble) throw DomainError("time-distance curve is not non-decreasing");
    table_[i] = std::max(table_[i], table_[i - 1]);
  }
}

double TimeDistanceCurve::inverse(double x) const {
  if (x <= table_.front()) return t_lo_;
  if (x >= table_.back()) x = table_.back();
  const auto it = std::lower_bound(table_.begin(), table_.end(), x);
  const auto j = static_cast<std::size_t>(it - table_.begin());
  const double step = (t_hi_ - t_lo_) / static_cast<double>(table_.size() - 1);
  const double b = j + 1 == table_.size() ? t_hi_ : t_lo_ + step * static_cast<double>(j);
  const double a = t_lo_ + step * static_cast<double>(j - 1);
  return bisect_first_reach(value_, a, b, x, 1e-10 * (t_hi_ - t_lo_));
}

// ---------------------------------------------------------------------------

SpeedProfile::SpeedProfile(std::shared_ptr<const TimeDistanceCurve> curve, double trim, double stop_threshold)
    : curve_(std::move(curve)), stop_threshold_(stop_threshold) {
  if (!curve_) throw DomainError("speed profile needs a curve");
  if (!(trim >= 0.0 && trim < 0.5)) throw DomainError("trim fraction must lie in [0, 0.5)");
  if (!(stop_threshold >= 0.0)) throw DomainError("stop threshold must be non-negative");
  const double range = curve_->x_hi() - curve_->x_lo();
  x_lo_ = curve_->x_lo() + trim * range;
  x_hi_ = curve_->x_hi() - trim * range;
}

double SpeedProfile::speed(double x) const {
  x = std::clamp(x, x_lo_, x_hi_);
  return std::max(curve_->derivative(curve_->inverse(x)), 0.0);
}

std::vector<std::pair<double, double>> SpeedProfile::sample(double step) const {
  if (!(step > 0.0)) throw DomainError("sampling step must be positive");
  std::vector<std::pair<double, double>> out;
  const auto count = static_cast<std::size_t>(std::floor((x_hi_ - x_lo_) / step + 1e-9));
  out.reserve(count + 2);
  for (std::size_t i = 0; i <= count; ++i) {
    const double x = std::min(x_lo_ + step * static_cast<double>(i), x_hi_);
    out.emplace_back(x, speed(x));
  }
  if (out.back().first < x_hi_ - 1e-12 * std::max(1.0, std::abs(x_hi_))) out.emplace_back(x_hi_, speed(x_hi_));
  return out;
}

std::vector<StopInterval> SpeedProfile::stop_set(int samples) const {
  if (samples < 2) throw DomainError("stop scan needs at least two samples");
  std::vector<StopInterval> out;
  const double lo = curve_->t_lo(), hi = curve_->t_hi();
  bool open = false;
  for (int i = 0; i < samples; ++i) {
    const double t = i + 1 == samples ? hi : lo + (hi - lo) * i / (samples - 1);
    const double v = curve_->derivative(t);
    if (v < stop_threshold_) {
      const double x = curve_->value(t);
      if (!open) out.push_back({x, x, v});
      out.back().end = x;
      out.back().min_speed = std::min(out.back().min_speed, v);
      open = true;
    } else {
      open = false;
    }
  }
  std::erase_if(out, [&](const StopInterval& s) { return s.end < x_lo_ || s.begin > x_hi_; });
  return out;
}

SpeedProfile compose_speed_profile(const monotone::MonotoneFit& fit, double trim, double stop_threshold) {
  if (!(fit.beta1() > 0.0)) throw DomainError("monotone fit is not increasing (beta1 <= 0)");
  auto shared = std::make_shared<const monotone::MonotoneFit>(fit);
  auto curve = std::make_shared<const TimeDistanceCurve>(
      [shared](double t) { return shared->value(t); },
      [shared](double t) { return shared->derivative(t); }, fit.t_min(), fit.t_max());
  return SpeedProfile(std::move(curve), trim, stop_threshold);
}

SpeedProfile analytic_profile(Curve value, Curve derivative, double t_lo, double t_hi, double trim,
                              double stop_threshold) {
  auto curve = std::make_shared<const TimeDistanceCurve>(std::move(value), std::move(derivative), t_lo, t_hi);
  return SpeedProfile(std::move(curve), trim, stop_threshold);
}

// ---------------------------------------------------------------------------

CuspDiagnostic cusp_diagnostic(const Curve& value, const Curve& derivative, double t_lo, double t_hi,
                               double t0, const std::vector<double>& thetas) {
  CuspDiagnostic out;
  const double e = 1e-3 * (t_hi - t_lo);
  out.first_derivative = derivative(t0);
  // Right-sided second difference of F': the left side may be a plateau.
  out.third_derivative = (derivative(t0 + 2.0 * e) - 2.0 * derivative(t0 + e) + out.first_derivative) / (e * e);
  const double scale = std::max(1.0, std::abs(derivative(t_hi)) + std::abs(derivative(t_lo)));
  out.hypothesis_met = std::abs(out.first_derivative) <= 1e-9 * scale && std::abs(out.third_derivative) > 1e-6 * scale;
  if (!out.hypothesis_met) return out;

  const auto prof = analytic_profile(value, derivative, t_lo, t_hi);
  const double x0 = value(t0);
  const double v0 = prof.speed(x0);
  for (double theta : thetas) {
    if (!(theta > 0.0) || t0 + theta > t_hi) throw DomainError("cusp_diagnostic: theta must keep t0 + theta in range");
    const double d = value(t0 + theta) - x0;
    CuspPoint p;
    p.theta = theta;
    p.secant_slope = (prof.speed(x0 + d) - v0) / d;
    p.ratio = p.secant_slope / (3.0 / theta);
    out.points.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

TwoStepResult two_step_estimate(const kernel_spline::ObservationSet& trace, const EstimatorConfig& config) {
  namespace ks = kernel_spline;
  TwoStepResult out;
  const auto stage = [](const char* name, auto&& body) {
    try {
      return body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  out.variances = stage("variance", [&] { return ks::estimate_variances(trace, config.m, config.criterion, config.search); });
  // Noise-free channels give sigma^2 = 0; keep the weights finite.
  out.variances.sigma_x_sq = std::max(out.variances.sigma_x_sq, 1e-14 * (1.0 + sq_mean(trace.positions())));
  out.variances.sigma_v_sq = std::max(out.variances.sigma_v_sq, 1e-14 * (1.0 + sq_mean(trace.speeds())));

  out.lambda = stage("lambda", [&] {
    const ks::ReducedProblem joint(trace, config.m, 1.0 / out.variances.sigma_x_sq, 1.0 / out.variances.sigma_v_sq);
    return ks::select_lambda(joint, config.criterion, config.search);
  });
  out.spline = stage("spline", [&] { return ks::fit(trace, config.m, out.lambda.lambda, out.variances); });
  out.monotone = stage("monotone", [&] { return monotone::monotonize_spline(out.spline, config.monotone); });
  out.profile = stage("profile", [&] { return compose_speed_profile(out.monotone, config.trim, config.stop_threshold); });
  return out;
}

}  // namespace speedprof::profile
