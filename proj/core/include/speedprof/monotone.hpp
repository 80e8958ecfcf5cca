#pragma once

// Strictly monotone smoothing in the exponential-integral form
//
//   f(t) = beta0 + beta1 * h(t),   h(t) = int_lo^t exp( int_lo^u w(v) dv ) du,
//
// with w an unconstrained cubic B-spline. beta0 and beta1 enter linearly and
// are profiled out; the coefficients of w minimize
//
//   sum_i (y_i - beta0 - beta1 h(t_i))^2 + lambda int (w^(m))^2.

#include "speedprof/bspline.hpp"
#include "speedprof/kernel_spline.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace speedprof::monotone {

struct BasisConfig {
  int max_interior_knots = 50;  // one per data point, capped
  int order = 4;                // cubic
  int quadrature_points = 2048;
};

struct MonotoneOptions {
  BasisConfig basis;
  double lambda = 1e-4;
  int penalty_order = 3;
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
};

/// A fitted monotone curve. Owns the quadrature cache for h, so evaluation
/// is read-only and safe to share across threads.
class MonotoneFit {
 public:
  MonotoneFit() = default;
  MonotoneFit(double beta0, double beta1, BSplineBasis basis, Eigen::VectorXd w_coeffs,
              double lambda, int penalty_order, int quadrature_points = 2048);

  double beta0() const noexcept { return beta0_; }
  double beta1() const noexcept { return beta1_; }
  const BSplineBasis& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& w_coeffs() const noexcept { return w_; }
  double lambda() const noexcept { return lambda_; }
  int penalty_order() const noexcept { return penalty_order_; }
  int quadrature_points() const noexcept { return static_cast<int>(grid_.size()); }
  double t_min() const noexcept { return basis_.lo(); }
  double t_max() const noexcept { return basis_.hi(); }

  /// w(t) and its running integral W(t) = int_lo^t w.
  double w(double t) const;
  double w_integral(double t) const;
  /// h(t), with t clamped to [lo, hi].
  double h(double t) const;

  double value(double t) const { return beta0_ + beta1_ * h(t); }
  double derivative(double t) const;

  // Optimizer diagnostics.
  bool converged = false;
  int iterations = 0;
  double criterion = 0.0;

 private:
  double beta0_ = 0.0;
  double beta1_ = 1.0;
  BSplineBasis basis_;
  Eigen::VectorXd w_;
  double lambda_ = 0.0;
  int penalty_order_ = 3;

  std::vector<double> breaks_w_;  // W at the breakpoints of the basis
  std::vector<double> grid_;
  std::vector<double> cumulative_h_;  // h at grid nodes
};

/// h(t) of a fit; free function mirror of MonotoneFit::h.
double h_value(const MonotoneFit& fit, double t);
double evaluate_monotone(const MonotoneFit& fit, double t);
double evaluate_monotone_derivative(const MonotoneFit& fit, double t);

/// Penalized least-squares criterion at a candidate (beta0, beta1, w).
double monotone_criterion(std::span<const double> t, std::span<const double> y, const MonotoneFit& fit);

/// Least-squares (beta0, beta1) for fixed w, i.e. regression of y on h(t).
std::pair<double, double> profile_betas(std::span<const double> t, std::span<const double> y,
                                        const MonotoneFit& fit);

/// Fits the monotone representation to (t_i, y_i) by damped Gauss-Newton
/// started from w = 0. The domain of w is [t_1, t_n].
/// Throws DataError for fewer than 3 points or non-increasing t.
MonotoneFit fit_monotone(std::span<const double> t, std::span<const double> y,
                         const MonotoneOptions& options = {});

/// Monotone projection of a derivative-informed spline: fit_monotone applied
/// to the spline's values at its own knots.
MonotoneFit monotonize_spline(const kernel_spline::SplineFit& fit, const MonotoneOptions& options = {});

}  // namespace speedprof::monotone
