#pragma once

#include <Eigen/Core>

#include <vector>

namespace speedprof {

/// Clamped B-spline basis on [lo, hi] with uniform interior knots.
class BSplineBasis {
 public:
  BSplineBasis() = default;
  /// `order` is degree + 1 (4 for cubic).
  BSplineBasis(double lo, double hi, int interior_knots, int order = 4);

  int order() const noexcept { return order_; }
  int size() const noexcept { return static_cast<int>(knots_.size()) - order_; }
  int interior_knots() const noexcept { return interior_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  /// Distinct breakpoints lo = b_0 < ... < b_{interior+1} = hi.
  std::vector<double> breakpoints() const;

  /// Index of the first nonzero basis function at x; the `order` functions
  /// starting there are the only nonzero ones.
  int first_active(double x) const;
  /// Values of the `order` active basis functions (derivative `deriv`) at x.
  void active(double x, int deriv, int& first, double* out) const;

  /// Dense vector of all basis values (or derivatives) at x.
  Eigen::VectorXd evaluate(double x, int deriv = 0) const;
  /// Dense vector of integrals from lo to x of every basis function.
  Eigen::VectorXd integral(double x) const;

  /// Gram matrix of derivative `deriv`: R_jk = int B_j^(deriv) B_k^(deriv).
  Eigen::MatrixXd penalty(int deriv) const;

 private:
  int span(double x) const;

  double lo_ = 0.0;
  double hi_ = 1.0;
  int interior_ = 0;
  int order_ = 4;
  std::vector<double> knots_;
  // cumulative_[s](j): integral of basis j from lo to breakpoint s.
  std::vector<Eigen::VectorXd> cumulative_;
};

}  // namespace speedprof
