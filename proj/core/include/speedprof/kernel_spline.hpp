#pragma once

// Smoothing splines that use both position and speed observations.
//
// The estimator is a thin-plate spline in one dimension,
//
//   F(t) = sum_v d_v t^(v-1) + sum_i c_i E(t_i, t) + sum_i c'_i dE/ds(t_i, t),
//
// with semi-kernel E(s, t) = theta_m |s - t|^(2m - 1). Coefficients solve
//
//   (K + n lambda W^-1) c + T d = y,   T' c = 0,
//
// where K stacks the value/derivative functionals applied to E on both
// arguments, T holds the functionals applied to the monomials and W is the
// diagonal of inverse error variances.

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace speedprof::kernel_spline {

/// Noisy position and speed samples of one vehicle pass, aligned on a
/// strictly increasing time vector.
///
/// The optional per-row variance scales inflate the error variance of rows
/// that were produced by resampling (see `resample`).
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(std::vector<double> times, std::vector<double> positions,
                 std::vector<double> speeds);
  ObservationSet(std::vector<double> times, std::vector<double> positions,
                 std::vector<double> speeds, std::vector<double> position_variance_scale,
                 std::vector<double> speed_variance_scale);

  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& positions() const noexcept { return positions_; }
  const std::vector<double>& speeds() const noexcept { return speeds_; }
  const std::vector<double>& position_variance_scale() const noexcept { return x_scale_; }
  const std::vector<double>& speed_variance_scale() const noexcept { return v_scale_; }
  bool resampled() const noexcept { return resampled_; }

 private:
  void validate() const;

  std::vector<double> times_;
  std::vector<double> positions_;
  std::vector<double> speeds_;
  std::vector<double> x_scale_;
  std::vector<double> v_scale_;
  bool resampled_ = false;
};

/// Builds an ObservationSet when positions and speeds were recorded at
/// different instants. The channel with fewer samples is linearly
/// interpolated onto the times of the other one; interpolated rows get their
/// error variance doubled. Values outside the sparse channel's time range
/// are held constant at the nearest sample.
ObservationSet resample(std::span<const double> position_times, std::span<const double> positions,
                        std::span<const double> speed_times, std::span<const double> speeds);

enum class Criterion { GCV, GML };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

struct VarianceEstimates {
  double sigma_x_sq = 1.0;  // m^2
  double sigma_v_sq = 1.0;  // m^2/s^2
  Criterion criterion = Criterion::GML;
  double lambda_x = 0.0;  // smoothing parameter of the position-only smooth
  double lambda_v = 0.0;  // smoothing parameter of the speed-only smooth
};

/// Fitted derivative-informed spline. Immutable once built.
struct SplineFit {
  int order = 3;
  std::vector<double> times;
  Eigen::VectorXd d;        // polynomial coefficients, length m
  Eigen::VectorXd c;        // value-kernel coefficients, length n
  Eigen::VectorXd c_prime;  // derivative-kernel coefficients, length n
  double lambda = 0.0;
  double weight_x = 1.0;  // sigma_x^-2
  double weight_v = 1.0;  // sigma_v^-2
  double reciprocal_condition = 1.0;  // LAPACK estimate for the bordered system
  bool ill_conditioned = false;       // condition number above 1e12

  double t_min() const { return times.front(); }
  double t_max() const { return times.back(); }
};

/// theta_{m,1} = Gamma(1/2 - m) / (2^(2m) sqrt(pi) (m-1)!).
double theta(int m);

/// E_m(s, t). Throws DomainError for m < 2.
double semi_kernel(double s, double t, int m);
/// dE_m/ds.
double semi_kernel_partial_s(double s, double t, int m);
/// dE_m/dt.
double semi_kernel_partial_t(double s, double t, int m);
/// d^2 E_m / ds dt.
double semi_kernel_partial_st(double s, double t, int m);

/// 2n x 2n matrix of functionals applied to E, ordered (values, derivatives).
Eigen::MatrixXd kernel_matrix(std::span<const double> times, int m);
/// 2n x m matrix of functionals applied to the monomials 1, t, ..., t^(m-1).
Eigen::MatrixXd null_space_matrix(std::span<const double> times, int m);

/// Solves the bordered system for given lambda and variances.
/// Throws SolverError when the system is singular.
SplineFit fit(const ObservationSet& data, int m, double lambda, const VarianceEstimates& variances);

/// Position-only smoothing spline through (times, values), solved with the
/// same bordered system restricted to value functionals (c_prime == 0).
SplineFit fit_values(std::span<const double> times, std::span<const double> values, int m,
                     double lambda);

double evaluate(const SplineFit& fit, double t);
double evaluate_derivative(const SplineFit& fit, double t);
/// k-th derivative in t (k = 0 gives `evaluate`). Used for the roughness penalty.
double evaluate_nth_derivative(const SplineFit& fit, double t, int k);
/// True when t lies outside [t_1, t_n].
bool is_extrapolation(const SplineFit& fit, double t);

/// Roughness penalty integral of (F^(m))^2 over [t_1, t_n], by Gauss-Legendre
/// quadrature that is exact on each knot interval.
double roughness(const SplineFit& fit);

/// Weighted data misfit plus lambda times roughness, scaled to match the
/// linear system: (1/n) sum_j w_j (y_j - L_j F)^2 + lambda J(F).
double criterion_value(const SplineFit& fit, const ObservationSet& data);

// ---------------------------------------------------------------------------
// Single-channel smoothing and smoothing-parameter selection.

/// A standard smoothing-spline problem y_j = F(t_j) + e_j with the same
/// semi-kernel, reduced once so that scores for many lambda are cheap.
///
/// With QR of the null-space matrix T = [Q1 Q2] R, the reduced kernel
/// Q2' K Q2 = U diag(ev) U' gives I - A(lambda) = Q2 U diag(n lambda / (ev + n lambda)) U' Q2'.
class ReducedProblem {
 public:
  /// Position-only (or any single-channel) smoothing of `values` at `times`.
  ReducedProblem(std::span<const double> times, std::span<const double> values, int m);
  /// Weighted joint problem with values and derivatives (2n observations).
  ReducedProblem(const ObservationSet& data, int m, double weight_x, double weight_v);

  std::size_t observations() const noexcept { return n_obs_; }
  std::size_t knots() const noexcept { return n_knots_; }
  int null_dim() const noexcept { return m_; }

  double gcv(double lambda) const;
  double gml(double lambda) const;
  double score(double lambda, Criterion c) const;
  /// Residual quadratic forms needed for the variance estimates.
  double residual_square(double lambda) const;  // y'(I-A)^2 y
  double residual_linear(double lambda) const;  // y'(I-A) y
  double trace_residual(double lambda) const;   // tr(I - A)
  double trace_hat(double lambda) const;        // tr(A)
  /// Explicit A(lambda) in the (weighted) observation coordinates.
  Eigen::MatrixXd hat(double lambda) const;
  /// Sum of squares of the data, used to scale tie tolerances.
  double data_energy() const noexcept { return energy_; }

 private:
  void reduce(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& null_space,
              const Eigen::VectorXd& y);

  std::size_t n_obs_ = 0;
  std::size_t n_knots_ = 0;
  int m_ = 0;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd basis_;  // Q2 U
  Eigen::VectorXd z_;      // U' Q2' y
  double energy_ = 0.0;
};

/// Hat matrix of the position-only smoother, A(lambda) y = fitted values.
Eigen::MatrixXd hat_matrix(std::span<const double> times, int m, double lambda);

double gcv_score(double lambda, std::span<const double> times, std::span<const double> values, int m);
double gml_score(double lambda, std::span<const double> times, std::span<const double> values, int m);

struct LambdaSearch {
  double lambda_min = 1e-8;
  double lambda_max = 1e4;
  int grid_points = 61;
  double golden_tolerance = 1e-4;  // on log10(lambda)
};

struct LambdaChoice {
  double lambda = 0.0;
  double score = 0.0;
  bool at_upper_bound = false;
  bool at_lower_bound = false;
};

/// Minimizes `score` over a log-uniform grid, then refines the best cell by
/// golden-section search on log10(lambda). Non-finite scores are skipped.
/// Scores within `tie_floor` (absolute) or 1e-12 (relative) of the minimum
/// count as ties and go to the larger lambda; a tie at the minimum skips
/// the refinement.
LambdaChoice select_lambda(const std::function<double(double)>& score, const LambdaSearch& search,
                           double tie_floor = 0.0);

LambdaChoice select_lambda(const ReducedProblem& problem, Criterion c, const LambdaSearch& search = {});

/// Position-only and speed-only smooths; sigma^2 from the GCV or GML
/// estimator of the respective channel at its selected lambda.
/// Throws SolverError when tr(I - A) <= 0.
VarianceEstimates estimate_variances(const ObservationSet& data, int m,
                                     Criterion c = Criterion::GML,
                                     const LambdaSearch& search = {});

/// sigma^2 estimate for a single channel at a given lambda.
double variance_estimate(const ReducedProblem& problem, double lambda, Criterion c);

}  // namespace speedprof::kernel_spline
