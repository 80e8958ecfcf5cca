#include "speedprof/kernel_spline.hpp"

#include "speedprof/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace speedprof::kernel_spline {

namespace {

constexpr double kIllConditioned = 1e12;

void require_order(int m) {
  if (m < 2) {
    throw DomainError("spline order m must be >= 2 (derivative functionals are unbounded for m = 1)");
  }
}

// |u|^e * sign(u)^j, with |0|^0 = 1.
double signed_power(double u, int e, int j) {
  double mag = e == 0 ? 1.0 : std::pow(std::abs(u), e);
  if (j % 2 != 0) {
    if (u == 0.0) return 0.0;
    mag = u < 0.0 ? -mag : mag;
  }
  return mag;
}

// p (p-1) ... (p-k+1)
double falling(int p, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= static_cast<double>(p - i);
  return r;
}

bool strictly_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

struct KktSolution {
  Eigen::VectorXd coef;  // kernel coefficients followed by polynomial coefficients
  double rcond = 0.0;
};

// Solves [[G, T], [T', 0]] [c; d] = [y; 0] with Bunch-Kaufman (dsytrf).
KktSolution solve_bordered(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& null_space,
                           const Eigen::VectorXd& rhs) {
  const Eigen::Index n = gram.rows();
  const Eigen::Index m = null_space.cols();
  const Eigen::Index size = n + m;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  a.topLeftCorner(n, n) = gram;
  a.topRightCorner(n, m) = null_space;
  a.bottomLeftCorner(m, n) = null_space.transpose();

  const double anorm = a.cwiseAbs().colwise().sum().maxCoeff();
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(size));
  lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(size), a.data(),
                                   static_cast<lapack_int>(size), ipiv.data());
  if (info != 0) {
    throw SolverError("bordered spline system is singular (dsytrf info=" + std::to_string(info) + ")");
  }
  double rcond = 0.0;
  info = LAPACKE_dsycon(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(size), a.data(),
                        static_cast<lapack_int>(size), ipiv.data(), anorm, &rcond);
  if (info != 0 || !(rcond > 0.0)) {
    throw SolverError("bordered spline system is numerically singular");
  }

  Eigen::VectorXd b = Eigen::VectorXd::Zero(size);
  b.head(n) = rhs;
  info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(size), 1, a.data(),
                        static_cast<lapack_int>(size), ipiv.data(), b.data(),
                        static_cast<lapack_int>(size));
  if (info != 0 || !b.allFinite()) {
    throw SolverError("bordered spline solve failed");
  }
  return {std::move(b), rcond};
}

Eigen::MatrixXd value_kernel(std::span<const double> times, int m) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = semi_kernel(times[i], times[j], m);
  }
  return k;
}

Eigen::MatrixXd value_null_space(std::span<const double> times, int m) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd t(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int v = 0; v < m; ++v) {
      t(i, v) = p;
      p *= times[i];
    }
  }
  return t;
}

Eigen::VectorXd weights_of(const ObservationSet& data, double weight_x, double weight_v) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd w(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = weight_x / data.position_variance_scale()[i];
    w(n + i) = weight_v / data.speed_variance_scale()[i];
  }
  return w;
}

Eigen::VectorXd stacked_observations(const ObservationSet& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd y(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = data.positions()[i];
    y(n + i) = data.speeds()[i];
  }
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// ObservationSet

ObservationSet::ObservationSet(std::vector<double> times, std::vector<double> positions,
                               std::vector<double> speeds)
    : times_(std::move(times)), positions_(std::move(positions)), speeds_(std::move(speeds)) {
  x_scale_.assign(times_.size(), 1.0);
  v_scale_.assign(times_.size(), 1.0);
  validate();
}

ObservationSet::ObservationSet(std::vector<double> times, std::vector<double> positions,
                               std::vector<double> speeds, std::vector<double> position_variance_scale,
                               std::vector<double> speed_variance_scale)
    : times_(std::move(times)),
      positions_(std::move(positions)),
      speeds_(std::move(speeds)),
      x_scale_(std::move(position_variance_scale)),
      v_scale_(std::move(speed_variance_scale)) {
  validate();
  resampled_ = std::any_of(x_scale_.begin(), x_scale_.end(), [](double s) { return s != 1.0; }) ||
               std::any_of(v_scale_.begin(), v_scale_.end(), [](double s) { return s != 1.0; });
}

void ObservationSet::validate() const {
  const std::size_t n = times_.size();
  if (positions_.size() != n || speeds_.size() != n || x_scale_.size() != n || v_scale_.size() != n) {
    throw DataError("observation vectors must have equal length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(times_[i]) || !std::isfinite(positions_[i]) || !std::isfinite(speeds_[i])) {
      throw DataError("non-finite observation at row " + std::to_string(i));
    }
    if (!(x_scale_[i] > 0.0) || !(v_scale_[i] > 0.0)) {
      throw DataError("variance scales must be positive");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw DataError("sampling times must be strictly increasing (row " + std::to_string(i) + ")");
    }
  }
}

ObservationSet resample(std::span<const double> position_times, std::span<const double> positions,
                        std::span<const double> speed_times, std::span<const double> speeds) {
  if (position_times.size() != positions.size() || speed_times.size() != speeds.size()) {
    throw DataError("channel times and values must have equal length");
  }
  if (position_times.empty() || speed_times.empty()) {
    throw DataError("both channels need at least one sample");
  }
  if (!strictly_increasing(position_times) || !strictly_increasing(speed_times)) {
    throw DataError("channel times must be strictly increasing");
  }

  const bool positions_dense = position_times.size() >= speed_times.size();
  auto dense_t = positions_dense ? position_times : speed_times;
  auto sparse_t = positions_dense ? speed_times : position_times;
  auto sparse_v = positions_dense ? speeds : positions;

  std::vector<double> filled(dense_t.size());
  std::vector<double> scale(dense_t.size(), 1.0);
  for (std::size_t i = 0; i < dense_t.size(); ++i) {
    const double t = dense_t[i];
    auto it = std::lower_bound(sparse_t.begin(), sparse_t.end(), t);
    if (it != sparse_t.end() && *it == t) {
      filled[i] = sparse_v[static_cast<std::size_t>(it - sparse_t.begin())];
      continue;
    }
    scale[i] = 2.0;
    if (it == sparse_t.begin()) {
      filled[i] = sparse_v.front();
    } else if (it == sparse_t.end()) {
      filled[i] = sparse_v.back();
    } else {
      const auto hi = static_cast<std::size_t>(it - sparse_t.begin());
      const double w = (t - sparse_t[hi - 1]) / (sparse_t[hi] - sparse_t[hi - 1]);
      filled[i] = (1.0 - w) * sparse_v[hi - 1] + w * sparse_v[hi];
    }
  }

  std::vector<double> times(dense_t.begin(), dense_t.end());
  std::vector<double> ones(dense_t.size(), 1.0);
  if (positions_dense) {
    return ObservationSet(std::move(times), std::vector<double>(positions.begin(), positions.end()),
                          std::move(filled), std::move(ones), std::move(scale));
  }
  return ObservationSet(std::move(times), std::move(filled),
                        std::vector<double>(speeds.begin(), speeds.end()), std::move(scale),
                        std::move(ones));
}

std::string to_string(Criterion c) { return c == Criterion::GCV ? "GCV" : "GML"; }

Criterion criterion_from_string(const std::string& name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (up == "GCV") return Criterion::GCV;
  if (up == "GML") return Criterion::GML;
  throw DomainError("unknown criterion '" + name + "' (expected GCV or GML)");
}

// ---------------------------------------------------------------------------
// Semi-kernel

double theta(int m) {
  require_order(m);
  return std::tgamma(0.5 - m) /
         (std::pow(2.0, 2 * m) * std::sqrt(std::numbers::pi) * std::tgamma(static_cast<double>(m)));
}

double semi_kernel(double s, double t, int m) {
  return theta(m) * signed_power(s - t, 2 * m - 1, 0);
}

double semi_kernel_partial_s(double s, double t, int m) {
  const int p = 2 * m - 1;
  return theta(m) * p * signed_power(s - t, p - 1, 1);
}

double semi_kernel_partial_t(double s, double t, int m) { return -semi_kernel_partial_s(s, t, m); }

double semi_kernel_partial_st(double s, double t, int m) {
  const int p = 2 * m - 1;
  return -theta(m) * p * (p - 1) * signed_power(s - t, p - 2, 0);
}

Eigen::MatrixXd kernel_matrix(std::span<const double> times, int m) {
  require_order(m);
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd k(2 * n, 2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      // Row functional acts on s, column functional on t.
      k(j, i) = semi_kernel(times[j], times[i], m);
      k(j, n + i) = semi_kernel_partial_t(times[j], times[i], m);
      k(n + j, i) = semi_kernel_partial_s(times[j], times[i], m);
      k(n + j, n + i) = semi_kernel_partial_st(times[j], times[i], m);
    }
  }
  return k;
}

Eigen::MatrixXd null_space_matrix(std::span<const double> times, int m) {
  require_order(m);
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2 * n, m);
  t.topRows(n) = value_null_space(times, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;  // t^(v-2)
    for (int v = 1; v < m; ++v) {
      t(n + i, v) = v * p;
      p *= times[i];
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Fitting and evaluation

SplineFit fit(const ObservationSet& data, int m, double lambda, const VarianceEstimates& variances) {
  require_order(m);
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!(variances.sigma_x_sq > 0.0) || !(variances.sigma_v_sq > 0.0)) {
    throw DomainError("error variances must be positive");
  }
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n < m) throw DataError("need at least m sampling times");

  const double wx = 1.0 / variances.sigma_x_sq;
  const double wv = 1.0 / variances.sigma_v_sq;
  const Eigen::VectorXd w = weights_of(data, wx, wv);

  Eigen::MatrixXd gram = kernel_matrix(data.times(), m);
  gram.diagonal().array() += static_cast<double>(n) * lambda / w.array();
  const KktSolution sol = solve_bordered(gram, null_space_matrix(data.times(), m), stacked_observations(data));

  SplineFit f;
  f.order = m;
  f.times = data.times();
  f.c = sol.coef.head(n);
  f.c_prime = sol.coef.segment(n, n);
  f.d = sol.coef.tail(m);
  f.lambda = lambda;
  f.weight_x = wx;
  f.weight_v = wv;
  f.reciprocal_condition = sol.rcond;
  f.ill_conditioned = sol.rcond < 1.0 / kIllConditioned;
  return f;
}

SplineFit fit_values(std::span<const double> times, std::span<const double> values, int m,
                     double lambda) {
  require_order(m);
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (times.size() != values.size()) throw DataError("times and values differ in length");
  if (!strictly_increasing(times)) throw DataError("sampling times must be strictly increasing");
  const auto n = static_cast<Eigen::Index>(times.size());
  if (n < m) throw DataError("need at least m sampling times");

  Eigen::MatrixXd gram = value_kernel(times, m);
  gram.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  const KktSolution sol = solve_bordered(gram, value_null_space(times, m), y);

  SplineFit f;
  f.order = m;
  f.times.assign(times.begin(), times.end());
  f.c = sol.coef.head(n);
  f.c_prime = Eigen::VectorXd::Zero(n);
  f.d = sol.coef.tail(m);
  f.lambda = lambda;
  f.weight_x = 1.0;
  f.weight_v = 0.0;
  f.reciprocal_condition = sol.rcond;
  f.ill_conditioned = sol.rcond < 1.0 / kIllConditioned;
  return f;
}

double evaluate_nth_derivative(const SplineFit& fit, double t, int k) {
  const int m = fit.order;
  const int p = 2 * m - 1;
  if (k < 0 || k > p - 1) throw DomainError("derivative order out of range");
  const double th = theta(m);

  double poly = 0.0;
  for (int v = k; v < m; ++v) {
    poly += fit.d(v) * falling(v, k) * std::pow(t, v - k);
  }

  double kern = 0.0;
  const double value_factor = th * falling(p, k);
  const double deriv_factor = -th * p * falling(p - 1, k);
  for (std::size_t i = 0; i < fit.times.size(); ++i) {
    const double u = t - fit.times[i];
    const auto ii = static_cast<Eigen::Index>(i);
    kern += fit.c(ii) * value_factor * signed_power(u, p - k, k);
    if (p - 1 - k >= 0) {
      kern += fit.c_prime(ii) * deriv_factor * signed_power(u, p - 1 - k, k + 1);
    }
  }
  return poly + kern;
}

double evaluate(const SplineFit& fit, double t) { return evaluate_nth_derivative(fit, t, 0); }

double evaluate_derivative(const SplineFit& fit, double t) {
  return evaluate_nth_derivative(fit, t, 1);
}

bool is_extrapolation(const SplineFit& fit, double t) { return t < fit.t_min() || t > fit.t_max(); }

double roughness(const SplineFit& fit) {
  using Gauss = boost::math::quadrature::gauss<double, 8>;
  double total = 0.0;
  for (std::size_t i = 1; i < fit.times.size(); ++i) {
    total += Gauss::integrate(
        [&](double t) {
          const double g = evaluate_nth_derivative(fit, t, fit.order);
          return g * g;
        },
        fit.times[i - 1], fit.times[i]);
  }
  return total;
}

double criterion_value(const SplineFit& fit, const ObservationSet& data) {
  const std::size_t n = data.size();
  double misfit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rx = data.positions()[i] - evaluate(fit, data.times()[i]);
    misfit += fit.weight_x / data.position_variance_scale()[i] * rx * rx;
    if (fit.weight_v > 0.0) {
      const double rv = data.speeds()[i] - evaluate_derivative(fit, data.times()[i]);
      misfit += fit.weight_v / data.speed_variance_scale()[i] * rv * rv;
    }
  }
  return misfit / static_cast<double>(n) + fit.lambda * roughness(fit);
}

// ---------------------------------------------------------------------------
// Reduced problem, scores and variance estimates

ReducedProblem::ReducedProblem(std::span<const double> times, std::span<const double> values, int m) {
  require_order(m);
  if (times.size() != values.size()) throw DataError("times and values differ in length");
  if (!strictly_increasing(times)) throw DataError("sampling times must be strictly increasing");
  if (times.size() <= static_cast<std::size_t>(m)) throw DataError("need more than m sampling times");
  n_obs_ = times.size();
  n_knots_ = times.size();
  m_ = m;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  reduce(value_kernel(times, m), value_null_space(times, m), y);
}

ReducedProblem::ReducedProblem(const ObservationSet& data, int m, double weight_x, double weight_v) {
  require_order(m);
  if (data.size() < static_cast<std::size_t>(m)) throw DataError("need at least m sampling times");
  n_obs_ = 2 * data.size();
  n_knots_ = data.size();
  m_ = m;
  const Eigen::VectorXd sw = weights_of(data, weight_x, weight_v).cwiseSqrt();
  const Eigen::MatrixXd k = sw.asDiagonal() * kernel_matrix(data.times(), m) * sw.asDiagonal();
  const Eigen::MatrixXd t = sw.asDiagonal() * null_space_matrix(data.times(), m);
  const Eigen::VectorXd y = sw.cwiseProduct(stacked_observations(data));
  reduce(k, t, y);
}

void ReducedProblem::reduce(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& null_space,
                            const Eigen::VectorXd& y) {
  const Eigen::Index n = kernel.rows();
  const Eigen::Index m = null_space.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(null_space);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd q2 = q.rightCols(n - m);
  Eigen::MatrixXd reduced = q2.transpose() * kernel * q2;
  reduced = 0.5 * (reduced + reduced.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
  if (eig.info() != Eigen::Success) throw SolverError("eigen-decomposition of reduced kernel failed");
  eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  basis_ = q2 * eig.eigenvectors();
  z_ = basis_.transpose() * y;
  energy_ = y.squaredNorm();
}

namespace {

// Eigenvalues of I - A(lambda) restricted to the penalized subspace.
Eigen::ArrayXd residual_factors(const Eigen::VectorXd& ev, double n_lambda) {
  return n_lambda / (ev.array() + n_lambda);
}

}  // namespace

double ReducedProblem::residual_square(double lambda) const {
  const Eigen::ArrayXd r = residual_factors(eigenvalues_, static_cast<double>(n_knots_) * lambda);
  return (z_.array().square() * r.square()).sum();
}

double ReducedProblem::residual_linear(double lambda) const {
  const Eigen::ArrayXd r = residual_factors(eigenvalues_, static_cast<double>(n_knots_) * lambda);
  return (z_.array().square() * r).sum();
}

double ReducedProblem::trace_residual(double lambda) const {
  return residual_factors(eigenvalues_, static_cast<double>(n_knots_) * lambda).sum();
}

double ReducedProblem::trace_hat(double lambda) const {
  return static_cast<double>(n_obs_) - trace_residual(lambda);
}

Eigen::MatrixXd ReducedProblem::hat(double lambda) const {
  const Eigen::ArrayXd r = residual_factors(eigenvalues_, static_cast<double>(n_knots_) * lambda);
  const auto n = static_cast<Eigen::Index>(n_obs_);
  return Eigen::MatrixXd::Identity(n, n) - basis_ * r.matrix().asDiagonal() * basis_.transpose();
}

double ReducedProblem::gcv(double lambda) const {
  const double n = static_cast<double>(n_obs_);
  const double tr = trace_residual(lambda) / n;
  return (residual_square(lambda) / n) / (tr * tr);
}

double ReducedProblem::gml(double lambda) const {
  const Eigen::ArrayXd r = residual_factors(eigenvalues_, static_cast<double>(n_knots_) * lambda);
  const double dof = static_cast<double>(r.size());
  // det+(I - A) is the product of the nonzero eigenvalues r_k.
  const double log_det = r.log().sum();
  return (z_.array().square() * r).sum() / std::exp(log_det / dof);
}

double ReducedProblem::score(double lambda, Criterion c) const {
  return c == Criterion::GCV ? gcv(lambda) : gml(lambda);
}

Eigen::MatrixXd hat_matrix(std::span<const double> times, int m, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  std::vector<double> zeros(times.size(), 0.0);
  return ReducedProblem(times, zeros, m).hat(lambda);
}

double gcv_score(double lambda, std::span<const double> times, std::span<const double> values, int m) {
  return ReducedProblem(times, values, m).gcv(lambda);
}

double gml_score(double lambda, std::span<const double> times, std::span<const double> values, int m) {
  return ReducedProblem(times, values, m).gml(lambda);
}

LambdaChoice select_lambda(const std::function<double(double)>& score, const LambdaSearch& search,
                           double tie_floor) {
  if (!(search.lambda_min > 0.0) || !(search.lambda_max > search.lambda_min) || search.grid_points < 2) {
    throw DomainError("invalid lambda search range");
  }
  const double lo = std::log10(search.lambda_min);
  const double hi = std::log10(search.lambda_max);
  const int np = search.grid_points;
  std::vector<double> logs(static_cast<std::size_t>(np));
  std::vector<double> scores(static_cast<std::size_t>(np));
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < np; ++i) {
    const double l = lo + (hi - lo) * i / (np - 1);
    logs[static_cast<std::size_t>(i)] = l;
    const double s = score(std::pow(10.0, l));
    scores[static_cast<std::size_t>(i)] = std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    best = std::min(best, scores[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(best)) throw SolverError("smoothing score is non-finite on the whole lambda grid");

  const auto tolerance = [&](double ref) { return std::max(tie_floor, 1e-12 * std::abs(ref)); };

  int arg = -1;
  int tied = 0;
  for (int i = 0; i < np; ++i) {
    if (scores[static_cast<std::size_t>(i)] <= best + tolerance(best)) {
      arg = i;  // larger lambda wins ties
      ++tied;
    }
  }

  LambdaChoice out;
  out.lambda = std::pow(10.0, logs[static_cast<std::size_t>(arg)]);
  out.score = scores[static_cast<std::size_t>(arg)];

  if (tied == 1) {
    // Golden-section search on the bracket around the grid minimizer.
    double a = logs[static_cast<std::size_t>(std::max(arg - 1, 0))];
    double b = logs[static_cast<std::size_t>(std::min(arg + 1, np - 1))];
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    const auto eval = [&](double l) {
      const double s = score(std::pow(10.0, l));
      return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    };
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    while (b - a > search.golden_tolerance) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = eval(x2);
      }
    }
    const double lm = 0.5 * (a + b);
    const double fm = eval(lm);
    if (fm < out.score - tolerance(out.score)) {
      out.lambda = std::pow(10.0, lm);
      out.score = fm;
    }
  }
  out.at_upper_bound = arg == np - 1;
  out.at_lower_bound = arg == 0;
  return out;
}

LambdaChoice select_lambda(const ReducedProblem& problem, Criterion c, const LambdaSearch& search) {
  // Scores of exactly reproducible data are rounding noise; treat them as ties.
  const double floor = 1e-20 * problem.data_energy() / static_cast<double>(problem.observations());
  return select_lambda([&](double lambda) { return problem.score(lambda, c); }, search, floor);
}

double variance_estimate(const ReducedProblem& problem, double lambda, Criterion c) {
  if (c == Criterion::GCV) {
    const double tr = problem.trace_residual(lambda);
    if (!(tr > 0.0)) throw SolverError("tr(I - A) <= 0; GCV variance estimate undefined");
    return problem.residual_square(lambda) / tr;
  }
  const double dof = static_cast<double>(problem.observations()) - problem.null_dim();
  if (!(dof > 0.0)) throw SolverError("n - m <= 0; GML variance estimate undefined");
  return problem.residual_linear(lambda) / dof;
}

VarianceEstimates estimate_variances(const ObservationSet& data, int m, Criterion c,
                                     const LambdaSearch& search) {
  if (data.size() <= static_cast<std::size_t>(m)) {
    throw DataError("variance estimation needs more than m sampling times");
  }
  const ReducedProblem pos(data.times(), data.positions(), m);
  const ReducedProblem spd(data.times(), data.speeds(), m);
  const LambdaChoice lx = select_lambda(pos, c, search);
  const LambdaChoice lv = select_lambda(spd, c, search);

  VarianceEstimates out;
  out.criterion = c;
  out.lambda_x = lx.lambda;
  out.lambda_v = lv.lambda;
  out.sigma_x_sq = std::max(variance_estimate(pos, lx.lambda, c), 0.0);
  out.sigma_v_sq = std::max(variance_estimate(spd, lv.lambda, c), 0.0);
  return out;
}

}  // namespace speedprof::kernel_spline
