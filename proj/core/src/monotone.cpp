#include "speedprof/monotone.hpp"

#include "speedprof/errors.hpp"

#include "gauss_legendre.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace speedprof::monotone {

namespace {

using detail::gauss5;
using detail::kGaussNodes;
using detail::kGaussWeights;

double dot_active(const BSplineBasis& basis, const Eigen::VectorXd& coef, double x, int deriv) {
  std::array<double, 8> buf{};
  int first = 0;
  basis.active(x, deriv, first, buf.data());
  double s = 0.0;
  for (int j = 0; j < basis.order(); ++j) s += coef(first + j) * buf[static_cast<std::size_t>(j)];
  return s;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  g.back() = hi;
  return g;
}

std::size_t cell_of(const std::vector<double>& grid, double t) {
  const double lo = grid.front();
  const double step = (grid.back() - lo) / static_cast<double>(grid.size() - 1);
  auto j = static_cast<std::ptrdiff_t>(std::floor((t - lo) / step));
  j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(grid.size()) - 2);
  return static_cast<std::size_t>(j);
}

// Quadrature nodes: 5-point Gauss-Legendre in every cell of a uniform grid,
// ordered cell by cell. Every cell uses the same positive-weight rule as the
// partial cells, so h is continuous across cell edges and increasing.
std::vector<double> cell_nodes(const std::vector<double>& grid) {
  std::vector<double> nodes;
  nodes.reserve((grid.size() - 1) * kGaussNodes.size());
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double half = 0.5 * (grid[j + 1] - grid[j]);
    const double mid = 0.5 * (grid[j + 1] + grid[j]);
    for (double xi : kGaussNodes) nodes.push_back(mid + half * xi);
  }
  return nodes;
}

// Running sums of cell integrals, column by column:
// out(j, c) = integral from grid[0] to grid[j] of column c of f.
void cell_cumulative(const Eigen::MatrixXd& f, double half_step, Eigen::MatrixXd& out) {
  const auto q = static_cast<Eigen::Index>(kGaussNodes.size());
  const auto cells = f.rows() / q;
  const Eigen::Map<const Eigen::VectorXd> w(kGaussWeights.data(), q);
  out.resize(cells + 1, f.cols());
  for (Eigen::Index c = 0; c < f.cols(); ++c) {
    const Eigen::Map<const Eigen::MatrixXd> blocks(f.col(c).data(), q, cells);
    const Eigen::VectorXd sums = half_step * (blocks.transpose() * w);
    double acc = 0.0;
    out(0, c) = 0.0;
    for (Eigen::Index j = 0; j < cells; ++j) out(j + 1, c) = acc += sums(j);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// MonotoneFit

MonotoneFit::MonotoneFit(double beta0, double beta1, BSplineBasis basis, Eigen::VectorXd w_coeffs,
                         double lambda, int penalty_order, int quadrature_points)
    : beta0_(beta0),
      beta1_(beta1),
      basis_(std::move(basis)),
      w_(std::move(w_coeffs)),
      lambda_(lambda),
      penalty_order_(penalty_order) {
  if (w_.size() != basis_.size()) throw DomainError("w coefficient count does not match the basis");
  if (!w_.allFinite() || !std::isfinite(beta0_) || !std::isfinite(beta1_)) {
    throw DomainError("monotone fit parameters must be finite");
  }
  if (quadrature_points < 3) throw DomainError("need at least 3 quadrature points");

  const auto bps = basis_.breakpoints();
  breaks_w_.resize(bps.size());
  for (std::size_t s = 0; s < bps.size(); ++s) breaks_w_[s] = basis_.integral(bps[s]).dot(w_);

  grid_ = uniform_grid(basis_.lo(), basis_.hi(), quadrature_points);
  const auto nodes = cell_nodes(grid_);
  Eigen::VectorXd f(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) f(static_cast<Eigen::Index>(j)) = std::exp(w_integral(nodes[j]));
  Eigen::MatrixXd cum;
  cell_cumulative(f, 0.5 * (grid_[1] - grid_[0]), cum);
  cumulative_h_.assign(cum.data(), cum.data() + cum.rows());
}

double MonotoneFit::w(double t) const { return dot_active(basis_, w_, t, 0); }

double MonotoneFit::w_integral(double t) const {
  t = std::clamp(t, basis_.lo(), basis_.hi());
  const int intervals = basis_.interior_knots() + 1;
  const double width = (basis_.hi() - basis_.lo()) / intervals;
  auto s = static_cast<std::size_t>(std::floor((t - basis_.lo()) / width));
  s = std::min(s, static_cast<std::size_t>(intervals - 1));
  const double b = basis_.lo() + (basis_.hi() - basis_.lo()) * static_cast<double>(s) / intervals;
  if (t <= b) return breaks_w_[s];
  return breaks_w_[s] + gauss5([&](double u) { return w(u); }, b, t);
}

double MonotoneFit::h(double t) const {
  t = std::clamp(t, basis_.lo(), basis_.hi());
  const std::size_t j = cell_of(grid_, t);
  const double g = grid_[j];
  if (t <= g) return cumulative_h_[j];
  return cumulative_h_[j] + gauss5([&](double u) { return std::exp(w_integral(u)); }, g, t);
}

double MonotoneFit::derivative(double t) const { return beta1_ * std::exp(w_integral(t)); }

double h_value(const MonotoneFit& fit, double t) { return fit.h(t); }
double evaluate_monotone(const MonotoneFit& fit, double t) { return fit.value(t); }
double evaluate_monotone_derivative(const MonotoneFit& fit, double t) { return fit.derivative(t); }

std::pair<double, double> profile_betas(std::span<const double> t, std::span<const double> y,
                                        const MonotoneFit& fit) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(t.size()), 2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    x(static_cast<Eigen::Index>(i), 1) = fit.h(t[i]);
  }
  const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::Vector2d b = x.colPivHouseholderQr().solve(yy);
  return {b(0), b(1)};
}

double monotone_criterion(std::span<const double> t, std::span<const double> y, const MonotoneFit& fit) {
  double ss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - fit.value(t[i]);
    ss += r * r;
  }
  const Eigen::MatrixXd pen = fit.basis().penalty(fit.penalty_order());
  return ss + fit.lambda() * fit.w_coeffs().dot(pen * fit.w_coeffs());
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

// Quantities of h and dh/da at the data points that depend only on the
// basis, the quadrature grid and the data times.
class Workspace {
 public:
  Workspace(const BSplineBasis& basis, std::span<const double> t, int quadrature_points)
      : basis_(basis), grid_(uniform_grid(basis.lo(), basis.hi(), quadrature_points)) {
    const int k = basis.size();
    half_step_ = 0.5 * (grid_[1] - grid_[0]);
    const auto nodes = cell_nodes(grid_);
    ig_.resize(static_cast<Eigen::Index>(nodes.size()), k);
    for (std::size_t j = 0; j < nodes.size(); ++j) ig_.row(static_cast<Eigen::Index>(j)) = basis.integral(nodes[j]).transpose();
    const std::size_t nq = kGaussNodes.size();
    cells_.resize(t.size());
    node_ig_.resize(t.size());
    node_w_.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::size_t j = cell_of(grid_, t[i]);
      cells_[i] = j;
      const double a = grid_[j];
      const double half = 0.5 * (t[i] - a);
      const double mid = 0.5 * (t[i] + a);
      node_ig_[i].resize(static_cast<Eigen::Index>(nq), k);
      node_w_[i].resize(static_cast<Eigen::Index>(nq));
      for (std::size_t q = 0; q < nq; ++q) {
        node_ig_[i].row(static_cast<Eigen::Index>(q)) = basis.integral(mid + half * kGaussNodes[q]).transpose();
        node_w_[i](static_cast<Eigen::Index>(q)) = std::max(half, 0.0) * kGaussWeights[q];
      }
    }
  }

  // h(t_i) for coefficients a; returns false on overflow.
  bool values(const Eigen::VectorXd& a, Eigen::VectorXd& h) const {
    const Eigen::VectorXd wg = ig_ * a;
    const Eigen::VectorXd f = wg.array().exp();
    if (!f.allFinite()) return false;
    Eigen::MatrixXd cum;
    cell_cumulative(f, half_step_, cum);
    h.resize(static_cast<Eigen::Index>(cells_.size()));
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const Eigen::VectorXd fn = (node_ig_[i] * a).array().exp();
      h(static_cast<Eigen::Index>(i)) = cum(static_cast<Eigen::Index>(cells_[i])) + node_w_[i].dot(fn);
    }
    return h.allFinite();
  }

  // h(t_i) and the Jacobian dh(t_i)/da.
  bool jacobian(const Eigen::VectorXd& a, Eigen::VectorXd& h, Eigen::MatrixXd& dh) const {
    const Eigen::VectorXd wg = ig_ * a;
    const Eigen::VectorXd f = wg.array().exp();
    if (!f.allFinite()) return false;
    // dh/da_k = integral of exp(W) IB_k
    const Eigen::MatrixXd p = (ig_.array().colwise() * f.array()).matrix();
    Eigen::MatrixXd cum, cumh;
    cell_cumulative(p, half_step_, cum);
    cell_cumulative(f, half_step_, cumh);

    const auto n = static_cast<Eigen::Index>(cells_.size());
    h.resize(n);
    dh.resize(n, a.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& nig = node_ig_[static_cast<std::size_t>(i)];
      const auto& nw = node_w_[static_cast<std::size_t>(i)];
      const Eigen::VectorXd fn = (nig * a).array().exp();
      const auto c = static_cast<Eigen::Index>(cells_[static_cast<std::size_t>(i)]);
      h(i) = cumh(c) + nw.dot(fn);
      dh.row(i) = cum.row(c) + (nw.cwiseProduct(fn)).transpose() * nig;
    }
    return h.allFinite() && dh.allFinite();
  }

 private:
  const BSplineBasis& basis_;
  std::vector<double> grid_;
  double half_step_ = 0.0;
  Eigen::MatrixXd ig_;  // integrals of the basis at the cell quadrature nodes
  std::vector<std::size_t> cells_;
  std::vector<Eigen::MatrixXd> node_ig_;  // basis integrals at Gauss nodes of the partial cell
  std::vector<Eigen::VectorXd> node_w_;
};

struct Profiled {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double ss = std::numeric_limits<double>::infinity();
};

Profiled profile(const Eigen::VectorXd& h, const Eigen::VectorXd& y) {
  const double hm = h.mean();
  const double ym = y.mean();
  const double shh = (h.array() - hm).square().sum();
  const double shy = ((h.array() - hm) * (y.array() - ym)).sum();
  Profiled p;
  p.beta1 = shh > 0.0 ? shy / shh : 0.0;
  p.beta0 = ym - p.beta1 * hm;
  p.ss = (y.array() - p.beta0 - p.beta1 * h.array()).square().sum();
  return p;
}

}  // namespace

MonotoneFit fit_monotone(std::span<const double> t, std::span<const double> y, const MonotoneOptions& options) {
  if (t.size() != y.size()) throw DataError("t and y differ in length");
  if (t.size() < 3) throw DataError("monotone fit needs at least 3 points");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw DataError("monotone fit needs strictly increasing t");
  }
  if (!(options.lambda >= 0.0)) throw DomainError("lambda must be non-negative");

  const int interior = std::min(static_cast<int>(t.size()), options.basis.max_interior_knots);
  BSplineBasis basis(t.front(), t.back(), interior, options.basis.order);
  const Eigen::MatrixXd penalty = basis.penalty(options.penalty_order);
  const Workspace ws(basis, t, options.basis.quadrature_points);
  const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const auto n = static_cast<Eigen::Index>(t.size());
  const int k = basis.size();
  const double scale = std::max(yy.squaredNorm(), 1e-300);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd h;
  Eigen::MatrixXd dh;
  if (!ws.values(a, h)) throw SolverError("monotone fit: quadrature overflow at w = 0");
  Profiled cur = profile(h, yy);
  double crit = cur.ss;

  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (crit <= 1e-28 * scale) {
      converged = true;
      break;
    }
    if (!ws.jacobian(a, h, dh)) throw SolverError("monotone fit: quadrature overflow");
    cur = profile(h, yy);
    const Eigen::VectorXd r = yy.array() - cur.beta0 - cur.beta1 * h.array();
    Eigen::MatrixXd jac(n, 2 + k);
    jac.col(0).setOnes();
    jac.col(1) = h;
    jac.rightCols(k) = cur.beta1 * dh;

    Eigen::MatrixXd normal = jac.transpose() * jac;
    const double mu = 1e-10 * std::max(normal.diagonal().maxCoeff(), 1e-300);
    normal.bottomRightCorner(k, k) += options.lambda * penalty;
    Eigen::VectorXd grad = jac.transpose() * r;
    grad.tail(k) -= options.lambda * (penalty * a);
    // Small Levenberg term, relative to the data part only so it never
    // swamps directions the penalty leaves free.
    normal.diagonal().array() += mu;
    const Eigen::VectorXd step = normal.ldlt().solve(grad);
    if (!step.allFinite()) break;

    double s = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial_h;
    for (int halving = 0; halving < 40; ++halving, s *= 0.5) {
      const Eigen::VectorXd trial = a + s * step.tail(k);
      if (!ws.values(trial, trial_h)) continue;
      const Profiled p = profile(trial_h, yy);
      const double c = p.ss + options.lambda * trial.dot(penalty * trial);
      if (std::isfinite(c) && c < crit) {
        const double decrease = (crit - c) / std::max(crit, 1e-300);
        a = trial;
        cur = p;
        crit = c;
        accepted = true;
        if (decrease < options.relative_tolerance) converged = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the Gauss-Newton direction: stationary to working precision.
      converged = true;
      break;
    }
    if (converged) {
      ++iter;
      break;
    }
  }

  MonotoneFit fit(0.0, 1.0, basis, a, options.lambda, options.penalty_order, options.basis.quadrature_points);
  const auto [b0, b1] = profile_betas(t, y, fit);
  MonotoneFit out(b0, b1, std::move(basis), std::move(a), options.lambda, options.penalty_order,
                  options.basis.quadrature_points);
  out.converged = converged;
  out.iterations = iter;
  out.criterion = monotone_criterion(t, y, out);
  return out;
}

MonotoneFit monotonize_spline(const kernel_spline::SplineFit& fit, const MonotoneOptions& options) {
  std::vector<double> values(fit.times.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = kernel_spline::evaluate(fit, fit.times[i]);
  return fit_monotone(fit.times, values, options);
}

}  // namespace speedprof::monotone
