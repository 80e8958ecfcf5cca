#include "speedprof/bspline.hpp"

#include "speedprof/errors.hpp"

#include "gauss_legendre.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace speedprof {

namespace {

constexpr int kMaxOrder = 8;
using detail::kGaussNodes;
using detail::kGaussWeights;

}  // namespace

BSplineBasis::BSplineBasis(double lo, double hi, int interior_knots, int order)
    : lo_(lo), hi_(hi), interior_(interior_knots), order_(order) {
  if (!(hi > lo)) throw DomainError("B-spline domain must have hi > lo");
  if (order < 1 || order > kMaxOrder || interior_knots < 0) {
    throw DomainError("invalid B-spline order or knot count");
  }
  knots_.reserve(static_cast<std::size_t>(2 * order + interior_knots));
  for (int i = 0; i < order; ++i) knots_.push_back(lo);
  for (int i = 1; i <= interior_knots; ++i) {
    knots_.push_back(lo + (hi - lo) * i / (interior_knots + 1));
  }
  for (int i = 0; i < order; ++i) knots_.push_back(hi);

  const auto bps = breakpoints();
  cumulative_.assign(bps.size(), Eigen::VectorXd::Zero(size()));
  std::array<double, kMaxOrder> buf{};
  for (std::size_t s = 1; s < bps.size(); ++s) {
    cumulative_[s] = cumulative_[s - 1];
    const double half = 0.5 * (bps[s] - bps[s - 1]);
    const double mid = 0.5 * (bps[s] + bps[s - 1]);
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      int first = 0;
      active(mid + half * kGaussNodes[q], 0, first, buf.data());
      for (int j = 0; j < order_; ++j) cumulative_[s](first + j) += half * kGaussWeights[q] * buf[j];
    }
  }
}

std::vector<double> BSplineBasis::breakpoints() const {
  std::vector<double> b;
  b.reserve(static_cast<std::size_t>(interior_ + 2));
  for (int i = 0; i <= interior_ + 1; ++i) b.push_back(lo_ + (hi_ - lo_) * i / (interior_ + 1));
  b.back() = hi_;
  return b;
}

int BSplineBasis::span(double x) const {
  // k with knots_[k] <= x < knots_[k+1], clamped to the nonempty spans.
  const int n = size();
  if (x >= knots_[static_cast<std::size_t>(n)]) return n - 1;
  if (x <= knots_[static_cast<std::size_t>(order_ - 1)]) return order_ - 1;
  const auto it = std::upper_bound(knots_.begin() + order_ - 1, knots_.begin() + n + 1, x);
  return std::min(static_cast<int>(it - knots_.begin()) - 1, n - 1);
}

int BSplineBasis::first_active(double x) const { return span(x) - order_ + 1; }

void BSplineBasis::active(double x, int deriv, int& first, double* out) const {
  // Cox-de Boor recursion with derivatives (Piegl & Tiller, A2.3).
  const int p = order_ - 1;
  const int k = span(x);
  first = k - p;
  if (deriv > p) {
    std::fill(out, out + order_, 0.0);
    return;
  }
  const auto& u = knots_;
  std::array<std::array<double, kMaxOrder>, kMaxOrder> ndu{};
  std::array<double, kMaxOrder> left{}, right{};
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - u[static_cast<std::size_t>(k + 1 - j)];
    right[j] = u[static_cast<std::size_t>(k + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  if (deriv == 0) {
    for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];
    return;
  }
  std::array<std::array<double, kMaxOrder>, 2> a{};
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    double d = 0.0;
    for (int kk = 1; kk <= deriv; ++kk) {
      d = 0.0;
      const int rk = r - kk;
      const int pk = p - kk;
      if (r >= kk) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? kk - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
        d += a[s2][kk] * ndu[r][pk];
      }
      std::swap(s1, s2);
    }
    out[r] = d;
  }
  double factor = p;
  for (int kk = 1; kk < deriv; ++kk) factor *= (p - kk);
  for (int r = 0; r <= p; ++r) out[r] *= factor;
}

Eigen::VectorXd BSplineBasis::evaluate(double x, int deriv) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size());
  std::array<double, kMaxOrder> buf{};
  int first = 0;
  active(x, deriv, first, buf.data());
  for (int j = 0; j < order_; ++j) v(first + j) = buf[j];
  return v;
}

Eigen::VectorXd BSplineBasis::integral(double x) const {
  x = std::clamp(x, lo_, hi_);
  const double width = (hi_ - lo_) / (interior_ + 1);
  auto s = static_cast<std::size_t>(std::floor((x - lo_) / width));
  s = std::min(s, static_cast<std::size_t>(interior_));
  const double b = lo_ + (hi_ - lo_) * static_cast<double>(s) / (interior_ + 1);
  Eigen::VectorXd out = cumulative_[s];
  if (x > b) {
    const double half = 0.5 * (x - b);
    const double mid = 0.5 * (x + b);
    std::array<double, kMaxOrder> buf{};
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      int first = 0;
      active(mid + half * kGaussNodes[q], 0, first, buf.data());
      for (int j = 0; j < order_; ++j) out(first + j) += half * kGaussWeights[q] * buf[j];
    }
  }
  return out;
}

Eigen::MatrixXd BSplineBasis::penalty(int deriv) const {
  const int n = size();
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  const auto bps = breakpoints();
  std::array<double, kMaxOrder> buf{};
  for (std::size_t s = 1; s < bps.size(); ++s) {
    const double half = 0.5 * (bps[s] - bps[s - 1]);
    const double mid = 0.5 * (bps[s] + bps[s - 1]);
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      int first = 0;
      active(mid + half * kGaussNodes[q], deriv, first, buf.data());
      const double w = half * kGaussWeights[q];
      for (int a = 0; a < order_; ++a) {
        for (int b = 0; b < order_; ++b) r(first + a, first + b) += w * buf[a] * buf[b];
      }
    }
  }
  return r;
}

}  // namespace speedprof
