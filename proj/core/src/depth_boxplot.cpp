#include "speedprof/depth_boxplot.hpp"

#include "speedprof/errors.hpp"
#include "speedprof/parallel.hpp"
#include "speedprof/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace speedprof::depth {

void FunctionalSample::validate() const {
  if (curves.empty()) throw DataError("functional sample is empty");
  if (grid.size() < 2) throw DataError("functional sample needs at least two grid points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DataError("grid must be strictly increasing");
  }
  for (const auto& c : curves) {
    if (c.size() != grid.size()) throw DataError("curve length differs from the grid");
  }
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& grid) {
  if (a.size() != b.size() || a.size() != grid.size()) throw DataError("l2_distance: mismatched lengths");
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double d0 = a[i - 1] - b[i - 1];
    const double d1 = a[i] - b[i];
    s += 0.5 * (grid[i] - grid[i - 1]) * (d0 * d0 + d1 * d1);
  }
  return std::sqrt(s);
}

std::vector<double> distance_matrix(const FunctionalSample& sample) {
  sample.validate();
  const std::size_t n = sample.size();
  std::vector<double> d(n * n, 0.0);
  parallel_for(n, worker_count(), [&](std::size_t i) {
    for (std::size_t k = i + 1; k < n; ++k) d[i * n + k] = l2_distance(sample.curves[i], sample.curves[k], sample.grid);
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) d[k * n + i] = d[i * n + k];
  }
  return d;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("percentile rank must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double default_bandwidth(const FunctionalSample& sample, bool include_self) {
  if (sample.size() < 2) throw DataError("bandwidth needs at least two curves");
  const auto d = distance_matrix(sample);
  if (include_self) return percentile(d, 0.15);
  const std::size_t n = sample.size();
  std::vector<double> off;
  off.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i != k) off.push_back(d[i * n + k]);
    }
  }
  return percentile(std::move(off), 0.15);
}

Bandwidth depth_bandwidth(const FunctionalSample& sample) {
  const double h = default_bandwidth(sample);
  if (h > 0.0) return {h, true};
  const auto d = distance_matrix(sample);
  if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) return {0.0, true};
  return {default_bandwidth(sample, false), false};
}

double truncated_gaussian(double u) {
  if (u < 0.0) return 0.0;
  return 2.0 / std::sqrt(2.0 * std::numbers::pi) * std::exp(-0.5 * u * u);
}

std::vector<double> h_modal_depth(const FunctionalSample& sample, double bandwidth) {
  const auto d = distance_matrix(sample);
  const std::size_t n = sample.size();
  if (!(bandwidth >= 0.0)) throw DomainError("bandwidth must be non-negative");
  if (bandwidth == 0.0) {
    if (std::any_of(d.begin(), d.end(), [](double v) { return v > 0.0; })) {
      throw DomainError("zero bandwidth is only defined for identical curves");
    }
    return std::vector<double>(n, static_cast<double>(n));
  }
  std::vector<double> depth(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) depth[i] += truncated_gaussian(d[i * n + k] / bandwidth);
  }
  return depth;
}

namespace {

Band envelope(const FunctionalSample& sample, const std::vector<std::size_t>& members) {
  const std::size_t g = sample.grid.size();
  Band b{std::vector<double>(g, INFINITY), std::vector<double>(g, -INFINITY)};
  for (std::size_t i : members) {
    const auto& c = sample.curves[i];
    for (std::size_t j = 0; j < g; ++j) {
      b.lower[j] = std::min(b.lower[j], c[j]);
      b.upper[j] = std::max(b.upper[j], c[j]);
    }
  }
  return b;
}

}  // namespace

FunctionalBoxplot functional_boxplot(const FunctionalSample& sample, const std::vector<double>& depths,
                                     std::vector<double> proportions) {
  sample.validate();
  const std::size_t n = sample.size();
  if (depths.size() != n) throw DataError("one depth per curve required");
  for (double p : proportions) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("boxplot proportions must lie in (0, 1]");
  }
  std::sort(proportions.begin(), proportions.end());
  const auto half = std::find(proportions.begin(), proportions.end(), 0.5);
  if (half == proportions.end()) throw DataError("boxplot proportions must include 0.5");

  FunctionalBoxplot out;
  out.proportions = proportions;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return depths[a] > depths[b]; });
  out.median_index = out.order.front();

  for (double p : proportions) {
    const auto members = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-12));
    out.regions.push_back(envelope(sample, {out.order.begin(), out.order.begin() + std::max<std::size_t>(members, 1)}));
  }

  const Band& mid = out.regions[static_cast<std::size_t>(half - proportions.begin())];
  const std::size_t g = sample.grid.size();
  out.fences = {std::vector<double>(g), std::vector<double>(g)};
  for (std::size_t j = 0; j < g; ++j) {
    const double height = mid.upper[j] - mid.lower[j];
    out.fences.lower[j] = mid.lower[j] - 1.5 * height;
    out.fences.upper[j] = mid.upper[j] + 1.5 * height;
  }

  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = sample.curves[i];
    bool outside = false;
    for (std::size_t j = 0; j < g && !outside; ++j) outside = c[j] < out.fences.lower[j] || c[j] > out.fences.upper[j];
    (outside ? out.outliers : inliers).push_back(i);
  }
  out.whiskers = envelope(sample, inliers);
  return out;
}

std::vector<StationSummary> pointwise_boxplots(const FunctionalSample& sample, double step) {
  sample.validate();
  if (!(step > 0.0)) throw DomainError("station step must be positive");
  std::vector<StationSummary> out;
  const double lo = sample.grid.front(), hi = sample.grid.back();
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> values(sample.size());
  for (std::size_t s = 0; s <= count; ++s) {
    const double x = lo + step * static_cast<double>(s);
    for (std::size_t i = 0; i < sample.size(); ++i) values[i] = registration::interpolate(sample.grid, sample.curves[i], x);
    StationSummary st;
    st.position = x;
    st.min = *std::min_element(values.begin(), values.end());
    st.max = *std::max_element(values.begin(), values.end());
    st.q1 = percentile(values, 0.25);
    st.median = percentile(values, 0.5);
    st.q3 = percentile(values, 0.75);
    st.p85 = percentile(values, 0.85);
    out.push_back(st);
  }
  return out;
}

}  // namespace speedprof::depth
