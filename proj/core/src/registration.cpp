#include "speedprof/registration.hpp"

#include "speedprof/errors.hpp"
#include "speedprof/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace speedprof::registration {

namespace {

// Smallest secant allowed next to unit-slope ends: keeps slope/secant <= 2.9,
// inside the Fritsch-Carlson box, so the segment stays strictly increasing.
constexpr double kMinSecant = 1.0 / 2.9;

struct StopGroup {
  double begin = 0.0;
  double end = 0.0;
  double min_speed = 0.0;
};

void check_grid(const std::vector<double>& grid, std::size_t values) {
  if (grid.size() != values) throw DataError("grid and values differ in length");
  if (grid.size() < 2) throw DataError("need at least two grid points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DataError("grid must be strictly increasing");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Landmarks

namespace {

// Keeps or fills to n_expected landmarks (see extract_landmarks).
Landmarks finish_landmarks(std::vector<StopGroup> stops, const std::vector<double>& grid,
                           const std::vector<double>& speeds, std::size_t n_expected, const LandmarkOptions& options) {
  Landmarks out;
  if (n_expected > 0 && stops.size() > n_expected) {
    std::stable_sort(stops.begin(), stops.end(),
                     [](const StopGroup& a, const StopGroup& b) { return a.min_speed < b.min_speed; });
    stops.resize(n_expected);
    std::sort(stops.begin(), stops.end(), [](const StopGroup& a, const StopGroup& b) { return a.begin < b.begin; });
    out.count_mismatch = true;
  }
  std::vector<std::pair<double, bool>> found;
  for (const auto& s : stops) found.emplace_back(0.5 * (s.begin + s.end), false);

  if (n_expected > found.size()) {
    out.count_mismatch = true;
    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      if (speeds[i] <= speeds[i - 1] && speeds[i] <= speeds[i + 1]) minima.push_back(i);
    }
    std::stable_sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return speeds[a] < speeds[b]; });
    const auto far_enough = [&](double x) {
      for (const auto& s : stops) {
        if (x >= s.begin - options.grouping_tolerance && x <= s.end + options.grouping_tolerance) return false;
      }
      for (const auto& f : found) {
        if (std::abs(f.first - x) <= options.grouping_tolerance) return false;
      }
      return true;
    };
    for (std::size_t i : minima) {
      if (found.size() >= n_expected) break;
      if (far_enough(grid[i])) found.emplace_back(grid[i], true);
    }
    std::sort(found.begin(), found.end());
  }
  for (const auto& [x, minimum] : found) {
    out.positions.push_back(x);
    out.from_minimum.push_back(minimum);
  }
  return out;
}

}  // namespace

Landmarks extract_landmarks(const std::vector<double>& grid, const std::vector<double>& speeds,
                            std::size_t n_expected, const LandmarkOptions& options) {
  check_grid(grid, speeds.size());
  std::vector<StopGroup> stops;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(speeds[i] < options.stop_threshold)) continue;
    if (!stops.empty() && grid[i] - stops.back().end <= options.grouping_tolerance) {
      stops.back().end = grid[i];
      stops.back().min_speed = std::min(stops.back().min_speed, speeds[i]);
    } else {
      stops.push_back({grid[i], grid[i], speeds[i]});
    }
  }
  return finish_landmarks(std::move(stops), grid, speeds, n_expected, options);
}

Landmarks extract_landmarks(const profile::SpeedProfile& profile, std::size_t n_expected, double step,
                            const LandmarkOptions& options) {
  std::vector<double> grid, speeds;
  for (const auto& [x, v] : profile.sample(step)) {
    grid.push_back(x);
    speeds.push_back(v);
  }
  std::vector<StopGroup> stops;
  for (const auto& s : profile.stop_set()) {
    if (!stops.empty() && s.begin - stops.back().end <= options.grouping_tolerance) {
      stops.back().end = s.end;
      stops.back().min_speed = std::min(stops.back().min_speed, s.min_speed);
    } else {
      stops.push_back({s.begin, s.end, s.min_speed});
    }
  }
  return finish_landmarks(std::move(stops), grid, speeds, n_expected, options);
}

std::vector<double> reference_landmarks(const std::vector<std::vector<double>>& sets) {
  if (sets.empty()) throw DataError("reference landmarks need at least one curve");
  const std::size_t k = sets.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& s : sets) {
    if (s.size() != k) throw DataError("curves have different landmark counts");
    for (std::size_t j = 0; j < k; ++j) mean[j] += s[j];
  }
  for (double& m : mean) m /= static_cast<double>(sets.size());
  return mean;
}

// ---------------------------------------------------------------------------
// Warping functions

WarpingFunction::WarpingFunction(std::vector<double> knots, std::vector<double> values, std::vector<double> slopes)
    : knots_(std::move(knots)), values_(std::move(values)), slopes_(std::move(slopes)) {
  if (knots_.size() < 2 || values_.size() != knots_.size() || slopes_.size() != knots_.size()) {
    throw DataError("warp needs matching knots, values and slopes (at least two)");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1]) || !(values_[i] > values_[i - 1])) {
      throw DataError("warp control points must be strictly increasing");
    }
  }
}

std::size_t WarpingFunction::segment(double x) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - knots_.begin() - 1, 0));
  return std::min(k, knots_.size() - 2);
}

double WarpingFunction::operator()(double x) const {
  if (x <= knots_.front()) return values_.front();
  if (x >= knots_.back()) return values_.back();
  const std::size_t k = segment(x);
  const double h = knots_[k + 1] - knots_[k];
  const double s = (x - knots_[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * values_[k] + (s3 - 2 * s2 + s) * h * slopes_[k] +
         (-2 * s3 + 3 * s2) * values_[k + 1] + (s3 - s2) * h * slopes_[k + 1];
}

double WarpingFunction::derivative(double x) const {
  x = std::clamp(x, knots_.front(), knots_.back());
  const std::size_t k = segment(x);
  const double h = knots_[k + 1] - knots_[k];
  const double s = (x - knots_[k]) / h;
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * values_[k] / h + (3 * s2 - 4 * s + 1) * slopes_[k] +
         (-6 * s2 + 6 * s) * values_[k + 1] / h + (3 * s2 - 2 * s) * slopes_[k + 1];
}

double WarpingFunction::inverse(double y) const {
  if (y <= values_.front()) return knots_.front();
  if (y >= values_.back()) return knots_.back();
  const auto it = std::upper_bound(values_.begin(), values_.end(), y);
  const auto k = static_cast<std::size_t>(it - values_.begin() - 1);
  double a = knots_[k], b = knots_[k + 1];
  const double tol = 1e-12 * std::max(1.0, knots_.back() - knots_.front());
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if ((*this)(mid) < y) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> fritsch_carlson_slopes(const std::vector<double>& x, const std::vector<double>& y,
                                           const std::vector<double>& fixed_slopes, const std::vector<bool>& fixed) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || fixed_slopes.size() != n || fixed.size() != n) {
    throw DataError("Fritsch-Carlson needs matching arrays of at least two points");
  }
  std::vector<double> delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(x[k + 1] > x[k]) || !(y[k + 1] > y[k])) throw DataError("control points must be strictly increasing");
    delta[k] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
  }
  std::vector<double> m(n);
  m.front() = delta.front();
  m.back() = delta.back();
  for (std::size_t k = 1; k + 1 < n; ++k) m[k] = 0.5 * (delta[k - 1] + delta[k]);
  for (std::size_t k = 0; k < n; ++k) {
    if (fixed[k]) m[k] = fixed_slopes[k];
  }

  for (std::size_t k = 0; k + 1 < n; ++k) {
    double a = m[k] / delta[k];
    double b = m[k + 1] / delta[k];
    if (a * a + b * b <= 9.0) continue;
    if (!fixed[k] && !fixed[k + 1]) {
      const double tau = 3.0 / std::hypot(a, b);
      a *= tau;
      b *= tau;
    } else if (!fixed[k]) {
      a = std::min(a, std::sqrt(std::max(9.0 - b * b, 0.0)));
    } else if (!fixed[k + 1]) {
      b = std::min(b, std::sqrt(std::max(9.0 - a * a, 0.0)));
    }
    m[k] = a * delta[k];
    m[k + 1] = b * delta[k];
  }
  return m;
}

WarpingFunction build_warping(const std::vector<double>& curve_landmarks, const std::vector<double>& reference,
                              double X, double window) {
  const std::size_t k = reference.size();
  if (curve_landmarks.size() != k) throw DataError("curve and reference landmark counts differ");
  if (!(X > 0.0)) throw DomainError("warp domain end must be positive");
  if (!(window >= 0.0)) throw DomainError("stop window must be non-negative");
  for (std::size_t j = 0; j < k; ++j) {
    if (!(reference[j] > 0.0 && reference[j] < X && curve_landmarks[j] > 0.0 && curve_landmarks[j] < X)) {
      throw DataError("landmarks must lie strictly inside (0, X)");
    }
    if (j > 0 && !(reference[j] > reference[j - 1] && curve_landmarks[j] > curve_landmarks[j - 1])) {
      throw DataError("landmarks must be strictly increasing");
    }
  }

  const auto fits = [&](double w) {
    // Control points (0,0), window edges, (X,X); every segment must have a
    // positive width and, next to a unit-slope end, a secant >= kMinSecant.
    double px = 0.0, py = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double ax = reference[j] - 0.5 * w, ay = curve_landmarks[j] - 0.5 * w;
      if (!(ax > px && ay > py) || (ay - py) / (ax - px) < kMinSecant) return false;
      px = reference[j] + 0.5 * w;
      py = curve_landmarks[j] + 0.5 * w;
    }
    return X > px && X > py && (X - py) / (X - px) >= kMinSecant;
  };

  double w = window;
  bool shrunk = false;
  while (w > 1e-6 * X && !fits(w)) {
    w *= 0.5;
    shrunk = true;
  }
  const bool use_windows = k > 0 && w > 1e-6 * X;

  std::vector<double> xs{0.0}, ys{0.0}, fixed_slopes{0.0};
  std::vector<bool> fixed{false};
  std::vector<std::pair<double, double>> windows;
  for (std::size_t j = 0; j < k; ++j) {
    if (use_windows) {
      for (double off : {-0.5 * w, 0.0, 0.5 * w}) {
        xs.push_back(reference[j] + off);
        ys.push_back(curve_landmarks[j] + off);
        fixed_slopes.push_back(1.0);
        fixed.push_back(true);
      }
      windows.emplace_back(reference[j] - 0.5 * w, reference[j] + 0.5 * w);
    } else {
      xs.push_back(reference[j]);
      ys.push_back(curve_landmarks[j]);
      fixed_slopes.push_back(0.0);
      fixed.push_back(false);
    }
  }
  xs.push_back(X);
  ys.push_back(X);
  fixed_slopes.push_back(0.0);
  fixed.push_back(false);

  auto slopes = fritsch_carlson_slopes(xs, ys, fixed_slopes, fixed);
  WarpingFunction h(std::move(xs), std::move(ys), std::move(slopes));
  h.windows = std::move(windows);
  h.window_width = use_windows ? w : 0.0;
  h.windows_shrunk = shrunk && k > 0;
  return h;
}

// ---------------------------------------------------------------------------
// Applying warps

double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double x) {
  if (x <= grid.front()) return values.front();
  if (x >= grid.back()) return values.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const auto i = static_cast<std::size_t>(it - grid.begin());
  const double s = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return values[i - 1] + s * (values[i] - values[i - 1]);
}

std::vector<double> apply_warp(const std::vector<double>& grid, const std::vector<double>& values,
                               const WarpingFunction& h) {
  check_grid(grid, values.size());
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = interpolate(grid, values, h(grid[i]));
  return out;
}

std::vector<double> unwarp(const std::vector<double>& grid, const std::vector<double>& values,
                           const WarpingFunction& h) {
  check_grid(grid, values.size());
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = interpolate(grid, values, h.inverse(grid[i]));
  return out;
}

std::vector<double> cross_sectional_mean(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw DataError("mean of an empty sample");
  std::vector<double> mean(curves.front().size(), 0.0);
  for (const auto& c : curves) {
    if (c.size() != mean.size()) throw DataError("curves differ in length");
    for (std::size_t i = 0; i < c.size(); ++i) mean[i] += c[i];
  }
  for (double& v : mean) v /= static_cast<double>(curves.size());
  return mean;
}

namespace {

std::size_t modal_count(const std::vector<Landmarks>& found) {
  // Most frequent landmark count, ties to the smaller.
  std::map<std::size_t, std::size_t> freq;
  for (const auto& l : found) ++freq[l.positions.size()];
  return std::max_element(freq.begin(), freq.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

template <class Extract, class Resample, class Unregistered>
RegisteredSample register_with(std::size_t n, const std::vector<double>& grid, const RegistrationOptions& options,
                               Extract extract, Resample resample, Unregistered unregistered) {
  RegisteredSample out;
  out.grid = grid;
  const std::size_t threads = worker_count();

  std::size_t count = options.landmark_count;
  if (count == 0) {
    std::vector<Landmarks> found(n);
    parallel_for(n, threads, [&](std::size_t i) { found[i] = extract(i, 0); });
    count = modal_count(found);
  }
  out.landmarks.resize(n);
  parallel_for(n, threads, [&](std::size_t i) { out.landmarks[i] = count ? extract(i, count) : Landmarks{}; });
  std::vector<std::vector<double>> sets;
  for (const auto& l : out.landmarks) {
    if (l.positions.size() != count) throw DataError("a curve has fewer candidate landmarks than required");
    sets.push_back(l.positions);
  }
  out.reference = count ? reference_landmarks(sets) : std::vector<double>{};

  const double X = grid.back();
  out.warps.resize(n);
  out.curves.resize(n);
  std::vector<std::vector<double>> raw(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out.warps[i] = build_warping(sets[i], out.reference, X, options.window);
    out.curves[i] = resample(i, out.warps[i]);
    raw[i] = unregistered(i);
  });
  out.mean = cross_sectional_mean(out.curves);
  out.unregistered_mean = cross_sectional_mean(raw);
  return out;
}

}  // namespace

RegisteredSample register_sample(const std::vector<double>& grid, const std::vector<std::vector<double>>& curves,
                                 const RegistrationOptions& options) {
  if (curves.empty()) throw DataError("registration needs at least one curve");
  for (const auto& c : curves) check_grid(grid, c.size());
  return register_with(
      curves.size(), grid, options,
      [&](std::size_t i, std::size_t k) { return extract_landmarks(grid, curves[i], k, options.landmarks); },
      [&](std::size_t i, const WarpingFunction& h) { return apply_warp(grid, curves[i], h); },
      [&](std::size_t i) { return curves[i]; });
}

RegisteredSample register_profiles(const std::vector<profile::SpeedProfile>& profiles,
                                   const std::vector<double>& grid, const RegistrationOptions& options) {
  if (profiles.empty()) throw DataError("registration needs at least one profile");
  check_grid(grid, grid.size());
  const double step = grid.size() > 1 ? (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1) : 1.0;
  const auto sample = [&](const profile::SpeedProfile& p, const auto& map) {
    std::vector<double> v(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) v[j] = p.speed(map(grid[j]));
    return v;
  };
  return register_with(
      profiles.size(), grid, options,
      [&](std::size_t i, std::size_t k) { return extract_landmarks(profiles[i], k, step, options.landmarks); },
      [&](std::size_t i, const WarpingFunction& h) { return sample(profiles[i], h); },
      [&](std::size_t i) { return sample(profiles[i], [](double x) { return x; }); });
}

}  // namespace speedprof::registration
