#pragma once

// h-modal depth and functional boxplots of curves sampled on a common grid.

#include <cstddef>
#include <vector>

namespace speedprof::depth {

struct FunctionalSample {
  std::vector<double> grid;
  std::vector<std::vector<double>> curves;

  std::size_t size() const noexcept { return curves.size(); }
  /// Throws DataError for an empty sample, ragged curves or a bad grid.
  void validate() const;
};

/// sqrt of the trapezoid integral of (a - b)^2.
double l2_distance(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& grid);

/// Symmetric matrix of pairwise L2 distances, row-major n x n.
std::vector<double> distance_matrix(const FunctionalSample& sample);

/// Percentile p in [0, 1] with linear interpolation between closest order
/// statistics: position (n - 1) p in the sorted values.
double percentile(std::vector<double> values, double p);

/// 15th percentile of the n^2 pairwise distances (self-distances included
/// unless `include_self` is false).
double default_bandwidth(const FunctionalSample& sample, bool include_self = true);

struct Bandwidth {
  double value = 0.0;
  bool self_distances = true;  // false: the off-diagonal fallback was used
};

/// default_bandwidth, except that a zero value for curves that are not all
/// identical (any n <= 5, or many coincident curves) falls back to the
/// off-diagonal percentile so the depth stays defined.
Bandwidth depth_bandwidth(const FunctionalSample& sample);

/// Half-normal kernel 2/sqrt(2 pi) exp(-u^2 / 2) for u >= 0, else 0.
double truncated_gaussian(double u);

/// depth_i = sum_k K(||x_i - x_k|| / h). A zero bandwidth is accepted only
/// when every distance is zero and gives depth n for every curve.
std::vector<double> h_modal_depth(const FunctionalSample& sample, double bandwidth);

struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct FunctionalBoxplot {
  std::size_t median_index = 0;
  std::vector<std::size_t> order;  // curve indices by decreasing depth
  std::vector<double> proportions;
  std::vector<Band> regions;  // one per proportion
  Band fences;
  Band whiskers;
  std::vector<std::size_t> outliers;
};

/// Regions over the ceil(p n) deepest curves; fences extend the 50% region by
/// 1.5 times its height; curves leaving the fences anywhere are outliers.
/// Depth ties go to the lower index. Throws DataError when 0.5 is missing
/// from the proportions or the depths do not match the sample.
FunctionalBoxplot functional_boxplot(const FunctionalSample& sample, const std::vector<double>& depths,
                                     std::vector<double> proportions = {0.25, 0.5, 0.75});

struct StationSummary {
  double position = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double p85 = 0.0;
};

/// Five-number summary and 85th percentile at stations every `step` from the
/// grid start, curves linearly interpolated.
std::vector<StationSummary> pointwise_boxplots(const FunctionalSample& sample, double step);

}  // namespace speedprof::depth
