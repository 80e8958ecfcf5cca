#pragma once

// Flat key=value pipeline configuration.
//
//   # comment
//   m = 3
//   criterion = GML
//   boxplot_proportions = 0.25,0.5,0.75
//
// Every key is optional; unknown keys, repeated keys and out-of-range values
// are errors.

#include "speedprof/profile.hpp"
#include "speedprof/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace speedprof::config {

struct PipelineConfig {
  int m = 3;
  double lambda_min = 1e-8;
  double lambda_max = 1e4;
  kernel_spline::Criterion criterion = kernel_spline::Criterion::GML;
  double lambda_mono = 0.0;  // 0: 1e-4 for traces, per-function default in simulate
  double trim = profile::kDefaultTrim;
  double stop_threshold = profile::kDefaultStopThreshold;
  std::size_t landmark_count = 0;  // 0: most common stop count
  double stop_window = 100.0;      // m
  std::vector<double> boxplot_proportions{0.25, 0.5, 0.75};
  double grid_step = 1.0;  // m
  std::string output_dir = "out";
  std::uint64_t seed = 42;

  // simulate
  std::string function = "all";  // F1, F2, F3 or all
  int runs = 100;
  int sample_size = 0;  // 0: per-function default
  double sigma_x = 0.2;
  double sigma_v = 0.01;

  /// Assigns one key from its textual value and checks its range.
  /// Throws DomainError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Range of one key.
  void check(const std::string& key) const;
  /// All ranges plus lambda_min < lambda_max.
  void validate() const;

  /// Canonical key=value text; parse(to_text()) == *this.
  std::string to_text() const;

  profile::EstimatorConfig estimator() const;
  simulation::SimulationConfig simulation(simulation::TestFunction f) const;

  bool operator==(const PipelineConfig&) const = default;
};

/// Every recognised key, in to_text order.
const std::vector<std::string>& keys();

/// Throws ParseError with the line number for malformed lines, unknown or
/// repeated keys and bad values.
PipelineConfig parse(std::istream& in);
PipelineConfig load(const std::filesystem::path& path);

}  // namespace speedprof::config
