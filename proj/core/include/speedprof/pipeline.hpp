#pragma once

// The command-line stages as library calls. Each writes its outputs
// atomically under `out_dir` and returns the paths written, in order.
// Failures surface as StageError tagged with the stage that raised them.

#include "speedprof/config.hpp"
#include "speedprof/io.hpp"

#include <filesystem>
#include <vector>

namespace speedprof::pipeline {

namespace fs = std::filesystem;
using Written = std::vector<fs::path>;

/// Per pass: `<name>.smooth.csv` (t,x,v of the monotone fit at the sample
/// times, ingestible as a trace) and `<name>.fit.json`.
Written smooth(const config::PipelineConfig& cfg, const fs::path& trace, const fs::path& out_dir);

/// Per pass: `<name>.profile.csv` (x,v on multiples of grid_step inside the
/// trimmed domain), `<name>.profile.json` (fit summary and stop set) and
/// `<name>.profile.svg`.
Written profile(const config::PipelineConfig& cfg, const fs::path& trace, const fs::path& out_dir);

/// Registers every `*.csv` curve in `in_dir` (sorted by name) on the common
/// grid: `registered/<name>.csv`, `mean.csv`, `registration.json`,
/// `registration.svg`.
Written register_curves(const config::PipelineConfig& cfg, const fs::path& in_dir, const fs::path& out_dir);

/// Depths and functional boxplot of every `*.csv` curve in `in_dir`:
/// `boxplot.json`, `boxplot_bands.csv`, `stations.csv`, `boxplot.svg`.
Written boxplot(const config::PipelineConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                double station_step = 50.0);

/// MISE study for cfg.function (or all three): `mise_<F>.json` and
/// `mise.csv`. With `pilot_runs` > 0, a lambda_mono pilot over
/// `pilot_candidates` is written to `pilot_<F>.json` instead.
Written simulate(const config::PipelineConfig& cfg, const fs::path& out_dir, int pilot_runs = 0,
                 const std::vector<double>& pilot_candidates = {});

/// Synthetic multi-stop passes: `passes.csv` (pass_id column) and
/// `truth.json` with each pass's stop positions.
Written generate(const config::PipelineConfig& cfg, int passes, const fs::path& out_dir);

/// Curves from `*.csv` files of a directory, sorted by file name.
struct NamedCurves {
  std::vector<std::string> names;
  std::vector<io::GridCurve> curves;
};
NamedCurves read_curve_directory(const fs::path& dir);

/// Multiples of `step` inside the range every curve covers, with the ends
/// clamped to that range.
/// Throws DataError when the overlap holds fewer than two nodes.
std::vector<double> common_grid(const std::vector<io::GridCurve>& curves, double step);

}  // namespace speedprof::pipeline
