#pragma once

// Trace and curve CSV files, atomic output, and numeric formatting that
// round-trips exactly.

#include "speedprof/kernel_spline.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace speedprof::io {

/// One vehicle pass read from a trace file.
struct Trace {
  std::string pass_id;  // empty for single-pass files without the column
  kernel_spline::ObservationSet data;
};

/// Parses `t,x,v[,pass_id]` CSV (columns in any order, header required).
/// Empty x or v fields mark a missing channel; a pass with missing values is
/// built through kernel_spline::resample. Passes keep their first-appearance
/// order. Throws ParseError (with line) for malformed rows, DataError naming
/// the pass when t decreases or a channel repeats a time.
std::vector<Trace> parse_traces(std::istream& in);
std::vector<Trace> ingest(const std::filesystem::path& path);

/// Inverse of parse_traces for fully observed sets: shortest round-trip
/// decimals, pass_id column when any pass has a non-empty id.
void write_traces(std::ostream& out, const std::vector<Trace>& traces);
std::string emit_traces(const std::vector<Trace>& traces);

/// A curve sampled on a grid, `x,v` columns.
struct GridCurve {
  std::vector<double> x;
  std::vector<double> v;
};

GridCurve parse_curve(std::istream& in);
GridCurve read_curve(const std::filesystem::path& path);
std::string emit_curve(const GridCurve& curve);

/// Generic CSV with a header row and numeric columns.
std::string emit_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);
/// Strict double parse of the whole field (surrounding blanks allowed).
bool parse_double(std::string_view field, double& value);

/// Writes to a sibling temporary file and renames it over `path`, creating
/// parent directories. Throws Error on I/O failure.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace speedprof::io
