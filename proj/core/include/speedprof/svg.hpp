#pragma once

// Static line plots: curves, shaded bands and vertical markers on linear axes.

#include <string>
#include <vector>

namespace speedprof::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;  // empty: left out of the legend
  std::string color = "#1f77b4";
  double width = 1.5;
  double opacity = 1.0;
  bool dashed = false;
};

struct Ribbon {
  std::vector<double> x;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string label;
  std::string color = "#9ecae1";
  double opacity = 0.5;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Ribbon> ribbons;  // drawn first
  std::vector<Series> series;
  std::vector<double> markers;  // vertical dotted lines at these x
  int width = 900;
  int height = 500;
};

/// Deterministic SVG text. Non-finite points split a series into pieces.
/// Throws DomainError when nothing finite is plotted.
std::string render(const Plot& plot);

/// Tick positions at 1, 2 or 5 times a power of ten covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

}  // namespace speedprof::svg
