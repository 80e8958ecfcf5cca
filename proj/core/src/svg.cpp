#include "speedprof/svg.hpp"

#include "speedprof/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace speedprof::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v, double step) {
  const int digits = std::max(0, static_cast<int>(std::ceil(-std::log10(step) - 1e-9)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, std::abs(v) < 1e-12 * step ? 0.0 : v);
  return buf;
}

struct Extent {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(lo <= hi); }
};

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(target, 1);
  const int exponent = static_cast<int>(std::floor(std::log10(raw)));
  const double mag = std::pow(10.0, std::abs(exponent));
  // Tick k sits at k * factor * 10^exponent; dividing by the exact power of
  // ten keeps 3 * 0.2 at 0.6.
  const auto at = [&](double units) { return exponent < 0 ? units / mag : units * mag; };
  double factor = 1.0;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    factor = f;
    if (at(f) >= raw) break;
  }
  const double step = at(factor);
  std::vector<double> ticks;
  for (double k = std::ceil(lo / step - 1e-9); k * step <= hi + 1e-9 * step; k += 1.0) {
    ticks.push_back(at(k * factor) + 0.0);
  }
  return ticks;
}

std::string render(const Plot& plot) {
  Extent ex, ey;
  for (const auto& r : plot.ribbons) {
    for (double v : r.x) ex.add(v);
    for (double v : r.lower) ey.add(v);
    for (double v : r.upper) ey.add(v);
  }
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        ex.add(s.x[i]);
        ey.add(s.y[i]);
      }
    }
  }
  if (ex.empty() || ey.empty()) throw DomainError("plot has no finite data");
  if (ex.hi == ex.lo) ex.hi = ex.lo + 1.0;
  if (ey.hi == ey.lo) ey.hi = ey.lo + 1.0;
  const double pad = 0.05 * (ey.hi - ey.lo);
  ey.lo -= pad;
  ey.hi += pad;

  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = plot.width - left - right, ph = plot.height - top - bottom;
  const auto px = [&](double x) { return left + (x - ex.lo) / (ex.hi - ex.lo) * pw; };
  const auto py = [&](double y) { return top + (ey.hi - y) / (ey.hi - ey.lo) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(plot.width) + "\" height=\"" +
         std::to_string(plot.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(plot.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(plot.title) + "</text>\n";

  const auto xt = nice_ticks(ex.lo, ex.hi), yt = nice_ticks(ey.lo, ey.hi);
  const double xstep = xt.size() > 1 ? xt[1] - xt[0] : 1.0, ystep = yt.size() > 1 ? yt[1] - yt[0] : 1.0;
  for (double t : xt) {
    out += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
           num(top + ph) + "\" stroke=\"#eee\"/>\n";
    out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" +
           tick_label(t, xstep) + "</text>\n";
  }
  for (double t : yt) {
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
           num(py(t)) + "\" stroke=\"#eee\"/>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
           tick_label(t, ystep) + "</text>\n";
  }
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(plot.height - 12.0) + "\" text-anchor=\"middle\">" +
         escape(plot.x_label) + "</text>\n";
  out += "<text transform=\"translate(16," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(plot.y_label) + "</text>\n";

  for (const auto& r : plot.ribbons) {
    std::string pts;
    for (std::size_t i = 0; i < r.x.size(); ++i) pts += num(px(r.x[i])) + "," + num(py(r.upper[i])) + " ";
    for (std::size_t i = r.x.size(); i-- > 0;) pts += num(px(r.x[i])) + "," + num(py(r.lower[i])) + " ";
    if (!pts.empty()) pts.pop_back();
    out += "<polygon points=\"" + pts + "\" fill=\"" + r.color + "\" fill-opacity=\"" + num(r.opacity) +
           "\" stroke=\"none\"/>\n";
  }
  for (double m : plot.markers) {
    if (!std::isfinite(m)) continue;
    out += "<line x1=\"" + num(px(m)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(px(m)) + "\" y2=\"" +
           num(top + ph) + "\" stroke=\"#888\" stroke-dasharray=\"2,3\"/>\n";
  }
  for (const auto& s : plot.series) {
    std::string pts;
    const auto flush = [&] {
      if (pts.empty()) return;
      pts.pop_back();
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" +
             num(s.width) + "\" stroke-opacity=\"" + num(s.opacity) + "\"" +
             (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      } else {
        flush();
      }
    }
    flush();
  }

  double ly = top + 14;
  const auto legend = [&](const std::string& label, const std::string& color) {
    out += "<rect x=\"" + num(left + pw - 150) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"10\" fill=\"" +
           color + "\"/>\n";
    out += "<text x=\"" + num(left + pw - 132) + "\" y=\"" + num(ly) + "\">" + escape(label) + "</text>\n";
    ly += 16;
  };
  for (const auto& r : plot.ribbons) {
    if (!r.label.empty()) legend(r.label, r.color);
  }
  for (const auto& s : plot.series) {
    if (!s.label.empty()) legend(s.label, s.color);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace speedprof::svg
