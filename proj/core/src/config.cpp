#include "speedprof/config.hpp"

#include "speedprof/errors.hpp"
#include "speedprof/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace speedprof::config {

namespace {

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!io::parse_double(text, v)) throw DomainError(key + ": not a number: '" + text + "'");
  return v;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text) {
  Int v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw DomainError(key + ": not a non-negative integer: '" + text + "'");
  }
  return v;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& key, const char* range) {
  if (!ok) throw DomainError(key + " must be " + range);
}

}  // namespace

const std::vector<std::string>& keys() {
  static const std::vector<std::string> k{
      "m",          "lambda_min",    "lambda_max",          "criterion", "lambda_mono", "trim",
      "stop_threshold", "landmark_count", "stop_window", "boxplot_proportions", "grid_step", "output_dir",
      "seed",       "function",      "runs",                "sample_size", "sigma_x",   "sigma_v"};
  return k;
}

void PipelineConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = strip(raw);
  if (key == "m") {
    m = to_integer<int>(key, value);
  } else if (key == "lambda_min") {
    lambda_min = to_double(key, value);
  } else if (key == "lambda_max") {
    lambda_max = to_double(key, value);
  } else if (key == "criterion") {
    try {
      criterion = kernel_spline::criterion_from_string(value);
    } catch (const Error&) {
      throw DomainError("criterion must be GCV or GML");
    }
  } else if (key == "lambda_mono") {
    lambda_mono = to_double(key, value);
  } else if (key == "trim") {
    trim = to_double(key, value);
  } else if (key == "stop_threshold") {
    stop_threshold = to_double(key, value);
  } else if (key == "landmark_count") {
    landmark_count = to_integer<std::size_t>(key, value);
  } else if (key == "stop_window") {
    stop_window = to_double(key, value);
  } else if (key == "boxplot_proportions") {
    std::vector<double> props;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) props.push_back(to_double(key, strip(item)));
    boxplot_proportions = std::move(props);
  } else if (key == "grid_step") {
    grid_step = to_double(key, value);
  } else if (key == "output_dir") {
    output_dir = value;
  } else if (key == "seed") {
    seed = to_integer<std::uint64_t>(key, value);
  } else if (key == "function") {
    if (value != "all") (void)simulation::test_function_from_string(value);
    function = value;
  } else if (key == "runs") {
    runs = to_integer<int>(key, value);
  } else if (key == "sample_size") {
    sample_size = to_integer<int>(key, value);
  } else if (key == "sigma_x") {
    sigma_x = to_double(key, value);
  } else if (key == "sigma_v") {
    sigma_v = to_double(key, value);
  } else {
    throw DomainError("unknown key '" + key + "'");
  }
  check(key);
}

void PipelineConfig::check(const std::string& key) const {
  if (key == "m") require(m >= 2 && m <= 6, key, "in [2, 6]");
  if (key == "lambda_min") require(lambda_min > 0.0, key, "positive");
  if (key == "lambda_max") require(lambda_max > 0.0, key, "positive");
  if (key == "lambda_mono") require(lambda_mono >= 0.0, key, "non-negative (0 selects the default)");
  if (key == "trim") require(trim >= 0.0 && trim < 0.5, key, "in [0, 0.5)");
  if (key == "stop_threshold") require(stop_threshold > 0.0, key, "positive");
  if (key == "stop_window") require(stop_window > 0.0, key, "positive");
  if (key == "boxplot_proportions") {
    bool has_half = false;
    for (double p : boxplot_proportions) {
      require(p > 0.0 && p <= 1.0, key, "in (0, 1]");
      has_half = has_half || p == 0.5;
    }
    require(has_half, key, "a list containing 0.5");
  }
  if (key == "grid_step") require(grid_step > 0.0, key, "positive");
  if (key == "output_dir") require(!output_dir.empty(), key, "non-empty");
  if (key == "runs") require(runs >= 1, key, "at least 1");
  if (key == "sample_size") require(sample_size == 0 || sample_size >= 5, key, "0 or at least 5");
  if (key == "sigma_x") require(sigma_x >= 0.0, key, "non-negative");
  if (key == "sigma_v") require(sigma_v >= 0.0, key, "non-negative");
}

void PipelineConfig::validate() const {
  for (const auto& key : keys()) check(key);
  require(lambda_max > lambda_min, "lambda_max", "greater than lambda_min");
}

std::string PipelineConfig::to_text() const {
  std::ostringstream os;
  std::string props;
  for (double p : boxplot_proportions) props += (props.empty() ? "" : ",") + io::format_double(p);
  os << "m = " << m << '\n'
     << "lambda_min = " << io::format_double(lambda_min) << '\n'
     << "lambda_max = " << io::format_double(lambda_max) << '\n'
     << "criterion = " << kernel_spline::to_string(criterion) << '\n'
     << "lambda_mono = " << io::format_double(lambda_mono) << '\n'
     << "trim = " << io::format_double(trim) << '\n'
     << "stop_threshold = " << io::format_double(stop_threshold) << '\n'
     << "landmark_count = " << landmark_count << '\n'
     << "stop_window = " << io::format_double(stop_window) << '\n'
     << "boxplot_proportions = " << props << '\n'
     << "grid_step = " << io::format_double(grid_step) << '\n'
     << "output_dir = " << output_dir << '\n'
     << "seed = " << seed << '\n'
     << "function = " << function << '\n'
     << "runs = " << runs << '\n'
     << "sample_size = " << sample_size << '\n'
     << "sigma_x = " << io::format_double(sigma_x) << '\n'
     << "sigma_v = " << io::format_double(sigma_v) << '\n';
  return os.str();
}

profile::EstimatorConfig PipelineConfig::estimator() const {
  profile::EstimatorConfig e;
  e.m = m;
  e.criterion = criterion;
  e.search.lambda_min = lambda_min;
  e.search.lambda_max = lambda_max;
  if (lambda_mono > 0.0) e.monotone.lambda = lambda_mono;
  e.trim = trim;
  e.stop_threshold = stop_threshold;
  return e;
}

simulation::SimulationConfig PipelineConfig::simulation(simulation::TestFunction f) const {
  simulation::SimulationConfig s;
  s.function = f;
  s.n = sample_size;
  s.sigma_x = sigma_x;
  s.sigma_v = sigma_v;
  s.runs = runs;
  s.seed = seed;
  s.lambda_mono = lambda_mono;
  s.estimator = estimator();
  return s;
}

PipelineConfig parse(std::istream& in) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = strip(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = strip(body.substr(0, eq));
    if (!seen.insert(key).second) throw ParseError("repeated key '" + key + "'", line_no);
    try {
      cfg.set(key, body.substr(eq + 1));
    } catch (const DomainError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  return cfg;
}

PipelineConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse(in);
}

}  // namespace speedprof::config
