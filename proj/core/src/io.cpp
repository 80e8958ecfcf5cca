#include "speedprof/io.hpp"

#include "speedprof/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <system_error>

namespace speedprof::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank(std::string_view line) { return trim(line).empty(); }

// Raw channels of one pass before they become an ObservationSet.
struct PassRows {
  std::string id;
  std::vector<double> t_x, x, t_v, v;
  double last_t = -INFINITY;
  bool missing = false;
};

std::string pass_name(const std::string& id) { return id.empty() ? "pass" : "pass '" + id + "'"; }

void append_strict(std::vector<double>& times, double t, const std::string& pass, const char* channel) {
  if (!times.empty() && !(t > times.back())) {
    throw DataError(pass + ": repeated time " + format_double(t) + " in the " + channel + " channel");
  }
  times.push_back(t);
}

}  // namespace

std::string format_double(double value) {
  if (value == 0.0) return "0";  // also folds -0
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

bool parse_double(std::string_view field, double& value) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  return res.ec == std::errc() && res.ptr == field.data() + field.size() && std::isfinite(value);
}

std::vector<Trace> parse_traces(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (blank(line)) throw ParseError("missing header t,x,v", line_no);

  std::vector<std::string> header;
  for (auto h : split(line)) header.emplace_back(h);
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != "t" && header[i] != "x" && header[i] != "v" && header[i] != "pass_id") {
      throw ParseError("unknown column '" + header[i] + "'", line_no);
    }
    if (!col.emplace(header[i], i).second) throw ParseError("duplicate column '" + header[i] + "'", line_no);
  }
  if (!col.contains("t") || !col.contains("x") || !col.contains("v")) {
    throw ParseError("header must contain t, x and v", line_no);
  }
  const std::optional<std::size_t> id_col =
      col.contains("pass_id") ? std::optional<std::size_t>(col["pass_id"]) : std::nullopt;
  const std::size_t t_col = col["t"], x_col = col["x"], v_col = col["v"];

  std::vector<PassRows> passes;
  std::map<std::string, std::size_t, std::less<>> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    const std::string id = id_col ? std::string(fields[*id_col]) : std::string();
    auto [it, fresh] = index.emplace(id, passes.size());
    if (fresh) {
      passes.emplace_back();
      passes.back().id = id;
    }
    PassRows& p = passes[it->second];

    double t = 0.0;
    if (!parse_double(fields[t_col], t)) throw ParseError("malformed t '" + std::string(fields[t_col]) + "'", line_no);
    if (t < p.last_t) {
      throw DataError(pass_name(id) + ": time decreases at line " + std::to_string(line_no));
    }
    p.last_t = t;

    const auto channel = [&](const char* name, std::size_t c, std::vector<double>& times, std::vector<double>& values) {
      const auto field = fields[c];
      if (field.empty() || field == "NA" || field == "nan") {
        p.missing = true;
        return;
      }
      double value = 0.0;
      if (!parse_double(field, value)) {
        throw ParseError("malformed " + std::string(name) + " '" + std::string(field) + "'", line_no);
      }
      append_strict(times, t, pass_name(id), name);
      values.push_back(value);
    };
    channel("x", x_col, p.t_x, p.x);
    channel("v", v_col, p.t_v, p.v);
  }

  std::vector<Trace> out;
  out.reserve(passes.size());
  for (auto& p : passes) {
    Trace tr{p.id, {}};
    try {
      tr.data = p.missing ? kernel_spline::resample(p.t_x, p.x, p.t_v, p.v)
                          : kernel_spline::ObservationSet(p.t_x, p.x, p.v);
    } catch (const DataError& e) {
      throw DataError(pass_name(p.id) + ": " + e.what());
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<Trace> ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_traces(in);
}

void write_traces(std::ostream& out, const std::vector<Trace>& traces) {
  bool ids = false;
  for (const auto& tr : traces) ids = ids || !tr.pass_id.empty();
  out << (ids ? "t,x,v,pass_id\n" : "t,x,v\n");
  for (const auto& tr : traces) {
    const auto& d = tr.data;
    for (std::size_t i = 0; i < d.size(); ++i) {
      out << format_double(d.times()[i]) << ',' << format_double(d.positions()[i]) << ','
          << format_double(d.speeds()[i]);
      if (ids) out << ',' << tr.pass_id;
      out << '\n';
    }
  }
}

std::string emit_traces(const std::vector<Trace>& traces) {
  std::ostringstream os;
  write_traces(os, traces);
  return os.str();
}

GridCurve parse_curve(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty curve file", 0);
  ++line_no;
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "x" || header[1] != "v") throw ParseError("curve header must start with x,v", 1);
  GridCurve c;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split(line);
    double x = 0.0, v = 0.0;
    if (fields.size() != header.size() || !parse_double(fields[0], x) || !parse_double(fields[1], v)) {
      throw ParseError("malformed curve row", line_no);
    }
    if (!c.x.empty() && !(x > c.x.back())) throw ParseError("curve positions must increase", line_no);
    c.x.push_back(x);
    c.v.push_back(v);
  }
  if (c.x.size() < 2) throw ParseError("curve needs at least two rows", line_no);
  return c;
}

GridCurve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_curve(in);
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + ": " + e.detail(), e.line());
  }
}

std::string emit_curve(const GridCurve& curve) { return emit_table({"x", "v"}, {curve.x, curve.v}); }

std::string emit_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw DomainError("header and columns differ in count");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw DomainError("columns differ in length");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out += (j ? "," : "") + format_double(columns[j][i]);
    out += '\n';
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename onto " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace speedprof::io
