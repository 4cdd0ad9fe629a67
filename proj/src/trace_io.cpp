#include "mzq/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "mzq/error.hpp"

namespace mzq {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of("\n\r") != std::string::npos) {
    fail(ErrorCode::InvalidArgument, "trace label must not contain line breaks");
  }
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) parse_error(line_no, "unterminated quoted field");
  fields.push_back(cur);
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

void write_trace_csv(const SpectrumTrace& trace, std::ostream& out) {
  trace.validate();
  const std::string label = csv_field(trace.label);
  out << kTraceCsvHeader << '\n';
  for (const auto& [path, v] : trace.values) {
    const std::string_view name = to_string(path);
    for (std::size_t i = 0; i < trace.freqs.size(); ++i) {
      out << format_double(trace.freqs[i]) << ',' << format_double(v[i].real()) << ','
          << format_double(v[i].imag()) << ',' << name << ',' << label << '\n';
    }
  }
}

SpectrumTrace read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!header_seen && std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    if (line != kTraceCsvHeader) {
      parse_error(line_no, "expected header '" + std::string(kTraceCsvHeader) + "'");
    }
    header_seen = true;
  }
  if (!header_seen) fail(ErrorCode::Parse, "trace CSV is empty");

  SpectrumTrace trace;
  std::map<Path, std::vector<double>> grids;
  bool have_label = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line, line_no);
    if (f.size() != 5) {
      parse_error(line_no, "expected 5 fields, found " + std::to_string(f.size()));
    }
    double freq = 0.0, re = 0.0, im = 0.0;
    if (!parse_double(f[0], freq)) parse_error(line_no, "bad freq_hz '" + f[0] + "'");
    if (!parse_double(f[1], re)) parse_error(line_no, "bad re '" + f[1] + "'");
    if (!parse_double(f[2], im)) parse_error(line_no, "bad im '" + f[2] + "'");
    const auto path = parse_path(f[3]);
    if (!path) parse_error(line_no, "unknown path '" + f[3] + "'");
    if (!have_label) {
      trace.label = f[4];
      have_label = true;
    } else if (f[4] != trace.label) {
      parse_error(line_no, "label differs from earlier rows");
    }
    auto& grid = grids[*path];
    if (!grid.empty() && !(freq > grid.back())) {
      parse_error(line_no, "frequencies of path " + f[3] + " are not strictly increasing");
    }
    grid.push_back(freq);
    trace.values[*path].emplace_back(re, im);
  }
  if (grids.empty()) fail(ErrorCode::Parse, "trace CSV has no data rows");
  trace.freqs = grids.begin()->second;
  for (const auto& [path, grid] : grids) {
    if (grid != trace.freqs) {
      fail(ErrorCode::Parse, "path " + std::string(to_string(path)) +
                                 " does not share the frequency grid of the other paths");
    }
  }
  return trace;
}

nlohmann::ordered_json trace_to_json(const SpectrumTrace& trace) {
  trace.validate();
  nlohmann::ordered_json j;
  j["label"] = trace.label;
  j["noise_sigma"] = trace.noise_sigma;
  if (std::isfinite(trace.flux)) j["flux"] = trace.flux;
  j["freq_hz"] = trace.freqs;
  nlohmann::ordered_json paths = nlohmann::ordered_json::object();
  for (const auto& [path, v] : trace.values) {
    std::vector<double> re(v.size()), im(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      re[i] = v[i].real();
      im[i] = v[i].imag();
    }
    paths[std::string(to_string(path))] = {{"re", re}, {"im", im}};
  }
  j["paths"] = paths;
  return j;
}

SpectrumTrace trace_from_json(const nlohmann::json& j) {
  try {
    SpectrumTrace trace;
    trace.label = j.value("label", std::string());
    trace.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("flux")) trace.flux = j.at("flux").get<double>();
    trace.freqs = j.at("freq_hz").get<std::vector<double>>();
    for (const auto& [name, pj] : j.at("paths").items()) {
      const auto path = parse_path(name);
      if (!path) fail(ErrorCode::Parse, "unknown path '" + name + "'");
      const auto re = pj.at("re").get<std::vector<double>>();
      const auto im = pj.at("im").get<std::vector<double>>();
      if (re.size() != im.size()) fail(ErrorCode::Parse, "path '" + name + "' re/im length mismatch");
      auto& v = trace.values[*path];
      v.reserve(re.size());
      for (std::size_t i = 0; i < re.size(); ++i) v.emplace_back(re[i], im[i]);
    }
    trace.validate();
    return trace;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("trace JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    fail(ErrorCode::Parse, std::string("trace JSON: ") + e.what());
  }
}

void save_trace(const SpectrumTrace& trace, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + file.string() + " for writing");
  if (file.extension() == ".json") {
    out << trace_to_json(trace).dump(1) << '\n';
  } else {
    write_trace_csv(trace, out);
  }
  if (!out) fail(ErrorCode::Io, "failed writing " + file.string());
}

SpectrumTrace load_trace(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + file.string());
  if (file.extension() == ".json") {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Parse, file.string() + ": " + e.what());
    }
    return trace_from_json(j);
  }
  try {
    return read_trace_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.what());
  }
}

}  // namespace mzq
