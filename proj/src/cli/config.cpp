#include "mzq/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "mzq/error.hpp"

namespace mzq::cli {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorCode::Parse, "config " + where + ": " + what);
}

}  // namespace

ConfigObject::ConfigObject(const nlohmann::json& j, std::string where)
    : j_(j), where_(std::move(where)) {
  if (!j_.is_object()) bad(where_, "expected an object");
}

bool ConfigObject::has(const std::string& key) const {
  used_.insert(key);
  return j_.contains(key) && !j_.at(key).is_null();
}

const nlohmann::json& ConfigObject::at(const std::string& key) {
  used_.insert(key);
  if (!j_.contains(key)) bad(where_, "missing key '" + key + "'");
  return j_.at(key);
}

const nlohmann::json& ConfigObject::raw(const std::string& key) { return at(key); }

double ConfigObject::number(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_number()) bad(where_, "'" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(where_, "'" + key + "' must be finite");
  return d;
}

double ConfigObject::number(const std::string& key, double fallback) {
  used_.insert(key);
  return has(key) ? number(key) : fallback;
}

long long ConfigObject::integer(const std::string& key, long long fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_number_integer()) bad(where_, "'" + key + "' must be an integer");
  return v.get<long long>();
}

std::string ConfigObject::text(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_string()) bad(where_, "'" + key + "' must be a string");
  return v.get<std::string>();
}

std::string ConfigObject::text(const std::string& key, const std::string& fallback) {
  used_.insert(key);
  return has(key) ? text(key) : fallback;
}

std::vector<double> ConfigObject::numbers(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_array()) bad(where_, "'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) bad(where_, "'" + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> ConfigObject::texts(const std::string& key) {
  const auto& v = at(key);
  if (!v.is_array()) bad(where_, "'" + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) bad(where_, "'" + key + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

ConfigObject ConfigObject::child(const std::string& key) { return ConfigObject(at(key), where_ + "." + key); }

void ConfigObject::finish() const {
  for (const auto& [key, value] : j_.items()) {
    if (!used_.count(key)) bad(where_, "unknown key '" + key + "'");
  }
}

nlohmann::json load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open config " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, file.string() + ": " + e.what());
  }
}

CircuitSpec parse_circuit(ConfigObject c) {
  CircuitSpec spec;
  const std::string kind = c.text("splitter", "ideal");
  const double center = kTwoPi * c.number("center_hz");
  if (kind == "ideal") {
    spec.splitter = BeamSplitterModel::ideal();
  } else if (kind == "branch_line") {
    spec.splitter = BeamSplitterModel::branch_line(center);
  } else {
    bad(c.where(), "splitter must be 'ideal' or 'branch_line'");
  }
  if (c.has("phase_rate_s")) {
    const auto pr = c.numbers("phase_rate_s");
    if (pr.size() != 4) bad(c.where(), "'phase_rate_s' needs 4 entries");
    std::copy(pr.begin(), pr.end(), spec.lines.phase_rate.begin());
  } else {
    const auto order = c.integer("arm_order", 2);
    spec.lines = LineParams::imbalanced_arms(center, static_cast<int>(order), c.number("base_delay_s", 0.0));
  }
  if (c.has("attenuation")) {
    const auto at = c.numbers("attenuation");
    if (at.size() != 4) bad(c.where(), "'attenuation' needs 4 entries");
    std::copy(at.begin(), at.end(), spec.lines.attenuation.begin());
  }
  const std::string arm = c.text("qubit_arm", "a");
  if (arm == "a") {
    spec.qubit_arm = QubitArm::A;
  } else if (arm == "b") {
    spec.qubit_arm = QubitArm::B;
  } else {
    bad(c.where(), "qubit_arm must be 'a' or 'b'");
  }
  const std::string form = c.text("qubit_form", "reciprocal");
  if (form == "reciprocal") {
    spec.qubit_form = QubitMatrixForm::Reciprocal;
  } else if (form == "literal") {
    spec.qubit_form = QubitMatrixForm::Literal;
  } else {
    bad(c.where(), "qubit_form must be 'reciprocal' or 'literal'");
  }
  if (c.has("calibration")) {
    ConfigObject k = c.child("calibration");
    Calibration cal;
    const auto s = k.has("scale") ? k.numbers("scale") : std::vector<double>{1.0, 0.0};
    if (s.size() != 2) bad(k.where(), "'scale' must be [re, im]");
    cal.scale = Complex(s[0], s[1]);
    cal.delay = k.number("delay_s", 0.0);
    cal.reference_omega = kTwoPi * k.number("reference_hz", 0.0);
    k.finish();
    spec.calibration = cal;
  }
  c.finish();
  spec.validate();
  return spec;
}

QubitScatterer parse_qubit(ConfigObject q) {
  QubitScatterer s;
  s.omega01 = kTwoPi * q.number("omega01_hz");
  s.gamma1 = kTwoPi * q.number("gamma1_hz");
  s.gamma_phi = kTwoPi * q.number("gamma_phi_hz", 0.0);
  s.r0 = q.number("r0", 1.0);
  s.rabi = kTwoPi * q.number("rabi_hz", 0.0);
  q.finish();
  s.validate();
  return s;
}

physics::TransmonParams parse_transmon(ConfigObject t) {
  physics::TransmonParams p{t.number("ej_max_hz"), t.number("ec_hz")};
  t.finish();
  p.validate();
  return p;
}

physics::BathModel parse_bath(ConfigObject b) {
  physics::BathModel m;
  m.alpha = b.number("alpha");
  m.lorentz_center = kTwoPi * b.number("lorentz_center_hz", 0.0);
  m.lorentz_fwhm = kTwoPi * b.number("lorentz_fwhm_hz", 1.0);
  m.lorentz_weight = kTwoPi * b.number("lorentz_weight_hz", 0.0);
  b.finish();
  m.validate();
  return m;
}

DrivePort parse_drive(const std::string& s) {
  if (s == "port2") return DrivePort::Port2;
  if (s == "port4") return DrivePort::Port4;
  if (s == "both") return DrivePort::Both;
  fail(ErrorCode::Parse, "config: drive must be 'port2', 'port4' or 'both'");
}

std::vector<double> parse_grid(ConfigObject g) {
  const double start = g.number("start_hz");
  const double stop = g.number("stop_hz");
  const auto points = g.integer("points", 401);
  g.finish();
  if (!(stop > start) || !(start > 0.0)) bad(g.where(), "need 0 < start_hz < stop_hz");
  if (points < 2) bad(g.where(), "'points' must be >= 2");
  return linspace(start, stop, static_cast<std::size_t>(points));
}

QualityThresholds parse_thresholds(ConfigObject t) {
  QualityThresholds q;
  q.omega01 = t.number("omega01", q.omega01);
  q.rates = t.number("rates", q.rates);
  t.finish();
  if (!(q.omega01 > 0.0) || !(q.rates > 0.0)) bad(t.where(), "thresholds must be > 0");
  return q;
}

}  // namespace mzq::cli
