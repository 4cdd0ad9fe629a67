#include "mzq/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "mzq/cli/config.hpp"
#include "mzq/error.hpp"
#include "mzq/rates.hpp"
#include "mzq/trace_io.hpp"

namespace mzq::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateScatterer:
    case ErrorCode::SingularSystem:
    case ErrorCode::DegenerateFlux:
    case ErrorCode::QuasiStaticLimit:
      return 3;
    case ErrorCode::NoConvergence:
    case ErrorCode::BadInitialization:
    case ErrorCode::NoFeature:
      return 4;
    default:
      return 2;
  }
}

// Runs fn(i) for i in [0, n) on a small pool. Errors are kept per index.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = worker_count(n);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

fs::path resolve(const RunOptions& opt, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  return opt.config.parent_path() / path;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + file.string() + " for writing");
  return out;
}

void write_json(const fs::path& file, const nlohmann::ordered_json& j) {
  auto out = open_out(file);
  out << j.dump(2) << '\n';
}

std::string safe_label(const std::string& label, const std::string& fallback) {
  std::string s = label.empty() ? fallback : label;
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

std::uint64_t seed_of(const RunOptions& opt, ConfigObject& c) {
  const long long s = c.integer("seed", 1);
  if (opt.seed) return *opt.seed;
  if (s < 0) fail(ErrorCode::Parse, "config: seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void save_trace_pair(const SpectrumTrace& t, const fs::path& dir, const std::string& stem) {
  save_trace(t, dir / (stem + ".csv"));
  save_trace(t, dir / (stem + ".json"));
}

// Traces listed in the config, merged onto one grid.
SpectrumTrace load_merged(const std::vector<fs::path>& files) {
  SpectrumTrace merged = load_trace(files.front());
  for (std::size_t i = 1; i < files.size(); ++i) {
    const SpectrumTrace t = load_trace(files[i]);
    if (t.freqs != merged.freqs) {
      fail(ErrorCode::Parse, files[i].string() + ": frequency grid differs from " + files.front().string());
    }
    for (const auto& [p, v] : t.values) {
      if (merged.has(p)) fail(ErrorCode::Parse, files[i].string() + ": path " + std::string(to_string(p)) + " given twice");
      merged.values[p] = v;
    }
    if (std::isnan(merged.flux)) merged.flux = t.flux;
  }
  return merged;
}

std::vector<fs::path> trace_inputs(const RunOptions& opt, ConfigObject& c) {
  std::vector<fs::path> files;
  if (c.has("trace")) files.push_back(resolve(opt, c.text("trace")));
  if (c.has("traces")) {
    for (const auto& s : c.texts("traces")) files.push_back(resolve(opt, s));
  }
  return files;
}

void write_residuals(const fs::path& file, const SpectrumTrace& data, const SpectrumTrace& model) {
  auto out = open_out(file);
  out << "freq_hz,path,data_re,data_im,model_re,model_im,resid_re,resid_im\n";
  for (const auto& [p, m] : model.values) {
    const auto& d = data.at(p);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Complex r = d[i] - m[i];
      out << format_double(data.freqs[i]) << ',' << to_string(p) << ',' << format_double(d[i].real())
          << ',' << format_double(d[i].imag()) << ',' << format_double(m[i].real()) << ','
          << format_double(m[i].imag()) << ',' << format_double(r.real()) << ','
          << format_double(r.imag()) << '\n';
    }
  }
}

nlohmann::ordered_json error_json(const Error& e) {
  nlohmann::ordered_json j;
  j["error"] = std::string(to_string(e.code()));
  j["message"] = e.what();
  return j;
}

struct SpectrumJob {
  CircuitSpec circuit;
  QubitScatterer init;
  SpectrumFitOptions options;
};

FitResult fit_one(const SpectrumTrace& trace, const SpectrumJob& job, const fs::path& dir,
                  const std::string& stem) {
  const FitResult fit = fit_spectrum(trace, job.circuit, job.init, job.options);
  nlohmann::ordered_json j = to_json(fit);
  j["label"] = trace.label;
  if (std::isfinite(trace.flux)) j["flux"] = trace.flux;
  write_json(dir / ("fit_" + stem + ".json"), j);
  write_residuals(dir / ("residuals_" + stem + ".csv"), trace,
                  fitted_model(trace, job.circuit, fit, job.init.rabi));
  return fit;
}

void write_band(const fs::path& file, const std::string& xname, const std::string& yname,
                const std::vector<BandPoint>& band) {
  auto out = open_out(file);
  out << xname << ',' << yname << ",lower95,upper95\n";
  for (const auto& b : band) {
    out << format_double(b.x) << ',' << format_double(b.value) << ',' << format_double(b.lower) << ','
        << format_double(b.upper) << '\n';
  }
}

}  // namespace

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MZQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = std::min(n, static_cast<unsigned>(v));
  }
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

int cmd_simulate(const RunOptions& opt, std::ostream& log) {
  const nlohmann::json cfg = load_config(opt.config);
  ConfigObject c(cfg, "root");
  const CircuitSpec base = parse_circuit(c.child("circuit"));
  CircuitSpec spec = base;
  if (c.has("qubit")) spec.qubit = parse_qubit(c.child("qubit"));
  const std::vector<double> grid = parse_grid(c.child("grid"));
  const DrivePort drive = parse_drive(c.text("drive", "both"));
  const double noise = c.number("noise_sigma", 0.0);
  const std::string label = c.text("label", "trace");
  const std::uint64_t seed = seed_of(opt, c);
  c.finish();
  if (!(noise >= 0.0)) fail(ErrorCode::Parse, "config: noise_sigma must be >= 0");

  SpectrumTrace trace = noise > 0.0 ? synthesize(spec, grid, drive, noise, seed) : sweep(spec, grid, drive);
  trace.label = label;
  ensure_dir(opt.out);
  const std::string stem = safe_label(label, "trace");
  save_trace_pair(trace, opt.out, stem);
  if (!opt.quiet) log << "wrote " << (opt.out / (stem + ".csv")).string() << " and .json\n";
  return 0;
}

int cmd_synth(const RunOptions& opt, std::ostream& log) {
  const nlohmann::json cfg = load_config(opt.config);
  ConfigObject c(cfg, "root");
  const CircuitSpec spec = parse_circuit(c.child("circuit"));
  const physics::TransmonParams transmon = parse_transmon(c.child("transmon"));
  const physics::BathModel bath = parse_bath(c.child("bath"));
  ConfigObject ou_cfg = c.child("ou");
  const double sigma = ou_cfg.number("sigma");
  const double kappa = kTwoPi * ou_cfg.number("kappa_hz", 0.0);
  ou_cfg.finish();
  const double r0 = c.number("r0", 0.5);
  const double rabi = kTwoPi * c.number("rabi_hz", 0.0);
  std::vector<double> flux;
  if (c.has("flux")) {
    flux = c.numbers("flux");
  } else {
    ConfigObject fr = c.child("flux_range");
    const double a = fr.number("start"), b = fr.number("stop");
    const auto n = fr.integer("points", 30);
    fr.finish();
    if (n < 2) fail(ErrorCode::Parse, "config root.flux_range: points must be >= 2");
    flux = linspace(a, b, static_cast<std::size_t>(n));
  }
  const double window = c.number("window_hz", 15e6);
  const auto points = c.integer("points", 401);
  const DrivePort drive = parse_drive(c.text("drive", "both"));
  const double noise = c.number("noise_sigma", 0.0);
  const std::string prefix = c.text("label_prefix", "flux");
  const std::uint64_t seed = seed_of(opt, c);
  c.finish();
  if (flux.empty()) fail(ErrorCode::Parse, "config: no flux points");
  if (!(window > 0.0) || points < 20) fail(ErrorCode::Parse, "config: need window_hz > 0 and points >= 20");

  const fs::path trace_dir = opt.out / "traces";
  ensure_dir(trace_dir);
  RateDataset truth;
  truth.rows.resize(flux.size());
  std::vector<QubitScatterer> qubits(flux.size());
  for (std::size_t i = 0; i < flux.size(); ++i) {
    QubitScatterer q;
    q.omega01 = physics::omega01(transmon, flux[i]);
    q.gamma1 = physics::gamma1_model(bath, q.omega01);
    const physics::OUNoise n{sigma, kappa, physics::domega01_dflux(transmon, flux[i])};
    q.gamma_phi = physics::gamma_phi_model(n);
    q.r0 = r0;
    q.rabi = rabi;
    q.validate();
    qubits[i] = q;
    truth.rows[i] = {q.omega01, q.gamma1, q.gamma_phi, flux[i], 0.0, 0.0};
  }
  const auto errors = parallel_for(flux.size(), [&](std::size_t i) {
    CircuitSpec s = spec;
    s.qubit = qubits[i];
    const double f01 = qubits[i].omega01 / kTwoPi;
    const auto grid = linspace(f01 - window, f01 + window, static_cast<std::size_t>(points));
    SpectrumTrace t = synthesize(s, grid, drive, noise, mix_seed(seed, i));
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%03zu", i);
    t.label = prefix + buf;
    t.flux = flux[i];
    save_trace_pair(t, trace_dir, safe_label(t.label, "trace"));
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  save_rates(truth, opt.out / "truth_rates.csv");
  if (!opt.quiet) log << "wrote " << flux.size() << " traces to " << trace_dir.string() << '\n';
  return 0;
}

int cmd_fit_spectrum(const RunOptions& opt, std::ostream& log, std::ostream& err) {
  const nlohmann::json cfg = load_config(opt.config);
  ConfigObject c(cfg, "root");
  SpectrumJob job;
  job.circuit = parse_circuit(c.child("circuit"));
  job.init.rabi = kTwoPi * c.number("rabi_hz", 0.0);
  if (c.has("init")) {
    const double rabi = job.init.rabi;
    job.init = parse_qubit(c.child("init"));
    job.init.rabi = rabi;
    job.options.init = SpectrumInit::Given;
  } else {
    job.init.omega01 = 1.0;
    job.init.gamma1 = 1.0;
    job.init.r0 = 0.9;
  }
  const QualityThresholds quality =
      c.has("thresholds") ? parse_thresholds(c.child("thresholds")) : QualityThresholds{};
  std::vector<fs::path> files = trace_inputs(opt, c);
  const bool batch = c.has("trace_dir");
  fs::path dir;
  std::string format = "csv";
  if (batch) {
    dir = resolve(opt, c.text("trace_dir"));
    format = c.text("format", "csv");
  }
  c.finish();
  if (batch == !files.empty()) fail(ErrorCode::Parse, "config: give either trace/traces or trace_dir");
  if (format != "csv" && format != "json") fail(ErrorCode::Parse, "config: format must be 'csv' or 'json'");
  ensure_dir(opt.out);

  if (!batch) {
    const SpectrumTrace trace = load_merged(files);
    const std::string stem = safe_label(trace.label, files.front().stem().string());
    const FitResult fit = fit_one(trace, job, opt.out, stem);
    if (!opt.quiet) {
      log << "omega01/2pi = " << fit.param("omega01") / kTwoPi << " Hz (rel_err " << fit.rel("omega01")
          << "), quality " << (passes_quality(fit, quality) ? "ok" : "below threshold") << '\n';
    }
    return 0;
  }

  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == "." + format) files.push_back(entry.path());
  }
  if (ec) fail(ErrorCode::Io, "cannot list " + dir.string() + ": " + ec.message());
  if (files.empty()) fail(ErrorCode::Io, "no ." + format + " traces in " + dir.string());
  std::sort(files.begin(), files.end());

  const fs::path fit_dir = opt.out / "fits";
  ensure_dir(fit_dir);
  std::vector<FitResult> fits(files.size());
  std::vector<double> flux(files.size(), std::numeric_limits<double>::quiet_NaN());
  const auto errors = parallel_for(files.size(), [&](std::size_t i) {
    const SpectrumTrace trace = load_trace(files[i]);
    flux[i] = trace.flux;
    fs::path side = files[i];
    side.replace_extension(".json");
    if (std::isnan(flux[i]) && side != files[i] && fs::exists(side)) flux[i] = load_trace(side).flux;
    fits[i] = fit_one(trace, job, fit_dir, safe_label(trace.label, files[i].stem().string()));
  });

  RateDataset rates;
  auto excluded = open_out(opt.out / "rates_excluded.csv");
  excluded << "file,reason\n";
  int code = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string name = files[i].filename().string();
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const Error& e) {
        err << name << ": " << to_string(e.code()) << ": " << e.what() << '\n';
        excluded << name << ',' << to_string(e.code()) << '\n';
        code = std::max(code, exit_code(e.code()));
      }
      continue;
    }
    const FitResult& f = fits[i];
    if (!(f.rel("omega01") < quality.omega01)) {
      excluded << name << ",rel_err_omega01 " << format_double(f.rel("omega01")) << '\n';
      continue;
    }
    rates.rows.push_back({f.param("omega01"), f.param("gamma1"), f.param("gamma_phi"), flux[i],
                          f.rel("gamma_phi"), f.rel("gamma1")});
  }
  save_rates(rates, opt.out / "rates.csv");
  if (!opt.quiet) log << "fitted " << files.size() << " traces, " << rates.rows.size() << " rate rows\n";
  return code;
}

int cmd_fit_rates(const RunOptions& opt, std::ostream& log, std::ostream& err) {
  const nlohmann::json cfg = load_config(opt.config);
  ConfigObject c(cfg, "root");
  const RateDataset rates = load_rates(resolve(opt, c.text("rates")));
  const physics::TransmonParams transmon = parse_transmon(c.child("transmon"));
  const QualityThresholds quality =
      c.has("thresholds") ? parse_thresholds(c.child("thresholds")) : QualityThresholds{};
  PowerFitOptions power_opt;
  power_opt.max_rel_err = quality.rates;
  power_opt.min_slope_ratio = c.number("min_slope_ratio_power", power_opt.min_slope_ratio);
  OuFitOptions ou_opt;
  ou_opt.max_rel_err = quality.rates;
  ou_opt.min_slope_ratio = c.number("min_slope_ratio_ou", ou_opt.min_slope_ratio);
  const auto plot_points = static_cast<std::size_t>(std::max<long long>(2, c.integer("plot_points", 200)));
  c.finish();
  ensure_dir(opt.out);

  int code = 0;
  auto attempt = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      err << name << ": " << to_string(e.code()) << ": " << e.what() << '\n';
      write_json(opt.out / ("fit_" + name + ".json"), error_json(e));
      code = std::max(code, e.code() == ErrorCode::IllPosed ? 2 : std::max(4, exit_code(e.code())));
    }
  };

  // Relaxation rows: drop those whose own rel_err exceeds the threshold.
  RateDataset g1;
  std::vector<bool> used_g1(rates.rows.size(), false);
  auto excluded = open_out(opt.out / "excluded_rows.csv");
  excluded << "row,omega01,fit,reason\n";
  for (std::size_t i = 0; i < rates.rows.size(); ++i) {
    const double re = rates.rows[i].rel_err_gamma1;
    if (std::isfinite(re) && re > 0.0 && !(re < quality.rates)) {
      excluded << i << ',' << format_double(rates.rows[i].omega01) << ",gamma1,rel_err_gamma1 "
               << format_double(re) << '\n';
      continue;
    }
    g1.rows.push_back(rates.rows[i]);
    used_g1[i] = true;
  }
  const DephasingSelection sel = select_dephasing_rows(rates, transmon, quality.rates);
  for (const auto& [i, reason] : sel.excluded) {
    excluded << i << ',' << format_double(rates.rows[i].omega01) << ",gamma_phi," << reason << '\n';
  }
  excluded.close();

  double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
  for (const auto& r : rates.rows) {
    wmin = std::min(wmin, r.omega01);
    wmax = std::max(wmax, r.omega01);
  }
  const std::vector<double> wgrid = rates.rows.empty() ? std::vector<double>{} : linspace(wmin, wmax, plot_points);

  attempt("gamma1", [&] {
    const FitResult f = fit_gamma1(g1);
    write_json(opt.out / "fit_gamma1.json", to_json(f));
    write_band(opt.out / "plot_gamma1.csv", "omega01", "gamma1", model_band(f, [](const Eigen::VectorXd& p, double w) {
                 return physics::gamma1_model({p[0], p[1], p[2], p[3]}, w);
               }, wgrid));
  });
  attempt("gamma_phi_power", [&] {
    const FitResult f = fit_gamma_phi_power(rates, transmon, power_opt);
    write_json(opt.out / "fit_gamma_phi_power.json", to_json(f));
    const auto [lo, hi] = std::minmax_element(sel.slopes.begin(), sel.slopes.end());
    std::vector<double> sgrid = linspace(std::log(*lo), std::log(*hi), plot_points);
    for (double& s : sgrid) s = std::exp(s);
    write_band(opt.out / "plot_gamma_phi_power.csv", "slope", "gamma_phi",
               model_band(f, [](const Eigen::VectorXd& p, double s) { return std::exp(p[0] + p[1] * std::log(s)); },
                          sgrid));
  });
  attempt("ou", [&] {
    const FitResult f = fit_ou(rates, transmon, ou_opt);
    write_json(opt.out / "fit_ou.json", to_json(f));
    std::vector<double> ws;
    for (double w : wgrid) {
      try {
        const double phi = physics::flux_for_omega01(transmon, w);
        if (physics::domega01_dflux(transmon, phi) != 0.0) ws.push_back(w);
      } catch (const Error&) {
      }
    }
    write_band(opt.out / "plot_gamma_phi_ou.csv", "omega01", "gamma_phi",
               model_band(f, [&](const Eigen::VectorXd& p, double w) {
                 const double slope = std::abs(physics::domega01_dflux(transmon, physics::flux_for_omega01(transmon, w)));
                 return physics::gamma_phi_from(slope * std::max(0.0, p[0]), std::max(0.0, p[1]));
               }, ws));
  });

  auto points = open_out(opt.out / "points.csv");
  points << "omega01,gamma1,gamma_phi,flux,used_gamma1,used_gamma_phi\n";
  for (std::size_t i = 0; i < rates.rows.size(); ++i) {
    const auto& r = rates.rows[i];
    const bool used_phi = std::find(sel.rows.begin(), sel.rows.end(), i) != sel.rows.end();
    points << format_double(r.omega01) << ',' << format_double(r.gamma1) << ',' << format_double(r.gamma_phi)
           << ',' << (std::isnan(r.flux) ? std::string() : format_double(r.flux)) << ',' << used_g1[i] << ','
           << used_phi << '\n';
  }
  if (!opt.quiet) log << "rate fits written to " << opt.out.string() << '\n';
  return code;
}

int cmd_classify(const RunOptions& opt, std::ostream& log) {
  const nlohmann::json cfg = load_config(opt.config);
  ConfigObject c(cfg, "root");
  const std::vector<fs::path> files = trace_inputs(opt, c);
  c.finish();
  if (files.empty()) fail(ErrorCode::Parse, "config: give trace or traces");
  const SpectrumTrace trace = load_merged(files);
  const RegimeLabel label = classify_regime(trace);
  const Path path = trace.has(Path::S12) ? Path::S12 : trace.has(Path::S34) ? Path::S34 : trace.values.begin()->first;
  const ResonanceFeature f = find_feature(trace, path);
  nlohmann::ordered_json j;
  j["label"] = trace.label;
  j["regime"] = std::string(to_string(label));
  j["path"] = std::string(to_string(path));
  j["peak"] = f.peak;
  j["dip"] = f.dip;
  j["peak_hz"] = trace.freqs[f.peak_index];
  j["dip_hz"] = trace.freqs[f.dip_index];
  j["noise_floor"] = f.noise_floor;
  ensure_dir(opt.out);
  write_json(opt.out / ("classify_" + safe_label(trace.label, files.front().stem().string()) + ".json"), j);
  if (!opt.quiet) log << to_string(label) << '\n';
  return 0;
}

int run(const std::string& command, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    if (command == "simulate") return cmd_simulate(opt, log);
    if (command == "synth") return cmd_synth(opt, log);
    if (command == "fit-spectrum") return cmd_fit_spectrum(opt, log, err);
    if (command == "fit-rates") return cmd_fit_rates(opt, log, err);
    if (command == "classify") return cmd_classify(opt, log);
    err << "unknown command '" << command << "'\n";
    return 2;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mzq::cli
