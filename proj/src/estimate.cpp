#include "mzq/estimate.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mzq/error.hpp"
#include "mzq/kernels.hpp"

namespace mzq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClipSigma = 3.0;
constexpr double kFeatureSigma = 3.0;
constexpr double kRelativeFloor = 1e-4;
constexpr std::size_t kSmooth = 5;
constexpr std::size_t kSearchHalfWidths = 10;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

// Residual of |S| about a quadratic background, fitted with iterative
// sigma clipping so the resonance does not pull the baseline.
std::vector<double> detrend(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<bool> keep(n, true);
  std::vector<double> resid(n);
  for (int pass = 0; pass < 20; ++pass) {
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    Eigen::Index rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      a.row(rows) << 1.0, x[i], x[i] * x[i];
      b[rows] = y[i];
      ++rows;
    }
    const Eigen::Vector3d c =
        a.topRows(rows).colPivHouseholderQr().solve(b.head(rows));
    std::vector<double> kept;
    for (std::size_t i = 0; i < n; ++i) {
      resid[i] = y[i] - (c[0] + c[1] * x[i] + c[2] * x[i] * x[i]);
      if (keep[i]) kept.push_back(resid[i]);
    }
    const double center = median(kept);
    for (double& k : kept) k = std::abs(k - center);
    const double sigma = 1.4826 * median(kept);
    bool changed = false;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool k = std::abs(resid[i] - center) <= kClipSigma * sigma;
      changed = changed || k != keep[i];
      keep[i] = k;
      count += k;
    }
    if (!changed || count < 8) break;
  }
  return resid;
}

std::vector<double> running_mean(const std::vector<double>& v, std::size_t width) {
  const std::size_t n = v.size();
  const std::size_t half = width / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += v[k];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

Path fit_reference_path(const SpectrumTrace& trace) {
  if (trace.has(Path::S12)) return Path::S12;
  if (trace.has(Path::S34)) return Path::S34;
  if (trace.values.empty()) fail(ErrorCode::InvalidArgument, "trace has no paths");
  return trace.values.begin()->first;
}

// Forward model shared by the fit and the fitted-model export.
class CrossModel {
 public:
  CrossModel(const SpectrumTrace& trace, const CircuitSpec& spec) : spec_(spec) {
    spec_.calibration.reset();
    spec_.qubit.reset();
    spec_.validate();
    for (Path p : {Path::S12, Path::S34}) {
      if (trace.has(p)) paths_.push_back(p);
    }
    if (paths_.empty()) fail(ErrorCode::InvalidArgument, "trace has no cross path (s12 or s34)");
    omega_.resize(trace.freqs.size());
    for (std::size_t i = 0; i < omega_.size(); ++i) omega_[i] = kTwoPi * trace.freqs[i];
    center_ = 0.5 * (omega_.front() + omega_.back());
    left_.reserve(omega_.size());
    right_.reserve(omega_.size());
    for (double w : omega_) {
      const TransferMatrix4 bs = bs_matrix(spec_.splitter, w);
      const TransferMatrix4 tl = tl_matrix(spec_.lines, w);
      left_.push_back(bs * tl);
      right_.push_back(tl * bs);
    }
    re_.resize(omega_.size());
    im_.resize(omega_.size());
  }

  double center() const { return center_; }
  const std::vector<Path>& paths() const { return paths_; }
  const std::vector<double>& omega() const { return omega_; }

  // Uncalibrated cross-path values, path-major.
  std::vector<Complex> raw(const QubitScatterer& q) {
    const double g2 = q.gamma2();
    const double sat = q.rabi == 0.0 ? 0.0 : q.rabi * q.rabi / (q.gamma1 * g2);
    kernels::qubit_reflection(omega_, {q.omega01, g2, q.r0, sat}, re_, im_);
    const std::size_t n = omega_.size();
    std::vector<Complex> out(n * paths_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Complex r(re_[i], im_[i]);
      const TransferMatrix4 qm = qubit_matrix(QubitRT{r, 1.0 - r}, spec_.qubit_arm, spec_.qubit_form);
      const SParameters s = s_parameters(left_[i] * qm * right_[i]);
      for (std::size_t k = 0; k < paths_.size(); ++k) {
        out[k * n + i] = paths_[k] == Path::S12 ? s.s12 : s.s34;
      }
    }
    return out;
  }

  // Cross-path values without the qubit, path-major.
  std::vector<Complex> raw_free() const {
    const std::size_t n = omega_.size();
    std::vector<Complex> out(n * paths_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const SParameters s = s_parameters(left_[i] * right_[i]);
      for (std::size_t k = 0; k < paths_.size(); ++k) {
        out[k * n + i] = paths_[k] == Path::S12 ? s.s12 : s.s34;
      }
    }
    return out;
  }

  Complex calibration(Complex scale, double delay, double omega) const {
    return scale * std::polar(1.0, -delay * (omega - center_));
  }

 private:
  CircuitSpec spec_;
  std::vector<Path> paths_;
  std::vector<double> omega_;
  double center_ = 0.0;
  std::vector<TransferMatrix4> left_, right_;
  std::vector<double> re_, im_;
};

const std::vector<std::string> kSpectrumNames{"omega01", "gamma1", "gamma_phi", "r0",
                                              "cal_re",  "cal_im", "cal_delay"};

QubitScatterer qubit_from(const Eigen::VectorXd& p, double center, double rabi) {
  QubitScatterer q;
  q.omega01 = center + p[0];
  q.gamma1 = p[1];
  q.gamma_phi = p[2];
  q.r0 = p[3];
  q.rabi = rabi;
  return q;
}

}  // namespace

double FitResult::param(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end()) fail(ErrorCode::InvalidArgument, "no fit parameter '" + name + "'");
  return it->second;
}

double FitResult::ci(const std::string& name) const {
  const auto it = ci95.find(name);
  if (it == ci95.end()) fail(ErrorCode::InvalidArgument, "no fit parameter '" + name + "'");
  return it->second;
}

double FitResult::rel(const std::string& name) const {
  const auto it = rel_err.find(name);
  if (it == rel_err.end()) fail(ErrorCode::InvalidArgument, "no fit parameter '" + name + "'");
  return it->second;
}

FitResult make_fit_result(const std::vector<std::string>& names, const LmResult& lm,
                          const Eigen::VectorXd& values, const Eigen::MatrixXd& to_reported) {
  FitResult r;
  r.names = names;
  const auto m = static_cast<std::size_t>(lm.r.size());
  const auto n = static_cast<std::size_t>(lm.p.size());
  r.dof = m > n ? m - n : 0;
  const Eigen::MatrixXd cov = lm_covariance(lm.jacobian, lm.sse, r.dof);
  if (cov.allFinite()) {
    r.covariance = to_reported * cov * to_reported.transpose();
  } else {
    r.covariance = Eigen::MatrixXd::Constant(values.size(), values.size(), kInf);
  }
  const double t = student_t95(r.dof);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double ci = t * std::sqrt(std::max(0.0, r.covariance(k, k)));
    r.params[names[i]] = values[k];
    r.ci95[names[i]] = ci;
    r.rel_err[names[i]] = values[k] != 0.0 ? ci / std::abs(values[k]) : kInf;
  }
  r.residual_rms = m > 0 ? std::sqrt(lm.sse / static_cast<double>(m)) : 0.0;
  r.iterations = lm.iterations;
  r.converged = lm.converged;
  r.message = lm.message;
  r.sse_history = lm.sse_history;
  return r;
}

nlohmann::ordered_json to_json(const FitResult& r) {
  nlohmann::ordered_json j;
  auto section = [&](const std::map<std::string, double>& m) {
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& name : r.names) {
      const double v = m.at(name);
      if (std::isfinite(v)) {
        s[name] = v;
      } else {
        s[name] = nullptr;
      }
    }
    return s;
  };
  j["params"] = section(r.params);
  j["ci95"] = section(r.ci95);
  j["rel_err"] = section(r.rel_err);
  j["residual_rms"] = r.residual_rms;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  if (!r.derived.empty()) {
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.derived) {
      if (std::isfinite(v)) {
        d[k] = v;
      } else {
        d[k] = nullptr;
      }
    }
    j["derived"] = d;
  }
  return j;
}

bool passes_quality(const FitResult& fit, const QualityThresholds& q) {
  return fit.rel("omega01") < q.omega01 && fit.rel("gamma1") < q.rates &&
         fit.rel("gamma_phi") < q.rates;
}

std::string_view to_string(RegimeLabel r) noexcept {
  switch (r) {
    case RegimeLabel::PeakDip: return "PeakDip";
    case RegimeLabel::Dip: return "Dip";
    case RegimeLabel::DipPeak: return "DipPeak";
  }
  return "?";
}

ResonanceFeature find_feature(const SpectrumTrace& trace, Path path) {
  trace.validate();
  const auto& v = trace.at(path);
  const std::size_t n = v.size();
  if (n < 2 * kSmooth + 3) fail(ErrorCode::InvalidArgument, "trace is too short to locate a feature");

  std::vector<double> x(n), y(n);
  const double f0 = trace.freqs.front(), f1 = trace.freqs.back();
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (2.0 * trace.freqs[i] - f0 - f1) / (f1 - f0);
    y[i] = std::abs(v[i]);
  }

  std::vector<double> d2;
  d2.reserve(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) d2.push_back(std::abs(y[i + 1] - 2.0 * y[i] + y[i - 1]));

  ResonanceFeature f;
  f.noise_floor = median(d2) / (0.6745 * std::sqrt(6.0));
  const std::vector<double> e = running_mean(detrend(x, y), kSmooth);

  std::size_t k = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(e[i]) > std::abs(e[k])) k = i;
  }
  const double amp = std::abs(e[k]);
  const double threshold = std::max(kFeatureSigma * f.noise_floor, kRelativeFloor * median(y));
  if (!(amp > threshold)) {
    std::ostringstream msg;
    msg << "no resonance feature: largest excursion " << amp << " vs threshold " << threshold;
    fail(ErrorCode::NoFeature, msg.str());
  }
  f.index = k;

  const double sign = e[k] > 0.0 ? 1.0 : -1.0;
  std::size_t lo = k, hi = k;
  while (lo > 0 && sign * e[lo] > 0.5 * amp) --lo;
  while (hi + 1 < n && sign * e[hi] > 0.5 * amp) ++hi;
  f.half_width = std::max<std::size_t>(1, (hi - lo) / 2);

  const std::size_t reach = kSearchHalfWidths * f.half_width;
  const std::size_t a = k > reach ? k - reach : 0;
  const std::size_t b = std::min(n - 1, k + reach);
  f.peak_index = f.dip_index = k;
  for (std::size_t i = a; i <= b; ++i) {
    if (e[i] > f.peak) {
      f.peak = e[i];
      f.peak_index = i;
    }
    if (-e[i] > f.dip) {
      f.dip = -e[i];
      f.dip_index = i;
    }
  }
  return f;
}

RegimeLabel classify_regime(const SpectrumTrace& trace) {
  const ResonanceFeature f = find_feature(trace, fit_reference_path(trace));
  if (f.peak < 0.2 * f.dip) return RegimeLabel::Dip;
  return f.peak_index < f.dip_index ? RegimeLabel::PeakDip : RegimeLabel::DipPeak;
}

FitResult fit_spectrum(const SpectrumTrace& trace, const CircuitSpec& spec_template,
                       const QubitScatterer& init, const SpectrumFitOptions& options) {
  trace.validate();
  if (trace.freqs.size() < 20) fail(ErrorCode::IllPosed, "fit_spectrum needs at least 20 frequency points");
  CrossModel model(trace, spec_template);
  const std::size_t n = trace.freqs.size();
  const double center = model.center();
  const double domega = model.omega()[1] - model.omega()[0];

  std::vector<Complex> data;
  data.reserve(n * model.paths().size());
  for (Path p : model.paths()) {
    const auto& v = trace.at(p);
    data.insert(data.end(), v.begin(), v.end());
  }

  QubitScatterer q0 = init;
  std::size_t anchor = 0, half_width = 0;
  if (options.init == SpectrumInit::Auto) {
    try {
      const ResonanceFeature f = find_feature(trace, model.paths().front());
      anchor = f.index;
      half_width = f.half_width;
      q0.omega01 = model.omega()[f.index];
      q0.gamma1 = static_cast<double>(f.half_width) * domega;
      q0.gamma_phi = 0.5 * q0.gamma1;
      q0.r0 = 0.9;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoFeature) throw;
    }
  }
  q0.validate();

  // Cable delay maximising the coherent sum of data against a reference model.
  auto coherent_delay = [&](const std::vector<Complex>& reference, double lo, double hi, std::size_t grid,
                            std::size_t skip_from, std::size_t skip_to) {
    std::vector<Complex> z(data.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const std::size_t j = i % n;
      z[i] = j >= skip_from && j < skip_to ? Complex(0.0) : data[i] * std::conj(reference[i]);
    }
    auto power = [&](double tau) {
      double total = 0.0;
      for (std::size_t k = 0; k < model.paths().size(); ++k) {
        Complex acc(0.0);
        for (std::size_t i = 0; i < n; ++i) acc += z[k * n + i] * std::polar(1.0, tau * (model.omega()[i] - center));
        total += std::norm(acc);
      }
      return total;
    };
    const double dtau = (hi - lo) / static_cast<double>(grid);
    double best = -1.0, tau_best = 0.5 * (lo + hi);
    for (std::size_t j = 0; j <= grid; ++j) {
      const double tau = lo + dtau * static_cast<double>(j);
      const double pw = power(tau);
      if (pw > best) {
        best = pw;
        tau_best = tau;
      }
    }
    const auto refined = boost::math::tools::brent_find_minima([&](double t) { return -power(t); },
                                                               tau_best - dtau, tau_best + dtau, 40);
    return -refined.second > best ? refined.first : tau_best;
  };
  const double nyquist = std::numbers::pi / std::abs(domega);
  std::size_t skip_from = 0, skip_to = 0;
  if (half_width > 0) {
    const std::size_t reach = 4 * half_width;
    skip_from = anchor > reach ? anchor - reach : 0;
    skip_to = std::min(n, anchor + reach + 1);
    if (n - (skip_to - skip_from) < n / 4) skip_from = skip_to = 0;
  }
  double delay0 = coherent_delay(model.raw_free(), -nyquist, nyquist, 4 * n, skip_from, skip_to);
  const double width = model.omega().back() - model.omega().front();
  double data_norm = 0.0;
  for (const Complex& d : data) data_norm += std::norm(d);

  // Best complex scale and delay for a trial model: sse = |d|^2 - |<m e^{-i tau w}, d>|^2 / |m|^2.
  auto overlap = [&](const std::vector<Complex>& m, double tau, Complex& num, double& den) {
    num = Complex(0.0);
    den = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      num += std::conj(m[i]) * data[i] * std::polar(1.0, tau * (model.omega()[i % n] - center));
      den += std::norm(m[i]);
    }
  };
  const double band = 0.5 * kTwoPi / width;
  const std::size_t taps = 33;
  std::vector<double> taus(taps);
  std::vector<Complex> phases(taps * n);
  for (std::size_t j = 0; j < taps; ++j) {
    taus[j] = delay0 - band + 2.0 * band * static_cast<double>(j) / static_cast<double>(taps - 1);
    for (std::size_t i = 0; i < n; ++i) phases[j * n + i] = std::polar(1.0, taus[j] * (model.omega()[i] - center));
  }
  auto matched = [&](const QubitScatterer& q, Complex& scale, double& tau) {
    const std::vector<Complex> m = model.raw(q);
    std::vector<Complex> w(m.size());
    double den = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      w[i] = std::conj(m[i]) * data[i];
      den += std::norm(m[i]);
    }
    if (!(den > 0.0)) return kInf;
    double best = -1.0;
    for (std::size_t j = 0; j < taps; ++j) {
      Complex num(0.0);
      for (std::size_t i = 0; i < w.size(); ++i) num += w[i] * phases[j * n + i % n];
      if (std::norm(num) > best) {
        best = std::norm(num);
        scale = num / den;
        tau = taus[j];
      }
    }
    return data_norm - best / den;
  };
  Complex scale0;
  double best_sse = matched(q0, scale0, delay0);

  // The anchor sits on one lobe of the feature; profile the neighbourhood.
  if (half_width > 0) {
    const QubitScatterer base = q0;
    const double step = 0.5 * static_cast<double>(half_width) * domega;
    const double reach = 10.0 * static_cast<double>(half_width) * domega;
    for (double off = -reach; off <= reach + 0.5 * step; off += step) {
      for (double wscale : {0.25, 0.5, 1.0, 2.0}) {
        for (double r0 : {0.3, 0.9}) {
          QubitScatterer q = base;
          q.omega01 = model.omega()[anchor] + off;
          q.gamma1 = base.gamma1 * wscale;
          q.gamma_phi = 0.5 * q.gamma1;
          q.r0 = r0;
          Complex scale;
          double tau = 0.0;
          double sse = kInf;
          try {
            sse = matched(q, scale, tau);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateScatterer && e.code() != ErrorCode::SingularSystem) throw;
          }
          if (sse < best_sse) {
            best_sse = sse;
            q0 = q;
            scale0 = scale;
            delay0 = tau;
          }
        }
      }
    }
  }
  {
    const std::vector<Complex> m = model.raw(q0);
    const double dtau = 2.0 * band / static_cast<double>(taps - 1);
    const auto refined = boost::math::tools::brent_find_minima(
        [&](double t) {
          Complex num;
          double den;
          overlap(m, t, num, den);
          return -std::norm(num) / den;
        },
        delay0 - dtau, delay0 + dtau, 40);
    Complex num;
    double den;
    overlap(m, refined.first, num, den);
    if (data_norm - std::norm(num) / den < best_sse) {
      delay0 = refined.first;
      scale0 = num / den;
    }
  }

  const double rate_scale = std::max(q0.gamma2(), domega);
  Eigen::VectorXd p0(7);
  p0 << q0.omega01 - center, q0.gamma1, q0.gamma_phi, q0.r0, scale0.real(), scale0.imag(), delay0;

  LmProblem prob;
  prob.lower.resize(7);
  prob.upper.resize(7);
  prob.scale.resize(7);
  prob.lower << -kInf, 1e-9 * rate_scale, 0.0, 1e-6, -kInf, -kInf, -kInf;
  prob.upper << kInf, kInf, kInf, 1.0 - 1e-6, kInf, kInf, kInf;
  prob.scale << rate_scale, rate_scale, rate_scale, 1.0, std::abs(scale0) + 1e-300,
      std::abs(scale0) + 1e-300, 1.0 / width;
  const double rabi = init.rabi;
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const QubitScatterer q = qubit_from(p, center, rabi);
    const std::vector<Complex> m = model.raw(q);
    const Complex a(p[4], p[5]);
    r.resize(static_cast<Eigen::Index>(2 * m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Complex d = model.calibration(a, p[6], model.omega()[i % n]) * m[i] - data[i];
      r[static_cast<Eigen::Index>(2 * i)] = d.real();
      r[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
    }
  };

  const LmResult lm = lm_solve(prob, p0, options.lm);
  if (!lm.converged && options.require_convergence) {
    std::ostringstream msg;
    msg << "fit_spectrum did not converge (" << lm.message << ") after " << lm.iterations
        << " iterations, sse = " << lm.sse;
    fail(ErrorCode::NoConvergence, msg.str());
  }
  Eigen::VectorXd values = lm.p;
  values[0] += center;
  return make_fit_result(kSpectrumNames, lm, values, Eigen::MatrixXd::Identity(7, 7));
}

SpectrumTrace fitted_model(const SpectrumTrace& trace, const CircuitSpec& spec_template,
                           const FitResult& fit, double rabi) {
  CrossModel model(trace, spec_template);
  QubitScatterer q;
  q.omega01 = fit.param("omega01");
  q.gamma1 = fit.param("gamma1");
  q.gamma_phi = fit.param("gamma_phi");
  q.r0 = fit.param("r0");
  q.rabi = rabi;
  const std::vector<Complex> m = model.raw(q);
  const Complex a(fit.param("cal_re"), fit.param("cal_im"));
  const double delay = fit.param("cal_delay");
  SpectrumTrace out;
  out.freqs = trace.freqs;
  out.label = trace.label;
  out.flux = trace.flux;
  const std::size_t n = trace.freqs.size();
  for (std::size_t k = 0; k < model.paths().size(); ++k) {
    auto& v = out.values[model.paths()[k]];
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = model.calibration(a, delay, model.omega()[i]) * m[k * n + i];
  }
  return out;
}

}  // namespace mzq
