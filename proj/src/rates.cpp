#include "mzq/rates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mzq/error.hpp"
#include "mzq/trace_io.hpp"

namespace mzq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string format_optional(double v) { return std::isnan(v) ? std::string() : format_double(v); }

LmResult best_of(const LmProblem& prob, const std::vector<Eigen::VectorXd>& starts, const LmOptions& lm) {
  LmResult best;
  bool have = false;
  for (const auto& s : starts) {
    LmResult r = lm_solve(prob, s, lm);
    if (!have || (r.converged && !best.converged) ||
        (r.converged == best.converged && r.sse < best.sse)) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

void require_converged(const LmResult& lm, const char* what) {
  if (lm.converged) return;
  std::ostringstream msg;
  msg << what << " did not converge (" << lm.message << ") after " << lm.iterations << " iterations";
  fail(ErrorCode::NoConvergence, msg.str());
}

// Weighted linear least squares for gamma1 = alpha * w + weight * L(w) at a
// fixed Lorentzian shape, with both coefficients kept >= 0.
struct LinearSolution {
  double alpha = 0.0, weight = 0.0, sse = kInf;
};

LinearSolution solve_linear(const std::vector<double>& w, const std::vector<double>& y,
                            const std::vector<double>& inv_sigma, double center, double fwhm) {
  const std::size_t n = w.size();
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  const double hw = 0.5 * fwhm;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = w[i] - center;
    a(i, 0) = w[i] * inv_sigma[i];
    a(i, 1) = hw * hw / (d * d + hw * hw) * inv_sigma[i];
    b[i] = y[i] * inv_sigma[i];
  }
  LinearSolution best;
  auto consider = [&](double alpha, double weight) {
    if (alpha < 0.0 || weight < 0.0) return;
    const double sse = (a.col(0) * alpha + a.col(1) * weight - b).squaredNorm();
    if (sse < best.sse) best = {alpha, weight, sse};
  };
  const Eigen::Vector2d both = a.colPivHouseholderQr().solve(b);
  consider(both[0], both[1]);
  consider(a.col(0).dot(b) / a.col(0).squaredNorm(), 0.0);
  const double l2 = a.col(1).squaredNorm();
  if (l2 > 0.0) consider(0.0, a.col(1).dot(b) / l2);
  return best;
}

}  // namespace

void RateDataset::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RateRow& r = rows[i];
    if (!(r.omega01 > 0.0) || !std::isfinite(r.omega01)) {
      fail(ErrorCode::InvalidArgument, "rate row " + std::to_string(i) + ": omega01 must be > 0");
    }
    if (!std::isfinite(r.gamma1) || !std::isfinite(r.gamma_phi)) {
      fail(ErrorCode::InvalidArgument, "rate row " + std::to_string(i) + ": rates must be finite");
    }
  }
}

void write_rates_csv(const RateDataset& d, std::ostream& out) {
  d.validate();
  out << kRateCsvHeader << '\n';
  for (const RateRow& r : d.rows) {
    out << format_double(r.omega01) << ',' << format_double(r.gamma1) << ','
        << format_double(r.gamma_phi) << ',' << format_optional(r.flux) << ','
        << format_optional(r.rel_err_gamma_phi) << ',' << format_optional(r.rel_err_gamma1) << '\n';
  }
}

RateDataset read_rates_csv(std::istream& in) {
  static const std::vector<std::string> kRequired{"omega01", "gamma1", "gamma_phi", "flux",
                                                  "rel_err_gamma_phi"};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) header = split(line);
  }
  if (header.empty()) fail(ErrorCode::Parse, "rate CSV is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (std::find(kRequired.begin(), kRequired.end(), h) == kRequired.end() && h != "rel_err_gamma1") {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown column '" + h + "'");
    }
    if (!col.emplace(h, i).second) {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": duplicate column '" + h + "'");
    }
  }
  for (const auto& h : kRequired) {
    if (!col.count(h)) fail(ErrorCode::Parse, "rate CSV lacks column '" + h + "'");
  }

  RateDataset d;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " fields");
    }
    auto get = [&](const std::string& name, bool optional) {
      const auto it = col.find(name);
      if (it == col.end()) return std::numeric_limits<double>::quiet_NaN();
      const std::string& s = f[it->second];
      if (s.empty() && optional) return std::numeric_limits<double>::quiet_NaN();
      double v = 0.0;
      if (!parse_double(s, v)) {
        fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad " + name + " '" + s + "'");
      }
      return v;
    };
    RateRow r;
    r.omega01 = get("omega01", false);
    r.gamma1 = get("gamma1", false);
    r.gamma_phi = get("gamma_phi", false);
    r.flux = get("flux", true);
    r.rel_err_gamma_phi = get("rel_err_gamma_phi", true);
    r.rel_err_gamma1 = get("rel_err_gamma1", true);
    if (!(r.omega01 > 0.0)) {
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": omega01 must be > 0");
    }
    d.rows.push_back(r);
  }
  return d;
}

void save_rates(const RateDataset& d, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + file.string() + " for writing");
  write_rates_csv(d, out);
  if (!out) fail(ErrorCode::Io, "failed writing " + file.string());
}

RateDataset load_rates(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + file.string());
  try {
    return read_rates_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.what());
  }
}

FitResult fit_gamma1(const RateDataset& rates, const Gamma1FitOptions& opt) {
  rates.validate();
  const std::size_t n = rates.rows.size();
  if (n < opt.min_rows) {
    fail(ErrorCode::IllPosed, "fit_gamma1 needs at least " + std::to_string(opt.min_rows) +
                                  " rows, got " + std::to_string(n));
  }
  std::vector<double> w(n), y(n), inv_sigma(n);
  bool weighted = true;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = rates.rows[i].omega01;
    y[i] = rates.rows[i].gamma1;
    if (!(y[i] > 0.0)) fail(ErrorCode::IllPosed, "fit_gamma1 needs gamma1 > 0 in every row");
    const double re = rates.rows[i].rel_err_gamma1;
    weighted = weighted && std::isfinite(re) && re > 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double rel = weighted ? rates.rows[i].rel_err_gamma1 / 1.96 : 1.0;
    inv_sigma[i] = 1.0 / (rel * y[i]);
  }
  const auto [wmin, wmax] = std::minmax_element(w.begin(), w.end());
  const double span = *wmax - *wmin;
  if (span < opt.min_span) {
    std::ostringstream msg;
    msg << "fit_gamma1: omega01 spans " << span / (2.0 * std::numbers::pi) << " Hz, need "
        << opt.min_span / (2.0 * std::numbers::pi) << " Hz";
    fail(ErrorCode::IllPosed, msg.str());
  }

  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  double min_gap = span;
  for (std::size_t i = 1; i < n; ++i) {
    if (sorted[i] > sorted[i - 1]) min_gap = std::min(min_gap, sorted[i] - sorted[i - 1]);
  }

  // Profile the linear coefficients over a grid of Lorentzian shapes.
  LinearSolution best;
  double best_center = 0.5 * (*wmin + *wmax), best_fwhm = span;
  constexpr int kCenters = 81, kWidths = 30;
  for (int c = 0; c < kCenters; ++c) {
    const double center = *wmin - 0.1 * span + 1.2 * span * c / (kCenters - 1);
    for (int k = 0; k < kWidths; ++k) {
      const double fwhm = min_gap * std::pow(2.0 * span / min_gap, static_cast<double>(k) / (kWidths - 1));
      const LinearSolution s = solve_linear(w, y, inv_sigma, center, fwhm);
      if (s.sse < best.sse) {
        best = s;
        best_center = center;
        best_fwhm = fwhm;
      }
    }
  }
  if (!std::isfinite(best.sse)) fail(ErrorCode::BadInitialization, "fit_gamma1: no admissible start");

  const double ymean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  LmProblem prob;
  prob.lower = Eigen::Vector4d(0.0, -kInf, 1e-6 * min_gap, 0.0);
  prob.upper = Eigen::Vector4d(kInf, kInf, kInf, kInf);
  prob.scale = Eigen::Vector4d(std::max(best.alpha, ymean / *wmax), best_fwhm, best_fwhm,
                               std::max(best.weight, 1e-3 * ymean));
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    const physics::BathModel b{p[0], p[1], p[2], p[3]};
    for (std::size_t i = 0; i < n; ++i) {
      r[static_cast<Eigen::Index>(i)] = (physics::gamma1_model(b, w[i]) - y[i]) * inv_sigma[i];
    }
  };
  const LmResult lm =
      lm_solve(prob, Eigen::Vector4d(best.alpha, best_center, best_fwhm, best.weight), opt.lm);
  require_converged(lm, "fit_gamma1");
  return make_fit_result({"alpha", "lorentz_center", "lorentz_fwhm", "lorentz_weight"}, lm, lm.p,
                         Eigen::MatrixXd::Identity(4, 4));
}

DephasingSelection select_dephasing_rows(const RateDataset& rates,
                                         const physics::TransmonParams& transmon,
                                         double max_rel_err, bool allow_zero) {
  rates.validate();
  DephasingSelection sel;
  for (std::size_t i = 0; i < rates.rows.size(); ++i) {
    const RateRow& r = rates.rows[i];
    if (!(r.rel_err_gamma_phi < max_rel_err)) {
      std::ostringstream msg;
      msg << "rel_err_gamma_phi " << r.rel_err_gamma_phi << " >= " << max_rel_err;
      sel.excluded.emplace_back(i, msg.str());
      continue;
    }
    if (!(r.gamma_phi > 0.0 || (allow_zero && r.gamma_phi == 0.0))) {
      sel.excluded.emplace_back(i, allow_zero ? "gamma_phi < 0" : "gamma_phi <= 0");
      continue;
    }
    if (!std::isfinite(r.flux)) {
      sel.excluded.emplace_back(i, "flux unknown");
      continue;
    }
    double slope = 0.0;
    try {
      slope = std::abs(physics::domega01_dflux(transmon, r.flux));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateFlux) throw;
      sel.excluded.emplace_back(i, "flux at half-integer degeneracy");
      continue;
    }
    if (!(slope > 0.0)) {
      sel.excluded.emplace_back(i, "zero flux slope");
      continue;
    }
    sel.rows.push_back(i);
    sel.slopes.push_back(slope);
  }
  return sel;
}

namespace {

DephasingSelection checked_selection(const RateDataset& rates, const physics::TransmonParams& t,
                                     double max_rel_err, double min_ratio, std::size_t min_rows,
                                     const char* what, bool allow_zero) {
  DephasingSelection sel = select_dephasing_rows(rates, t, max_rel_err, allow_zero);
  if (sel.rows.size() < min_rows) {
    fail(ErrorCode::IllPosed, std::string(what) + ": " + std::to_string(sel.rows.size()) +
                                  " usable rows, need " + std::to_string(min_rows));
  }
  const auto [lo, hi] = std::minmax_element(sel.slopes.begin(), sel.slopes.end());
  if (*hi < min_ratio * *lo) {
    std::ostringstream msg;
    msg << what << ": flux slopes span a factor " << *hi / *lo << ", need " << min_ratio;
    fail(ErrorCode::IllPosed, msg.str());
  }
  return sel;
}

}  // namespace

FitResult fit_gamma_phi_power(const RateDataset& rates, const physics::TransmonParams& transmon,
                              const PowerFitOptions& opt) {
  const DephasingSelection sel =
      checked_selection(rates, transmon, opt.max_rel_err, opt.min_slope_ratio, 3, "fit_gamma_phi_power", false);
  const std::size_t n = sel.rows.size();
  std::vector<double> x(n), y(n), inv_sigma(n);
  for (std::size_t k = 0; k < n; ++k) {
    const RateRow& r = rates.rows[sel.rows[k]];
    x[k] = std::log(sel.slopes[k]);
    y[k] = std::log(r.gamma_phi);
    const double s = r.rel_err_gamma_phi / 1.96;
    inv_sigma[k] = s > 0.0 ? 1.0 / s : 1.0;
  }
  // Closed-form weighted regression as the starting point.
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (std::size_t k = 0; k < n; ++k) {
    a(k, 0) = inv_sigma[k];
    a(k, 1) = x[k] * inv_sigma[k];
    b[k] = y[k] * inv_sigma[k];
  }
  const Eigen::Vector2d p0 = a.colPivHouseholderQr().solve(b);

  LmProblem prob;
  prob.lower = Eigen::Vector2d::Constant(-kInf);
  prob.upper = Eigen::Vector2d::Constant(kInf);
  prob.scale = Eigen::Vector2d(std::max(1.0, std::abs(p0[0])), 1.0);
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      r[static_cast<Eigen::Index>(k)] = (p[0] + p[1] * x[k] - y[k]) * inv_sigma[k];
    }
  };
  const LmResult lm = lm_solve(prob, p0, opt.lm);
  require_converged(lm, "fit_gamma_phi_power");
  return make_fit_result({"log_a", "eta"}, lm, lm.p, Eigen::MatrixXd::Identity(2, 2));
}

FitResult fit_ou(const RateDataset& rates, const physics::TransmonParams& transmon,
                 const OuFitOptions& opt) {
  const DephasingSelection sel =
      checked_selection(rates, transmon, opt.max_rel_err, opt.min_slope_ratio, 3, "fit_ou", true);
  const std::size_t n = sel.rows.size();
  std::vector<double> y(n), inv_sigma(n);
  std::vector<double> sigma_guess(n);
  double positive_sum = 0.0;
  std::size_t positive = 0;
  for (std::size_t k = 0; k < n; ++k) {
    y[k] = rates.rows[sel.rows[k]].gamma_phi;
    if (y[k] > 0.0) {
      positive_sum += y[k];
      ++positive;
    }
  }
  // Zero rates are weighted against the mean level of the others.
  const double level = positive > 0 ? positive_sum / static_cast<double>(positive) : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = rates.rows[sel.rows[k]].rel_err_gamma_phi / 1.96;
    inv_sigma[k] = 1.0 / ((s > 0.0 ? s : 1.0) * (y[k] > 0.0 ? y[k] : level));
    sigma_guess[k] = std::sqrt(2.0) * y[k] / sel.slopes[k];
  }
  std::vector<double> tmp = sigma_guess;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
  const double sigma0 = tmp[n / 2];
  tmp = sel.slopes;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
  const double slope_med = tmp[n / 2];
  const double sigma_scale = sigma0 > 0.0 ? sigma0 : level / slope_med;
  const double v0 = sigma_scale * slope_med;

  LmProblem prob;
  prob.lower = Eigen::Vector2d(0.0, 0.0);
  prob.upper = Eigen::Vector2d::Constant(kInf);
  prob.scale = Eigen::Vector2d(sigma_scale, v0);
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double model = physics::gamma_phi_from(sel.slopes[k] * p[0], p[1]);
      r[static_cast<Eigen::Index>(k)] = (model - y[k]) * inv_sigma[k];
    }
  };
  // The white-noise branch needs sigma ~ sqrt(gamma_phi kappa) / slope.
  std::vector<Eigen::VectorXd> starts{Eigen::Vector2d(sigma0, 0.0)};
  for (double ratio : {0.3, 1.0, 3.0, 10.0, 30.0, 100.0}) {
    const double kappa = ratio * v0;
    const double g = physics::gamma_phi_from(v0, kappa);
    starts.emplace_back(Eigen::Vector2d(sigma0 * std::sqrt(v0 / std::sqrt(2.0) / g), kappa));
  }
  const LmResult lm = best_of(prob, starts, opt.lm);
  require_converged(lm, "fit_ou");
  FitResult fit = make_fit_result({"sigma", "kappa"}, lm, lm.p, Eigen::MatrixXd::Identity(2, 2));
  const double se = std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  fit.derived["kappa_upper95"] = fit.param("kappa") + student_t95_one_sided(fit.dof) * se;
  fit.derived["kappa_zero_consistent"] = fit.param("kappa") - fit.ci("kappa") <= 0.0 ? 1.0 : 0.0;
  return fit;
}

std::vector<BandPoint> model_band(const FitResult& fit,
                                  const std::function<double(const Eigen::VectorXd&, double)>& f,
                                  const std::vector<double>& xs) {
  const auto n = static_cast<Eigen::Index>(fit.names.size());
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = fit.param(fit.names[static_cast<std::size_t>(i)]);
  const double t = student_t95(fit.dof);
  std::vector<BandPoint> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const double value = f(p, x);
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(std::abs(p[i]), 1e-300) + (p[i] == 0.0 ? 1e-12 : 0.0);
      Eigen::VectorXd q = p;
      q[i] += h;
      g[i] = (f(q, x) - value) / h;
    }
    const double var = g.dot(fit.covariance * g);
    const double half = std::isfinite(var) ? t * std::sqrt(std::max(0.0, var)) : kInf;
    out.push_back({x, value, value - half, value + half});
  }
  return out;
}

}  // namespace mzq
