#include "mzq/physics.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "mzq/error.hpp"

namespace mzq::physics {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFluxDegeneracy = 1e-12;

double junction_factor(double flux) {
  const double c = std::cos(std::numbers::pi * flux);
  if (std::abs(c) < kFluxDegeneracy) {
    fail(ErrorCode::DegenerateFlux, "junction energy vanishes at half-integer flux");
  }
  return c;
}

// h(u) = (exp(-u) - 1 + u) / u^2, evaluated without cancellation near 0.
double decay_shape(double u) {
  if (u < 0.1) {
    // Alternating series 1/2 - u/6 + u^2/24 - ...
    double term = 0.5, sum = 0.0;
    for (int k = 2; k < 14; ++k) {
      sum += term;
      term *= -u / static_cast<double>(k + 1);
    }
    return sum;
  }
  return (u + std::expm1(-u)) / (u * u);
}

}  // namespace

void TransmonParams::validate() const {
  if (!(ec > 0.0) || !(ej_max > 0.0) || !std::isfinite(ec) || !std::isfinite(ej_max)) {
    fail(ErrorCode::InvalidArgument, "transmon energies must be positive and finite");
  }
  if (!(ej_max / ec > 10.0)) {
    fail(ErrorCode::InvalidArgument, "E_J,max / E_C must exceed 10 for the transmon model");
  }
}

double omega01(const TransmonParams& t, double flux) {
  t.validate();
  const double c = junction_factor(flux);
  return kTwoPi * (std::sqrt(8.0 * t.ej_max * std::abs(c) * t.ec) - t.ec);
}

double domega01_dflux(const TransmonParams& t, double flux) {
  t.validate();
  const double c = junction_factor(flux);
  const double s = std::sin(std::numbers::pi * flux);
  const double d_abs_cos = std::copysign(1.0, c) * (-std::numbers::pi * s);
  return kTwoPi * std::sqrt(8.0 * t.ej_max * t.ec) * d_abs_cos / (2.0 * std::sqrt(std::abs(c)));
}

double flux_for_omega01(const TransmonParams& t, double omega) {
  t.validate();
  const double f = omega / kTwoPi;
  const double c = (f + t.ec) * (f + t.ec) / (8.0 * t.ej_max * t.ec);
  if (!(f > 0.0) || !(c <= 1.0) || !(c > kFluxDegeneracy)) {
    fail(ErrorCode::InvalidArgument, "omega01 is outside the tunable range of the transmon");
  }
  return std::acos(c) / std::numbers::pi;
}

void BathModel::validate() const {
  if (!(alpha >= 0.0)) fail(ErrorCode::InvalidArgument, "bath alpha must be >= 0");
  if (!(lorentz_fwhm > 0.0)) fail(ErrorCode::InvalidArgument, "Lorentzian FWHM must be > 0");
}

double gamma1_model(const BathModel& b, double omega01) {
  if (!(omega01 > 0.0)) fail(ErrorCode::InvalidArgument, "omega01 must be > 0");
  const double hw = 0.5 * b.lorentz_fwhm;
  const double d = omega01 - b.lorentz_center;
  return b.alpha * omega01 + b.lorentz_weight * (hw * hw) / (d * d + hw * hw);
}

double CouplingParams::g0() const { return std::sqrt(d_tilde * d_tilde / (kHbar * kEpsilon0)); }

double CouplingParams::alpha() const {
  const double g = g0();
  return g * g / kSpeedOfLight;
}

double alpha_from_dipole(const CouplingParams& c) {
  return c.d_tilde * c.d_tilde / (kHbar * kSpeedOfLight * kEpsilon0);
}

double alpha_res(double g, double omega_res) {
  if (!(omega_res > 0.0)) fail(ErrorCode::InvalidArgument, "resonator frequency must be > 0");
  const double ratio = g / omega_res;
  return std::numbers::pi * ratio * ratio;
}

double kondo_alpha(double alpha) { return alpha / kTwoPi; }

double coupling_gk(const CouplingParams& c, double omega_k, double line_length) {
  if (!(line_length > 0.0)) fail(ErrorCode::InvalidArgument, "line length must be > 0");
  if (!(omega_k >= 0.0)) fail(ErrorCode::InvalidArgument, "mode frequency must be >= 0");
  return c.g0() * std::sqrt(omega_k / (2.0 * line_length));
}

double spectral_density_ohmic(double beta, double omega, double cutoff) {
  if (!(omega >= 0.0)) fail(ErrorCode::InvalidArgument, "omega must be >= 0");
  if (!(cutoff > 0.0)) fail(ErrorCode::InvalidArgument, "cutoff must be > 0");
  if (std::isinf(cutoff)) return beta * omega;
  return beta * omega * std::exp(-omega / cutoff);
}

std::pair<double, double> dressed_frequencies(double omega_res, double omega_q, double g) {
  if (!(g >= 0.0)) fail(ErrorCode::InvalidArgument, "coupling g must be >= 0");
  const double mean = 0.5 * (omega_res + omega_q);
  const double half_detuning = 0.5 * (omega_res - omega_q);
  const double split = std::sqrt(g * g + half_detuning * half_detuning);
  return {mean + split, mean - split};
}

double OUNoise::v() const { return std::abs(slope) * sigma; }

void OUNoise::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail(ErrorCode::InvalidArgument, "OU sigma must be >= 0");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) fail(ErrorCode::InvalidArgument, "OU kappa must be >= 0");
  if (!std::isfinite(slope)) fail(ErrorCode::InvalidArgument, "flux slope must be finite");
}

double ou_spectrum(const OUNoise& n, double omega) {
  n.validate();
  const double v = n.v();
  if (n.kappa == 0.0) {
    if (omega == 0.0) {
      fail(ErrorCode::QuasiStaticLimit, "OU spectrum is a delta distribution at kappa = 0");
    }
    return 0.0;
  }
  return v * v * 2.0 * n.kappa / (n.kappa * n.kappa + omega * omega);
}

double ou_coherence(const OUNoise& n, double tau) {
  n.validate();
  if (!(tau >= 0.0)) fail(ErrorCode::InvalidArgument, "tau must be >= 0");
  const double vt = n.v() * tau;
  return std::exp(-vt * vt * decay_shape(n.kappa * tau));
}

double gamma_phi_from(double v, double kappa) {
  if (!(v >= 0.0) || !(kappa >= 0.0)) fail(ErrorCode::InvalidArgument, "v and kappa must be >= 0");
  if (v == 0.0) return 0.0;
  if (kappa == 0.0) return v / std::numbers::sqrt2;
  // Solve y^2 h(a y) = 1 for y = v T, a = kappa / v.
  const double a = kappa / v;
  const auto f = [a](double y) { return y * y * decay_shape(a * y) - 1.0; };
  double lo = std::numbers::sqrt2;
  if (f(lo) >= 0.0) return v / lo;  // quasi-static within rounding
  double hi = 2.0 * lo;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  std::uintmax_t iters = 200;
  const auto [left, right] =
      boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return v / (0.5 * (left + right));
}

double gamma_phi_model(const OUNoise& n) {
  n.validate();
  return gamma_phi_from(n.v(), n.kappa);
}

}  // namespace mzq::physics
