#pragma once

// Transmon spectrum, bath models and flux-noise dephasing.
//
// Energies of the transmon are given as frequencies E/h in Hz. Rates and
// angular frequencies are in rad/s, flux in units of the flux quantum.

#include <utility>

namespace mzq::physics {

// CODATA 2018.
inline constexpr double kHbar = 1.054571817e-34;        // J s
inline constexpr double kEpsilon0 = 8.8541878128e-12;   // F/m
inline constexpr double kSpeedOfLight = 299792458.0;    // m/s

struct TransmonParams {
  double ej_max = 0.0;  // Hz
  double ec = 0.0;      // Hz

  // Throws InvalidArgument unless ej_max / ec > 10.
  void validate() const;
};

// omega01 = 2 pi (sqrt(8 E_J(flux) E_C) - E_C), E_J(flux) = E_J,max |cos(pi flux)|.
// Throws DegenerateFlux at half-integer flux.
double omega01(const TransmonParams& t, double flux);
double domega01_dflux(const TransmonParams& t, double flux);

// Inverse of omega01 on the branch flux in [0, 1/2). Throws InvalidArgument
// when omega is outside the tunable range.
double flux_for_omega01(const TransmonParams& t, double omega);

// Gamma1 = alpha * omega01 + Lorentzian parasitic mode (peak-height form).
struct BathModel {
  double alpha = 0.0;
  double lorentz_center = 0.0;  // rad/s
  double lorentz_fwhm = 1.0;    // rad/s
  double lorentz_weight = 0.0;  // rad/s, value of the Lorentzian at its center

  void validate() const;
};

double gamma1_model(const BathModel& b, double omega01);

// Qubit dipole over the line cross-section, d / sqrt(A0), in A s.
struct CouplingParams {
  double d_tilde = 0.0;

  double g0() const;     // sqrt(d_tilde^2 / (hbar eps0))
  double alpha() const;  // g0^2 / c
};

double alpha_from_dipole(const CouplingParams& c);
double alpha_res(double g, double omega_res);
double kondo_alpha(double alpha);
// Single-mode coupling g_k = g0 sqrt(omega_k / (2 L)).
double coupling_gk(const CouplingParams& c, double omega_k, double line_length);

// J(omega) = beta * omega * exp(-omega / cutoff); an infinite cutoff drops
// the suppression factor.
double spectral_density_ohmic(double beta, double omega, double cutoff);

// Dressed qubit-resonator frequencies (upper, lower).
std::pair<double, double> dressed_frequencies(double omega_res, double omega_q, double g);

// Ornstein-Uhlenbeck flux noise with <dPhi(0) dPhi(tau)> = sigma^2 exp(-kappa |tau|),
// mapped onto the qubit frequency through the flux sensitivity `slope`.
struct OUNoise {
  double sigma = 0.0;  // Phi_0
  double kappa = 0.0;  // rad/s
  double slope = 0.0;  // rad/s per Phi_0

  // Frequency-noise amplitude v = |slope| * sigma.
  double v() const;
  void validate() const;
};

// S(omega) = v^2 * 2 kappa / (kappa^2 + omega^2). Throws QuasiStaticLimit for
// kappa = 0 at omega = 0.
double ou_spectrum(const OUNoise& n, double omega);

// exp(-(v/kappa)^2 (exp(-kappa tau) - 1 + kappa tau)); exp(-v^2 tau^2 / 2) at kappa = 0.
double ou_coherence(const OUNoise& n, double tau);

// 1/T where ou_coherence(T) = 1/e.
double gamma_phi_model(const OUNoise& n);

// Same rate expressed directly through v and kappa.
double gamma_phi_from(double v, double kappa);

}  // namespace mzq::physics
