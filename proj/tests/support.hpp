#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>

#include "mzq/components.hpp"
#include "mzq/physics.hpp"
#include "mzq/rates.hpp"

namespace mzq::test {

// Purely relative comparison; doctest's default adds 1 to the scale.
inline doctest::Approx approx(double v) { return doctest::Approx(v).scale(0.0); }

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kCenterHz = 5.746e9;

inline physics::TransmonParams reference_transmon() { return {20.0e9, 592.4e6}; }

inline CircuitSpec regime_circuit() {
  CircuitSpec spec;
  spec.lines = LineParams::imbalanced_arms(kTwoPi * kCenterHz, 2);
  return spec;
}

inline QubitScatterer regime_qubit(double f01_hz) {
  return {kTwoPi * f01_hz, 1.7e-4 * kTwoPi * f01_hz, kTwoPi * 1.5e6, 0.5, kTwoPi * 1.0e6};
}

inline std::vector<double> window(double f01_hz, double half_hz = 15e6, std::size_t n = 401) {
  return linspace(f01_hz - half_hz, f01_hz + half_hz, n);
}

inline Complex random_complex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double re = u(rng);
  return {re, u(rng)};
}

inline TransferMatrix4 random_matrix(std::mt19937_64& rng) {
  std::array<Complex, 16> a;
  for (auto& z : a) z = random_complex(rng);
  return TransferMatrix4(a);
}

// Triple loop in long double.
inline TransferMatrix4 naive_product(const TransferMatrix4& a, const TransferMatrix4& b) {
  using LC = std::complex<long double>;
  TransferMatrix4 out;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      LC acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += LC(a(i, k)) * LC(b(k, j));
      out(i, j) = Complex(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
    }
  }
  return out;
}

inline double max_rel_diff(const TransferMatrix4& a, const TransferMatrix4& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < 16; ++k) {
    scale = std::max(scale, std::abs(a.data()[k]));
    diff = std::max(diff, std::abs(a.data()[k] - b.data()[k]));
  }
  return diff / scale;
}

// Outputs with a1_in = a3_in = 0, from the rows of the port relation whose
// left side vanishes (Cramer on the 2x2), then the remaining two rows.
struct PortOracle {
  std::complex<long double> a1_out, a3_out, a4_out, a2_out;
};

inline PortOracle port_oracle(const TransferMatrix4& m, Complex a2_in, Complex a4_in) {
  using LC = std::complex<long double>;
  auto e = [&](int i, int j) { return LC(m(i, j)); };
  const LC in4(a4_in), in2(a2_in);
  const LC b1 = e(1, 0) * in4 + e(1, 2) * in2;
  const LC b3 = e(3, 0) * in4 + e(3, 2) * in2;
  // -M11 a4o - M13 a2o = b1 ; -M31 a4o - M33 a2o = b3
  const LC det = e(1, 1) * e(3, 3) - e(1, 3) * e(3, 1);
  const LC a4o = (-b1 * e(3, 3) + e(1, 3) * b3) / det;
  const LC a2o = (-e(1, 1) * b3 + b1 * e(3, 1)) / det;
  PortOracle o;
  o.a4_out = a4o;
  o.a2_out = a2o;
  o.a1_out = e(0, 0) * in4 + e(0, 1) * a4o + e(0, 2) * in2 + e(0, 3) * a2o;
  o.a3_out = e(2, 0) * in4 + e(2, 1) * a4o + e(2, 2) * in2 + e(2, 3) * a2o;
  return o;
}

inline physics::BathModel reference_bath() {
  const double center = kTwoPi * 8.3e9;
  return {1.7e-4, center, kTwoPi * 1.5e9, 1.7e-4 * center};
}

inline RateDataset gamma1_dataset(std::uint64_t seed, double noise, std::size_t n = 30) {
  const auto bath = reference_bath();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RateDataset d;
  for (double w : linspace(kTwoPi * 4e9, kTwoPi * 8.5e9, n)) {
    RateRow r;
    r.omega01 = w;
    r.gamma1 = physics::gamma1_model(bath, w) * (1.0 + noise * nd(rng));
    r.gamma_phi = kTwoPi * 1e6;
    d.rows.push_back(r);
  }
  return d;
}

// Flux points spanning 4 to 8.5 GHz, multiplicative noise, per-row rel_err
// matching the noise level.
inline RateDataset ou_dataset(double sigma, double kappa, std::uint64_t seed, double noise,
                              std::size_t n = 30) {
  const auto tr = reference_transmon();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const double p0 = physics::flux_for_omega01(tr, kTwoPi * 8.5e9);
  const double p1 = physics::flux_for_omega01(tr, kTwoPi * 4.0e9);
  RateDataset d;
  for (double phi : linspace(p0, p1, n)) {
    RateRow r;
    r.flux = phi;
    r.omega01 = physics::omega01(tr, phi);
    r.gamma1 = 1.7e-4 * r.omega01;
    const physics::OUNoise on{sigma, kappa, physics::domega01_dflux(tr, phi)};
    r.gamma_phi = physics::gamma_phi_model(on) * (1.0 + noise * nd(rng));
    r.rel_err_gamma_phi = noise > 0.0 ? 1.96 * noise : 0.1;
    d.rows.push_back(r);
  }
  return d;
}

}  // namespace mzq::test
