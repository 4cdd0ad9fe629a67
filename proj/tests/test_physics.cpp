#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "mzq/error.hpp"
#include "mzq/montecarlo.hpp"
#include "mzq/physics.hpp"
#include "support.hpp"

using namespace mzq;
using namespace mzq::physics;
using test::kTwoPi;

TEST_CASE("transmon maximum frequency") {
  const auto t = test::reference_transmon();
  CHECK(omega01(t, 0.0) / kTwoPi == test::approx(9.13e9).epsilon(0.005));
  CHECK(domega01_dflux(t, 0.0) == 0.0);
  CHECK(omega01(t, 1.0) == test::approx(omega01(t, 0.0)).epsilon(1e-12));
}

TEST_CASE("transmon closed form at quarter flux") {
  const auto t = test::reference_transmon();
  const long double pi = std::numbers::pi_v<long double>;
  const long double ej = 20.0e9L * std::cos(pi * 0.25L);
  const long double want = 2.0L * pi * (std::sqrt(8.0L * ej * 592.4e6L) - 592.4e6L);
  CHECK(omega01(t, 0.25) == test::approx(static_cast<double>(want)).epsilon(1e-14));
}

TEST_CASE("flux derivative matches central differences") {
  const auto t = test::reference_transmon();
  const double h = 1e-7;
  auto fd = [&](double f) { return (omega01(t, f + h) - omega01(t, f - h)) / (2.0 * h); };
  CHECK(domega01_dflux(t, 0.2) == test::approx(fd(0.2)).epsilon(1e-6));

  int checked = 0;
  for (double f : linspace(-0.98, 0.98, 100)) {
    const double dist = std::abs(f - std::round(f - 0.5) - 0.5);
    if (dist < 0.02 || std::abs(f) < 0.01) continue;
    REQUIRE(domega01_dflux(t, f) == test::approx(fd(f)).epsilon(1e-6));
    ++checked;
  }
  CHECK(checked > 90);
  for (double f : linspace(0.01, 0.49, 25)) CHECK(domega01_dflux(t, f) < 0.0);
}

TEST_CASE("flux inverse and degeneracy") {
  const auto t = test::reference_transmon();
  for (double f : {0.05, 0.2, 0.33, 0.45}) {
    CHECK(flux_for_omega01(t, omega01(t, f)) == test::approx(f).epsilon(1e-10));
  }
  CHECK_THROWS_AS(omega01(t, 0.5), Error);
  try {
    omega01(t, 0.5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFlux);
  }
  CHECK_THROWS_AS(flux_for_omega01(t, kTwoPi * 12e9), Error);
  CHECK_THROWS_AS(omega01(TransmonParams{1e9, 592.4e6}, 0.0), Error);
}

TEST_CASE("gamma1 model") {
  BathModel b{1.7e-4, kTwoPi * 8.3e9, kTwoPi * 1.5e9, 0.0};
  CHECK(gamma1_model(b, kTwoPi * 5e9) / kTwoPi == test::approx(850e3).epsilon(1e-12));
  b.lorentz_weight = kTwoPi * 3e6;
  const double lin = b.alpha * b.lorentz_center;
  CHECK(gamma1_model(b, b.lorentz_center) == test::approx(lin + b.lorentz_weight));
  for (double s : {-1.0, 1.0}) {
    const double w = b.lorentz_center + s * 0.5 * b.lorentz_fwhm;
    CHECK(gamma1_model(b, w) - b.alpha * w == test::approx(0.5 * b.lorentz_weight));
  }
  CHECK_THROWS_AS((BathModel{-1.0, 1.0, 1.0, 0.0}.validate()), Error);
  CHECK_THROWS_AS((BathModel{1.0, 1.0, 0.0, 0.0}.validate()), Error);
}

TEST_CASE("coupling constants") {
  const CouplingParams c{6.9e-21};
  const double a = alpha_from_dipole(c);
  CHECK(a > 1.4e-4);
  CHECK(a < 2.0e-4);
  CHECK(c.alpha() == test::approx(a).epsilon(1e-12));
  CHECK(alpha_from_dipole(CouplingParams{0.0}) == 0.0);
  for (double s : {2.0, 0.3, 17.0}) {
    CHECK(alpha_from_dipole(CouplingParams{s * 6.9e-21}) == test::approx(s * s * a).epsilon(1e-12));
  }

  CHECK(alpha_res(kTwoPi * 70e6, kTwoPi * 6.54e9) == test::approx(3.6e-4).epsilon(0.01));
  CHECK(alpha_res(0.0, 1.0) == 0.0);
  CHECK(alpha_res(3.0, 3.0) == test::approx(std::numbers::pi));

  CHECK(kondo_alpha(kTwoPi) == test::approx(1.0));
  CHECK(kondo_alpha(1.7e-4) == test::approx(2.71e-5).epsilon(0.002));
  CHECK(kondo_alpha(0.0) == 0.0);

  CHECK(coupling_gk(c, 0.0, 1.0) == 0.0);
  CHECK(coupling_gk(c, 4.0e10, 0.5) == test::approx(2.0 * coupling_gk(c, 1.0e10, 0.5)));
}

TEST_CASE("mode sum reproduces the Ohmic rate") {
  const CouplingParams c{6.9e-21};
  const double w01 = kTwoPi * 6e9;
  const double bin = kTwoPi * 100e6;
  // Modes of a line of length L are spaced pi c / L; pick 1e4 modes per bin.
  const double spacing = bin / 1e4;
  const double length = std::numbers::pi * kSpeedOfLight / spacing;
  const long k_lo = static_cast<long>(std::ceil((w01 - 0.5 * bin) / spacing));
  const long k_hi = static_cast<long>(std::floor((w01 + 0.5 * bin) / spacing));
  long double sum = 0.0L;
  for (long k = k_lo; k <= k_hi; ++k) {
    const double g = coupling_gk(c, spacing * static_cast<double>(k), length);
    sum += static_cast<long double>(g) * g;
  }
  const double rate = static_cast<double>(2.0L * std::numbers::pi_v<long double> * sum / bin);
  CHECK(rate == test::approx(c.alpha() * w01).epsilon(0.01));
}

TEST_CASE("Ohmic spectral density") {
  CHECK(spectral_density_ohmic(1.7e-4, 0.0, 1e12) == 0.0);
  const double w = kTwoPi * 5e9;
  CHECK(spectral_density_ohmic(1.7e-4, w, 1e3 * w) == test::approx(1.7e-4 * w).epsilon(0.01));
  const BathModel b{1.7e-4, 1.0, 1.0, 0.0};
  CHECK(spectral_density_ohmic(b.alpha, w, std::numeric_limits<double>::infinity()) ==
        gamma1_model(b, w));
}

TEST_CASE("dressed frequencies") {
  auto [hi, lo] = dressed_frequencies(3.0, 5.0, 0.0);
  CHECK(hi == 5.0);
  CHECK(lo == 3.0);
  const double wr = kTwoPi * 6.54e9, g = kTwoPi * 70e6;
  std::tie(hi, lo) = dressed_frequencies(wr, wr, g);
  CHECK(hi - lo == test::approx(2.0 * g).epsilon(1e-12));
  CHECK((hi - lo) / kTwoPi == test::approx(140e6).epsilon(1e-9));
}

TEST_CASE("OU spectrum") {
  const OUNoise n{79e-6, kTwoPi * 10e6, kTwoPi * 3e9};
  const double v = n.v();
  CHECK(ou_spectrum(n, 1e5) == ou_spectrum(n, -1e5));
  const OUNoise wide{79e-6, 1e15, kTwoPi * 3e9};
  CHECK(ou_spectrum(wide, 1e7) == test::approx(v * v * 2.0 / 1e15).epsilon(1e-12));

  auto total = [](const OUNoise& m) {
    auto s = [&](double x) { return m.kappa * ou_spectrum(m, m.kappa * x); };
    return 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                     s, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12);
  };
  CHECK(total(n) == test::approx(kTwoPi * v * v).epsilon(1e-4));
  const OUNoise narrow{79e-6, 1.0, kTwoPi * 3e9};
  CHECK(total(narrow) == test::approx(kTwoPi * v * v).epsilon(1e-4));
  CHECK(ou_spectrum(narrow, 0.0) > 1e6 * ou_spectrum(n, 0.0));

  const OUNoise frozen{79e-6, 0.0, kTwoPi * 3e9};
  CHECK(ou_spectrum(frozen, 1.0) == 0.0);
  try {
    ou_spectrum(frozen, 0.0);
    FAIL("expected QuasiStaticLimit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::QuasiStaticLimit);
  }
  CHECK_THROWS_AS(ou_spectrum(OUNoise{-1.0, 1.0, 1.0}, 0.0), Error);
}

TEST_CASE("OU coherence") {
  const double v = kTwoPi * 1e6;
  const OUNoise q{1.0, 0.0, v};
  CHECK(ou_coherence(q, 0.0) == 1.0);
  CHECK(ou_coherence(q, std::numbers::sqrt2 / v) == test::approx(std::exp(-1.0)).epsilon(1e-14));
  for (double kappa : {0.0, 0.01 * v, v, 100.0 * v}) {
    const OUNoise n{1.0, kappa, v};
    double prev = 1.0;
    for (double tau : linspace(0.0, 20.0 / v, 400)) {
      const double c = ou_coherence(n, tau);
      REQUIRE(c <= prev);
      REQUIRE(c > 0.0);
      REQUIRE(c <= 1.0);
      prev = c;
    }
  }
  // Smooth across the series switch.
  const OUNoise n{1.0, 1e6, v};
  const double below = ou_coherence(n, 0.0999999999e-6), above = ou_coherence(n, 0.1000000001e-6);
  CHECK(above == test::approx(below).epsilon(1e-9));
}

TEST_CASE("dephasing rate") {
  const double v = kTwoPi * 1e6;
  CHECK(gamma_phi_from(0.0, 1e6) == 0.0);
  CHECK(gamma_phi_model(OUNoise{0.0, 1e6, 1e9}) == 0.0);
  CHECK(gamma_phi_from(v, 0.0) == test::approx(kTwoPi * 1e6 / std::numbers::sqrt2).epsilon(1e-15));
  CHECK(gamma_phi_from(v, 100.0 * v) == test::approx(v / 100.0).epsilon(0.02));

  for (double kappa : {1e-6 * v, 0.3 * v, 3.0 * v, 1e3 * v}) {
    const double g = gamma_phi_from(v, kappa);
    CHECK(ou_coherence(OUNoise{1.0, kappa, v}, 1.0 / g) == test::approx(std::exp(-1.0)).epsilon(1e-12));
  }

  const auto vs = linspace(0.1 * v, 10.0 * v, 30);
  const auto ks = linspace(0.0, 50.0 * v, 30);
  for (double k : ks) {
    double prev = 0.0;
    for (double x : vs) {
      const double g = gamma_phi_from(x, k);
      REQUIRE(g > prev);
      prev = g;
    }
  }
  for (double x : vs) {
    double prev = std::numeric_limits<double>::infinity();
    for (double k : ks) {
      const double g = gamma_phi_from(x, k);
      REQUIRE(g <= prev);
      prev = g;
    }
  }
}

TEST_CASE("Monte Carlo oracle agrees with the closed form") {
  const double v = kTwoPi * 1e6;
  const auto taus = linspace(0.0, 5.0 / v, 21);
  OuSimulationOptions opt;
  opt.trajectories = 20000;
  opt.seed = 99;
  for (double ratio : {0.0, 1.0, 100.0}) {
    const auto mc = simulate_ou_coherence(v, ratio * v, taus, opt);
    double sq = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const double d = mc[i] - ou_coherence(OUNoise{1.0, ratio * v, v}, taus[i]);
      sq += d * d;
    }
    CAPTURE(ratio);
    CHECK(std::sqrt(sq / static_cast<double>(taus.size())) < 0.02);
  }
  const auto a = simulate_ou_coherence(v, v, taus, opt);
  const auto b = simulate_ou_coherence(v, v, taus, opt);
  CHECK(a == b);
  auto scalar = opt;
  scalar.isa = kernels::Isa::Scalar;
  CHECK(simulate_ou_coherence(v, v, taus, scalar) == a);
}
