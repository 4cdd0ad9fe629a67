#include <doctest.h>

#include <cmath>
#include <random>

#include "mzq/error.hpp"
#include "mzq/estimate.hpp"
#include "mzq/physics.hpp"
#include "mzq/rates.hpp"
#include "support.hpp"

using namespace mzq;
using test::kTwoPi;

namespace {

constexpr int kTrials = 100;

double rms_cross(const SpectrumTrace& t) {
  double sq = 0.0;
  std::size_t n = 0;
  for (Path p : {Path::S12, Path::S34}) {
    for (const auto& z : t.at(p)) {
      sq += std::norm(z);
      ++n;
    }
  }
  return std::sqrt(sq / static_cast<double>(n));
}

bool covers(const FitResult& fit, const std::string& name, double truth) {
  return std::isfinite(fit.ci(name)) && std::abs(fit.param(name) - truth) <= fit.ci(name);
}

}  // namespace

TEST_CASE("spectrum fit intervals cover the generating parameters") {
  for (double snr_db : {20.0, 30.0}) {
    const double f01 = 5.826e9;
    auto spec = test::regime_circuit();
    spec.qubit = test::regime_qubit(f01);
    const auto grid = test::window(f01);
    const double sigma = rms_cross(sweep(spec, grid)) * std::pow(10.0, -snr_db / 20.0);
    const auto& q = spec.qubit;
    const std::pair<const char*, double> truth[] = {
        {"omega01", q->omega01}, {"gamma1", q->gamma1}, {"gamma_phi", q->gamma_phi}, {"r0", q->r0}};
    int hits[4] = {0, 0, 0, 0};
    for (int seed = 1; seed <= kTrials; ++seed) {
      SpectrumFitOptions o;
      o.require_convergence = false;
      const auto fit = fit_spectrum(synthesize(spec, grid, DrivePort::Both, sigma, 1000 + seed),
                                    test::regime_circuit(), *q, o);
      for (int k = 0; k < 4; ++k) hits[k] += covers(fit, truth[k].first, truth[k].second);
    }
    for (int k = 0; k < 4; ++k) {
      CAPTURE(snr_db);
      CAPTURE(truth[k].first);
      CHECK(hits[k] >= 90);
      MESSAGE(std::string(truth[k].first) << " at " << snr_db << " dB: " << hits[k] << "/" << kTrials);
    }
  }
}

TEST_CASE("gamma1 fit interval covers alpha") {
  int hits = 0;
  for (int seed = 1; seed <= kTrials; ++seed) {
    hits += covers(fit_gamma1(test::gamma1_dataset(5000 + seed, 0.05)), "alpha", 1.7e-4);
  }
  MESSAGE("alpha: " << hits << "/" << kTrials);
  CHECK(hits >= 90);
}

TEST_CASE("power-law interval covers the white-noise exponent") {
  const auto tr = test::reference_transmon();
  int hits = 0;
  for (int seed = 1; seed <= kTrials; ++seed) {
    std::mt19937_64 rng(7000 + seed);
    std::normal_distribution<double> nd;
    RateDataset d;
    for (double phi : linspace(0.02, 0.42, 30)) {
      RateRow r;
      r.flux = phi;
      r.omega01 = physics::omega01(tr, phi);
      r.gamma1 = 1.7e-4 * r.omega01;
      const double s = std::abs(physics::domega01_dflux(tr, phi));
      r.gamma_phi = 3e-12 * s * s * (1.0 + 0.1 * nd(rng));
      r.rel_err_gamma_phi = 0.196;
      d.rows.push_back(r);
    }
    hits += covers(fit_gamma_phi_power(d, tr), "eta", 2.0);
  }
  MESSAGE("eta: " << hits << "/" << kTrials);
  CHECK(hits >= 90);
}

TEST_CASE("OU interval covers sigma in the quasi-static limit") {
  int hits = 0;
  for (int seed = 1; seed <= kTrials; ++seed) {
    hits += covers(fit_ou(test::ou_dataset(79e-6, 0.0, 9000 + seed, 0.10), test::reference_transmon()), "sigma", 79e-6);
  }
  MESSAGE("sigma: " << hits << "/" << kTrials);
  CHECK(hits >= 90);
}
