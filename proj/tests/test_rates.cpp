#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mzq/error.hpp"
#include "mzq/physics.hpp"
#include "mzq/rates.hpp"
#include "support.hpp"

using namespace mzq;
using test::kTwoPi;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

// Dephasing rows over a flux range whose slopes span more than a decade.
RateDataset dephasing_dataset(const std::function<double(double)>& rate_of_slope, double noise,
                              std::uint64_t seed) {
  const auto tr = test::reference_transmon();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RateDataset d;
  for (double phi : linspace(0.02, 0.42, 30)) {
    RateRow r;
    r.flux = phi;
    r.omega01 = physics::omega01(tr, phi);
    r.gamma1 = 1.7e-4 * r.omega01;
    r.gamma_phi = rate_of_slope(std::abs(physics::domega01_dflux(tr, phi))) * (1.0 + noise * nd(rng));
    r.rel_err_gamma_phi = 0.1;
    d.rows.push_back(r);
  }
  return d;
}

}  // namespace

TEST_CASE("gamma1 fit on noiseless linear data") {
  RateDataset d;
  for (double w : linspace(kTwoPi * 4e9, kTwoPi * 8.5e9, 20)) {
    RateRow r;
    r.omega01 = w;
    r.gamma1 = 1.7e-4 * w;
    d.rows.push_back(r);
  }
  const auto fit = fit_gamma1(d);
  CHECK(fit.param("alpha") == test::approx(1.7e-4).epsilon(1e-10));
  CHECK(fit.param("lorentz_weight") <= 1e-10 * 1.7e-4 * kTwoPi * 4e9);
}

TEST_CASE("gamma1 fit on the bath model with noise") {
  const auto fit = fit_gamma1(test::gamma1_dataset(1000, 0.1));
  CHECK(fit.converged);
  CHECK(std::abs(fit.param("alpha") - 1.7e-4) <= fit.ci("alpha"));
  CHECK(std::abs(fit.param("alpha") - 1.7e-4) <= 0.3e-4 + fit.ci("alpha"));
  CHECK(fit.param("lorentz_center") / kTwoPi == test::approx(8.3e9).epsilon(0.05));
}

TEST_CASE("a narrow resonance is absorbed by the Lorentzian") {
  const physics::BathModel spike{1.7e-4, kTwoPi * 6.1e9, kTwoPi * 0.3e9, 2.0 * 1.7e-4 * kTwoPi * 6.1e9};
  RateDataset d;
  for (double w : linspace(kTwoPi * 4e9, kTwoPi * 8.5e9, 30)) {
    RateRow r;
    r.omega01 = w;
    r.gamma1 = physics::gamma1_model(spike, w);
    d.rows.push_back(r);
  }
  const auto fit = fit_gamma1(d);
  CHECK(fit.param("alpha") == test::approx(1.7e-4).epsilon(0.01));
  CHECK(fit.param("lorentz_center") == test::approx(spike.lorentz_center).epsilon(0.01));
  CHECK(fit.param("lorentz_fwhm") == test::approx(spike.lorentz_fwhm).epsilon(0.01));
}

TEST_CASE("gamma1 fit weighting") {
  auto d = test::gamma1_dataset(7, 0.1);
  const auto plain = fit_gamma1(d);
  for (auto& r : d.rows) r.rel_err_gamma1 = 0.196;
  const auto uniform = fit_gamma1(d);
  CHECK(uniform.param("alpha") == test::approx(plain.param("alpha")).epsilon(1e-6));
  CHECK(uniform.ci("alpha") == test::approx(plain.ci("alpha")).epsilon(1e-6));
  for (std::size_t i = 0; i < d.rows.size(); i += 2) d.rows[i].rel_err_gamma1 = 0.8;
  const auto uneven = fit_gamma1(d);
  CHECK(uneven.param("alpha") != test::approx(plain.param("alpha")).epsilon(1e-4));
  d.rows.front().rel_err_gamma1 = std::numeric_limits<double>::quiet_NaN();
  const auto partial = fit_gamma1(d);
  CHECK(partial.param("alpha") == test::approx(plain.param("alpha")).epsilon(1e-6));
}

TEST_CASE("gamma1 fit rejects ill-posed datasets") {
  auto small = test::gamma1_dataset(1, 0.0, 7);
  CHECK(code_of([&] { fit_gamma1(small); }) == ErrorCode::IllPosed);
  RateDataset clustered;
  for (double w : linspace(kTwoPi * 5e9, kTwoPi * 5.1e9, 12)) {
    RateRow r;
    r.omega01 = w;
    r.gamma1 = 1.7e-4 * w;
    clustered.rows.push_back(r);
  }
  CHECK(code_of([&] { fit_gamma1(clustered); }) == ErrorCode::IllPosed);
}

TEST_CASE("power law recovers the white-noise exponent") {
  const auto exact = dephasing_dataset([](double s) { return 3e-12 * s * s; }, 0.0, 1);
  const auto fit = fit_gamma_phi_power(exact, test::reference_transmon());
  CHECK(fit.param("eta") == test::approx(2.0).epsilon(1e-9));
  CHECK(fit.param("log_a") == test::approx(std::log(3e-12)).epsilon(1e-9));

  const auto noisy = dephasing_dataset([](double s) { return 3e-12 * s * s; }, 0.05, 2);
  const auto nf = fit_gamma_phi_power(noisy, test::reference_transmon());
  CHECK(std::abs(nf.param("eta") - 2.0) <= nf.ci("eta"));
  CHECK(nf.ci("eta") < 0.2);
}

TEST_CASE("power law on quasi-static data has unit exponent") {
  const auto d = dephasing_dataset(
      [](double s) { return physics::gamma_phi_model(physics::OUNoise{79e-6, 0.0, s}); }, 0.0, 1);
  const auto fit = fit_gamma_phi_power(d, test::reference_transmon());
  CHECK(fit.param("eta") == test::approx(1.0).epsilon(1e-9));
}

TEST_CASE("power law on mixed OU data lies between the limits") {
  const double kappa = kTwoPi * 3e6;
  const auto d = dephasing_dataset(
      [&](double s) { return physics::gamma_phi_model(physics::OUNoise{79e-6, kappa, s}); }, 0.0, 1);
  const auto fit = fit_gamma_phi_power(d, test::reference_transmon());
  CHECK(fit.param("eta") > 1.0);
  CHECK(fit.param("eta") < 2.0);
}

TEST_CASE("dephasing selection and the slope-span rule") {
  auto d = dephasing_dataset([](double s) { return 1e-12 * s * s; }, 0.0, 1);
  d.rows[0].rel_err_gamma_phi = 0.5;
  d.rows[1].gamma_phi = 0.0;
  d.rows[2].flux = std::numeric_limits<double>::quiet_NaN();
  const auto sel = select_dephasing_rows(d, test::reference_transmon(), 0.33);
  CHECK(sel.rows.size() == d.rows.size() - 3);
  REQUIRE(sel.excluded.size() == 3);
  CHECK(sel.excluded[0].first == 0);
  CHECK(sel.excluded[1].first == 1);
  CHECK(sel.excluded[2].first == 2);
  CHECK(select_dephasing_rows(d, test::reference_transmon(), 0.33, true).rows.size() ==
        d.rows.size() - 2);

  RateDataset narrow;
  for (double phi : linspace(0.3, 0.35, 10)) {
    RateRow r;
    r.flux = phi;
    r.omega01 = physics::omega01(test::reference_transmon(), phi);
    r.gamma1 = 1.0;
    r.gamma_phi = 1e5;
    r.rel_err_gamma_phi = 0.1;
    narrow.rows.push_back(r);
  }
  CHECK(code_of([&] { fit_gamma_phi_power(narrow, test::reference_transmon()); }) == ErrorCode::IllPosed);
  CHECK(code_of([&] { fit_ou(narrow, test::reference_transmon()); }) == ErrorCode::IllPosed);
  narrow.rows.resize(2);
  CHECK(code_of([&] { fit_ou(narrow, test::reference_transmon()); }) == ErrorCode::IllPosed);
}

TEST_CASE("OU fit in the quasi-static limit") {
  const auto fit = fit_ou(test::ou_dataset(79e-6, 0.0, 5, 0.1), test::reference_transmon());
  CHECK(fit.param("sigma") == test::approx(79e-6).epsilon(0.05));
  REQUIRE(fit.derived.count("kappa_upper95") == 1);
  CHECK(std::isfinite(fit.derived.at("kappa_upper95")));
  CHECK(fit.derived.at("kappa_upper95") >= fit.param("kappa"));
  CHECK(fit.derived.at("kappa_zero_consistent") == 1.0);
  const auto j = to_json(fit);
  CHECK(j.contains("derived"));
}

TEST_CASE("OU fit on noiseless data recovers both parameters") {
  const double kappa = kTwoPi * 10e6;
  const auto fit = fit_ou(test::ou_dataset(500e-6, kappa, 1, 0.0), test::reference_transmon());
  CHECK(fit.param("sigma") == test::approx(500e-6).epsilon(1e-6));
  CHECK(fit.param("kappa") == test::approx(kappa).epsilon(1e-6));
}

TEST_CASE("OU fit recovers kappa where it is identifiable") {
  const double kappa = kTwoPi * 10e6;
  const auto fit = fit_ou(test::ou_dataset(500e-6, kappa, 3, 0.02), test::reference_transmon());
  CHECK(fit.param("sigma") == test::approx(500e-6).epsilon(0.1));
  CHECK(fit.param("kappa") == test::approx(kappa).epsilon(0.2));
  CHECK(std::abs(fit.param("kappa") - kappa) <= fit.ci("kappa"));
}

TEST_CASE("OU fit on noise-free qubits gives zero amplitude") {
  auto d = test::ou_dataset(79e-6, 0.0, 1, 0.0);
  for (auto& r : d.rows) r.gamma_phi = 0.0;
  const auto fit = fit_ou(d, test::reference_transmon());
  CHECK(fit.param("sigma") == 0.0);
}

TEST_CASE("model band brackets the fitted curve") {
  const auto d = dephasing_dataset([](double s) { return 3e-12 * s * s; }, 0.1, 4);
  const auto fit = fit_gamma_phi_power(d, test::reference_transmon());
  const auto f = [](const Eigen::VectorXd& p, double x) { return std::exp(p[0] + p[1] * std::log(x)); };
  const auto band = model_band(fit, f, linspace(1e9, 1e11, 7));
  REQUIRE(band.size() == 7);
  for (const auto& b : band) {
    CHECK(b.lower < b.value);
    CHECK(b.value < b.upper);
  }
}

TEST_CASE("rates CSV round trip and parse errors") {
  auto d = test::ou_dataset(79e-6, 0.0, 1, 0.1, 5);
  d.rows[1].rel_err_gamma1 = 0.25;
  d.rows[2].flux = std::numeric_limits<double>::quiet_NaN();
  std::stringstream s;
  write_rates_csv(d, s);
  const auto back = read_rates_csv(s);
  REQUIRE(back.rows.size() == d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    CHECK(back.rows[i].omega01 == d.rows[i].omega01);
    CHECK(back.rows[i].gamma_phi == d.rows[i].gamma_phi);
    CHECK(back.rows[i].rel_err_gamma_phi == d.rows[i].rel_err_gamma_phi);
  }
  CHECK(std::isnan(back.rows[2].flux));
  CHECK(back.rows[1].rel_err_gamma1 == 0.25);
  CHECK(std::isnan(back.rows[0].rel_err_gamma1));

  std::stringstream no_optional("omega01,gamma1,gamma_phi,flux,rel_err_gamma_phi\n1e10,1e6,1e5,0.1,0.2\n");
  CHECK(read_rates_csv(no_optional).rows.size() == 1);

  std::stringstream reordered("gamma_phi,omega01,rel_err_gamma_phi,gamma1,flux\n1e5,1e10,0.2,1e6,\n");
  const auto r = read_rates_csv(reordered);
  CHECK(r.rows[0].omega01 == 1e10);
  CHECK(std::isnan(r.rows[0].flux));

  std::stringstream unknown("omega01,gamma1,gamma_phi,flux,rel_err_gamma_phi,extra\n");
  CHECK(code_of([&] { read_rates_csv(unknown); }) == ErrorCode::Parse);

  std::stringstream bad("omega01,gamma1,gamma_phi,flux,rel_err_gamma_phi\n1e10,1e6,1e5,0.1,0.2\n-1,1,1,0,0\n");
  try {
    read_rates_csv(bad);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
