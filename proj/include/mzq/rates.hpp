#pragma once

// Second-stage fits of the extracted rates against the transition frequency.

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mzq/estimate.hpp"
#include "mzq/physics.hpp"

namespace mzq {

struct RateRow {
  double omega01 = 0.0;    // rad/s
  double gamma1 = 0.0;     // rad/s
  double gamma_phi = 0.0;  // rad/s
  double flux = std::numeric_limits<double>::quiet_NaN();
  double rel_err_gamma_phi = std::numeric_limits<double>::quiet_NaN();
  double rel_err_gamma1 = std::numeric_limits<double>::quiet_NaN();  // optional
};

struct RateDataset {
  std::vector<RateRow> rows;
  void validate() const;
};

// Header of the written CSV; rel_err_gamma1 may be absent on input.
inline constexpr const char* kRateCsvHeader =
    "omega01,gamma1,gamma_phi,flux,rel_err_gamma_phi,rel_err_gamma1";

void write_rates_csv(const RateDataset& d, std::ostream& out);
RateDataset read_rates_csv(std::istream& in);
void save_rates(const RateDataset& d, const std::filesystem::path& file);
RateDataset load_rates(const std::filesystem::path& file);

struct Gamma1FitOptions {
  LmOptions lm;
  std::size_t min_rows = 8;
  double min_span = 2.0 * std::numbers::pi * 2e9;  // rad/s
};

// Parameters alpha, lorentz_center, lorentz_fwhm, lorentz_weight. Residuals
// are relative to the data, divided by rel_err_gamma1 / 1.96 when every row
// carries one.
FitResult fit_gamma1(const RateDataset& rates, const Gamma1FitOptions& opt = {});

struct DephasingSelection {
  std::vector<std::size_t> rows;  // indices into the dataset
  std::vector<double> slopes;     // |d omega01 / d flux| per selected row
  std::vector<std::pair<std::size_t, std::string>> excluded;  // index, reason
};

// Rows with rel_err_gamma_phi < max_rel_err, gamma_phi > 0 (>= 0 with
// allow_zero), known flux and a nonzero flux slope.
DephasingSelection select_dephasing_rows(const RateDataset& rates,
                                         const physics::TransmonParams& transmon,
                                         double max_rel_err, bool allow_zero = false);

struct PowerFitOptions {
  LmOptions lm;
  double max_rel_err = 0.33;
  double min_slope_ratio = 10.0;  // max / min flux slope among used rows
};

// log gamma_phi = log_a + eta log |slope|. Parameters log_a, eta.
FitResult fit_gamma_phi_power(const RateDataset& rates, const physics::TransmonParams& transmon,
                              const PowerFitOptions& opt = {});

struct OuFitOptions {
  LmOptions lm;
  double max_rel_err = 0.33;
  double min_slope_ratio = 2.0;
};

// Parameters sigma (Phi_0) and kappa (rad/s). derived["kappa_upper95"] is the
// one-sided 95% upper bound on kappa; derived["kappa_zero_consistent"] is 1
// when the two-sided interval reaches 0.
FitResult fit_ou(const RateDataset& rates, const physics::TransmonParams& transmon,
                 const OuFitOptions& opt = {});

// Pointwise delta-method band of a fitted curve.
struct BandPoint {
  double x, value, lower, upper;
};
std::vector<BandPoint> model_band(const FitResult& fit,
                                  const std::function<double(const Eigen::VectorXd&, double)>& f,
                                  const std::vector<double>& xs);

}  // namespace mzq
