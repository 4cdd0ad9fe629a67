#pragma once

// Per-spectrum parameter extraction and lineshape regime classification.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mzq/components.hpp"
#include "mzq/lm.hpp"

namespace mzq {

struct FitResult {
  std::vector<std::string> names;  // covariance ordering
  std::map<std::string, double> params;
  std::map<std::string, double> ci95;     // half-widths
  std::map<std::string, double> rel_err;  // ci95 / |estimate|
  std::map<std::string, double> derived;  // extra scalars, e.g. one-sided bounds
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::size_t dof = 0;
  Eigen::MatrixXd covariance;
  std::vector<double> sse_history;

  double param(const std::string& name) const;
  double ci(const std::string& name) const;
  double rel(const std::string& name) const;
};

// Fills params, ci95, rel_err and covariance from an LM solution. `values`
// are the reported estimates and `to_reported` the Jacobian of the map from
// solver parameters to reported ones (identity when they coincide).
FitResult make_fit_result(const std::vector<std::string>& names, const LmResult& lm,
                          const Eigen::VectorXd& values, const Eigen::MatrixXd& to_reported);

nlohmann::ordered_json to_json(const FitResult& r);

struct QualityThresholds {
  double omega01 = 0.02;  // max rel_err of the transition frequency
  double rates = 0.33;    // max rel_err of gamma1 / gamma_phi
};

enum class SpectrumInit { Auto, Given };

struct SpectrumFitOptions {
  LmOptions lm;
  SpectrumInit init = SpectrumInit::Auto;
  // Throw NoConvergence instead of returning an unconverged result.
  bool require_convergence = true;
};

// Fit parameters: omega01, gamma1, gamma_phi, r0 (rad/s and amplitude),
// cal_re, cal_im (complex scale) and cal_delay (s). The calibration factor is
// (cal_re + i cal_im) exp(-i cal_delay (omega - omega_c)) with omega_c the
// center of the trace window. The drive strength init.rabi is held fixed.
// Only cross paths (s12, s34) enter the objective.
FitResult fit_spectrum(const SpectrumTrace& trace, const CircuitSpec& spec_template,
                       const QubitScatterer& init, const SpectrumFitOptions& options = {});

// Cross-path model of a fitted result, on the trace grid.
SpectrumTrace fitted_model(const SpectrumTrace& trace, const CircuitSpec& spec_template,
                           const FitResult& fit, double rabi);

bool passes_quality(const FitResult& spectrum_fit, const QualityThresholds& q = {});

enum class RegimeLabel { PeakDip, Dip, DipPeak };
std::string_view to_string(RegimeLabel r) noexcept;

struct ResonanceFeature {
  std::size_t index = 0;      // grid index of the largest excursion
  std::size_t half_width = 0; // in grid points, >= 1
  double peak = 0.0;          // largest positive excursion near the feature
  double dip = 0.0;           // largest negative excursion, as a positive number
  std::size_t peak_index = 0;
  std::size_t dip_index = 0;
  double noise_floor = 0.0;
};

// Locates the resonance on the magnitude of `path` after removing a smooth
// background. Throws NoFeature when nothing stands out from the noise.
ResonanceFeature find_feature(const SpectrumTrace& trace, Path path);

// Uses s12, else s34, else the first recorded path.
RegimeLabel classify_regime(const SpectrumTrace& trace);

}  // namespace mzq
