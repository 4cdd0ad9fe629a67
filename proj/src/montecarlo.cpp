#include "mzq/montecarlo.hpp"

#include <cmath>
#include <random>

#include "mzq/error.hpp"

namespace mzq {

std::vector<double> simulate_ou_coherence(double v, double kappa, std::span<const double> taus,
                                          const OuSimulationOptions& opt) {
  if (!(v > 0.0) || !(kappa >= 0.0) || !std::isfinite(v) || !std::isfinite(kappa)) {
    fail(ErrorCode::InvalidArgument, "simulate_ou_coherence needs v > 0 and kappa >= 0");
  }
  if (opt.trajectories == 0) fail(ErrorCode::InvalidArgument, "need at least one trajectory");

  kernels::OuEnsemble ens(opt.trajectories, opt.seed);
  std::mt19937_64 rng(opt.seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::normal_distribution<double> normal;
  for (double& x : ens.x()) x = normal(rng);

  double dt_max = opt.v_dt / v;
  if (kappa > 0.0) dt_max = std::min(dt_max, opt.kappa_dt / kappa);

  std::vector<double> out;
  out.reserve(taus.size());
  double t = 0.0;
  for (double tau : taus) {
    if (!(tau >= t)) fail(ErrorCode::InvalidArgument, "taus must be non-negative and sorted");
    const double span = tau - t;
    if (span > 0.0) {
      const auto n = static_cast<std::size_t>(std::ceil(span / dt_max));
      const double dt = span / static_cast<double>(n);
      const double decay = std::exp(-kappa * dt);
      const kernels::OuStep step{decay, std::sqrt(-std::expm1(-2.0 * kappa * dt)), v * dt};
      ens.advance(step, n, opt.isa);
      t = tau;
    }
    double sum = 0.0;
    const auto phase = ens.phase();
    for (std::size_t i = 0; i < opt.trajectories; ++i) sum += std::cos(phase[i]);
    out.push_back(sum / static_cast<double>(opt.trajectories));
  }
  return out;
}

}  // namespace mzq
