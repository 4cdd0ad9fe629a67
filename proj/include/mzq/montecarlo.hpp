#pragma once

// Trajectory estimate of the OU dephasing envelope <exp(i int_0^tau dw dt)>.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mzq/kernels.hpp"

namespace mzq {

struct OuSimulationOptions {
  std::size_t trajectories = 100000;
  double kappa_dt = 0.1;  // dt <= kappa_dt / kappa
  double v_dt = 0.005;    // dt <= v_dt / v
  std::uint64_t seed = 1;
  kernels::Isa isa = kernels::active_isa();
};

// Frequency noise dw(t) = v x(t) with x a stationary unit-variance OU lane of
// rate kappa. `taus` must be non-negative and non-decreasing. Returns the
// ensemble mean of cos(phase) at every tau.
std::vector<double> simulate_ou_coherence(double v, double kappa, std::span<const double> taus,
                                          const OuSimulationOptions& opt = {});

}  // namespace mzq
