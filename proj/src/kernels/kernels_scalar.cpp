#include <bit>
#include <cstdint>

#include "mzq/kernels.hpp"

namespace mzq::kernels::detail {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void qubit_reflection_scalar(const double* omega, std::size_t n, const LineshapeParams& p,
                             double* re, double* im) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (omega[i] - p.omega01) / p.gamma2;
    const double den = (1.0 + x * x) + p.saturation;
    re[i] = p.r0 / den;
    im[i] = -((p.r0 * x) / den);
  }
}

void ou_advance_scalar(const OuLanesView& v, const OuStep& step, std::size_t n_steps) {
  constexpr std::uint64_t kSign = 0x8000000000000000ULL;
  const std::uint64_t one_bits = std::bit_cast<std::uint64_t>(1.0);
  for (std::size_t lane = 0; lane < v.count; ++lane) {
    double x = v.x[lane];
    double phase = v.phase[lane];
    std::uint64_t s0 = v.s0[lane], s1 = v.s1[lane], s2 = v.s2[lane], s3 = v.s3[lane];
    for (std::size_t k = 0; k < n_steps; ++k) {
      const std::uint64_t out = s0 + s3;
      const std::uint64_t t = s1 << 17;
      s2 ^= s0;
      s3 ^= s1;
      s1 ^= s2;
      s0 ^= s3;
      s2 ^= t;
      s3 = rotl(s3, 45);

      const double xi = std::bit_cast<double>(one_bits ^ (out & kSign));
      phase = phase + step.phase_gain * x;
      const double drift = step.decay * x;
      const double kick = step.kick * xi;
      x = drift + kick;
    }
    v.x[lane] = x;
    v.phase[lane] = phase;
    v.s0[lane] = s0;
    v.s1[lane] = s1;
    v.s2[lane] = s2;
    v.s3[lane] = s3;
  }
}

}  // namespace mzq::kernels::detail
