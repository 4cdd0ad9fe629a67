#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and
// an AVX2 version; the AVX2 path is chosen at runtime when the CPU supports
// it. Both variants perform the same IEEE operations in the same order (no
// FMA contraction), so their outputs are bit-identical.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mzq::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

// True when the AVX2 variants were compiled in and the CPU can run them.
bool avx2_available() noexcept;

// Best available ISA. Setting MZQ_SIMD=scalar in the environment forces the
// scalar path.
Isa active_isa() noexcept;

// Two-level scatterer reflection r(w) = r0 (1 - i x) / (1 + x^2 + s), with
// x = (w - omega01) / gamma2 and s = rabi^2 / (gamma1 gamma2).
struct LineshapeParams {
  double omega01;
  double gamma2;
  double r0;
  double saturation;
};

void qubit_reflection(std::span<const double> omega, const LineshapeParams& p,
                      std::span<double> re, std::span<double> im, Isa isa);

inline void qubit_reflection(std::span<const double> omega, const LineshapeParams& p,
                             std::span<double> re, std::span<double> im) {
  qubit_reflection(omega, p, re, im, active_isa());
}

// Ensemble of unit-variance Ornstein-Uhlenbeck lanes x with accumulated
// phase. One weak Euler-Maruyama step per lane:
//
//   phase += phase_gain * x
//   x      = decay * x + kick * xi,   xi = +-1 with equal probability
//
// xi comes from a per-lane xoshiro256+ stream (sign bit of the output).
// Lane count is padded to a multiple of kLaneBlock.
struct OuStep {
  double decay;
  double kick;
  double phase_gain;
};

class OuEnsemble {
 public:
  static constexpr std::size_t kLaneBlock = 4;

  OuEnsemble(std::size_t lanes, std::uint64_t seed);

  std::size_t lanes() const { return x_.size(); }
  std::span<double> x() { return x_; }
  std::span<const double> x() const { return x_; }
  std::span<double> phase() { return phase_; }
  std::span<const double> phase() const { return phase_; }

  void advance(const OuStep& step, std::size_t n_steps, Isa isa);
  void advance(const OuStep& step, std::size_t n_steps) { advance(step, n_steps, active_isa()); }

  // RNG state, structure-of-arrays: state()[k][lane].
  const std::array<std::vector<std::uint64_t>, 4>& state() const { return s_; }

 private:
  std::vector<double> x_;
  std::vector<double> phase_;
  std::array<std::vector<std::uint64_t>, 4> s_;
};

namespace detail {

struct OuLanesView {
  double* x;
  double* phase;
  std::uint64_t* s0;
  std::uint64_t* s1;
  std::uint64_t* s2;
  std::uint64_t* s3;
  std::size_t count;
};

void qubit_reflection_scalar(const double* omega, std::size_t n, const LineshapeParams& p,
                             double* re, double* im);
void ou_advance_scalar(const OuLanesView& v, const OuStep& step, std::size_t n_steps);

#if defined(MZQ_HAVE_AVX2)
void qubit_reflection_avx2(const double* omega, std::size_t n, const LineshapeParams& p,
                           double* re, double* im);
void ou_advance_avx2(const OuLanesView& v, const OuStep& step, std::size_t n_steps);
#endif

}  // namespace detail

}  // namespace mzq::kernels
