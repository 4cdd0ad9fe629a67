#include <cstdlib>
#include <string>

#include "mzq/error.hpp"
#include "mzq/kernels.hpp"

namespace mzq::kernels {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool env_forces_scalar() {
  const char* v = std::getenv("MZQ_SIMD");
  return v != nullptr && std::string(v) == "scalar";
}

Isa usable(Isa requested) {
  if (requested == Isa::Avx2 && !avx2_available()) return Isa::Scalar;
  return requested;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool avx2_available() noexcept {
#if defined(MZQ_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() noexcept {
  static const Isa isa = (!env_forces_scalar() && avx2_available()) ? Isa::Avx2 : Isa::Scalar;
  return isa;
}

void qubit_reflection(std::span<const double> omega, const LineshapeParams& p,
                      std::span<double> re, std::span<double> im, Isa isa) {
  if (re.size() < omega.size() || im.size() < omega.size()) {
    fail(ErrorCode::InvalidArgument, "qubit_reflection output spans are too short");
  }
#if defined(MZQ_HAVE_AVX2)
  if (usable(isa) == Isa::Avx2) {
    detail::qubit_reflection_avx2(omega.data(), omega.size(), p, re.data(), im.data());
    return;
  }
#else
  (void)usable;
  (void)isa;
#endif
  detail::qubit_reflection_scalar(omega.data(), omega.size(), p, re.data(), im.data());
}

OuEnsemble::OuEnsemble(std::size_t lanes, std::uint64_t seed) {
  const std::size_t padded = (lanes + kLaneBlock - 1) / kLaneBlock * kLaneBlock;
  x_.assign(padded, 0.0);
  phase_.assign(padded, 0.0);
  for (auto& s : s_) s.resize(padded);
  std::uint64_t sm = seed;
  for (std::size_t lane = 0; lane < padded; ++lane) {
    for (auto& s : s_) s[lane] = splitmix64(sm);
  }
}

void OuEnsemble::advance(const OuStep& step, std::size_t n_steps, Isa isa) {
  const detail::OuLanesView view{x_.data(),     phase_.data(),  s_[0].data(), s_[1].data(),
                                 s_[2].data(), s_[3].data(), x_.size()};
#if defined(MZQ_HAVE_AVX2)
  if (usable(isa) == Isa::Avx2) {
    detail::ou_advance_avx2(view, step, n_steps);
    return;
  }
#else
  (void)isa;
#endif
  detail::ou_advance_scalar(view, step, n_steps);
}

}  // namespace mzq::kernels
