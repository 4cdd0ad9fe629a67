#include <immintrin.h>

#include <cstdint>

#include "mzq/kernels.hpp"

namespace mzq::kernels::detail {

namespace {

inline __m256i rotl45(__m256i x) {
  return _mm256_or_si256(_mm256_slli_epi64(x, 45), _mm256_srli_epi64(x, 64 - 45));
}

}  // namespace

void qubit_reflection_avx2(const double* omega, std::size_t n, const LineshapeParams& p,
                           double* re, double* im) {
  const __m256d w01 = _mm256_set1_pd(p.omega01);
  const __m256d g2 = _mm256_set1_pd(p.gamma2);
  const __m256d r0 = _mm256_set1_pd(p.r0);
  const __m256d sat = _mm256_set1_pd(p.saturation);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d neg = _mm256_set1_pd(-0.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w = _mm256_loadu_pd(omega + i);
    const __m256d x = _mm256_div_pd(_mm256_sub_pd(w, w01), g2);
    const __m256d den = _mm256_add_pd(_mm256_add_pd(one, _mm256_mul_pd(x, x)), sat);
    _mm256_storeu_pd(re + i, _mm256_div_pd(r0, den));
    _mm256_storeu_pd(im + i, _mm256_xor_pd(_mm256_div_pd(_mm256_mul_pd(r0, x), den), neg));
  }
  if (i < n) qubit_reflection_scalar(omega + i, n - i, p, re + i, im + i);
}

void ou_advance_avx2(const OuLanesView& v, const OuStep& step, std::size_t n_steps) {
  const __m256d decay = _mm256_set1_pd(step.decay);
  const __m256d kick = _mm256_set1_pd(step.kick);
  const __m256d gain = _mm256_set1_pd(step.phase_gain);
  const __m256i sign = _mm256_set1_epi64x(static_cast<long long>(0x8000000000000000ULL));
  const __m256i one = _mm256_castpd_si256(_mm256_set1_pd(1.0));

  std::size_t lane = 0;
  for (; lane + 4 <= v.count; lane += 4) {
    __m256d x = _mm256_loadu_pd(v.x + lane);
    __m256d phase = _mm256_loadu_pd(v.phase + lane);
    __m256i s0 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(v.s0 + lane));
    __m256i s1 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(v.s1 + lane));
    __m256i s2 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(v.s2 + lane));
    __m256i s3 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(v.s3 + lane));
    for (std::size_t k = 0; k < n_steps; ++k) {
      const __m256i out = _mm256_add_epi64(s0, s3);
      const __m256i t = _mm256_slli_epi64(s1, 17);
      s2 = _mm256_xor_si256(s2, s0);
      s3 = _mm256_xor_si256(s3, s1);
      s1 = _mm256_xor_si256(s1, s2);
      s0 = _mm256_xor_si256(s0, s3);
      s2 = _mm256_xor_si256(s2, t);
      s3 = rotl45(s3);

      const __m256d xi = _mm256_castsi256_pd(_mm256_xor_si256(one, _mm256_and_si256(out, sign)));
      phase = _mm256_add_pd(phase, _mm256_mul_pd(gain, x));
      x = _mm256_add_pd(_mm256_mul_pd(decay, x), _mm256_mul_pd(kick, xi));
    }
    _mm256_storeu_pd(v.x + lane, x);
    _mm256_storeu_pd(v.phase + lane, phase);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(v.s0 + lane), s0);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(v.s1 + lane), s1);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(v.s2 + lane), s2);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(v.s3 + lane), s3);
  }
  if (lane < v.count) {
    OuLanesView tail{v.x + lane, v.phase + lane, v.s0 + lane, v.s1 + lane,
                     v.s2 + lane, v.s3 + lane, v.count - lane};
    ou_advance_scalar(tail, step, n_steps);
  }
}

}  // namespace mzq::kernels::detail
