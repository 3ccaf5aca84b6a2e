// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "photonlock/kernels.hpp"

namespace photonlock::kernels {
namespace {

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

void port_probabilities_avx2(std::span<const double> cos_phi, std::span<const double> sin_phi,
                             const PortCoefficients& k, std::span<double> p_c,
                             std::span<double> p_d, std::span<double> p_abs) {
  const std::size_t n = cos_phi.size();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d c0 = _mm256_set1_pd(k.c0), cc = _mm256_set1_pd(k.c_cos), cs = _mm256_set1_pd(k.c_sin);
  const __m256d d0 = _mm256_set1_pd(k.d0), dc = _mm256_set1_pd(k.d_cos), ds = _mm256_set1_pd(k.d_sin);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d co = _mm256_loadu_pd(cos_phi.data() + i);
    const __m256d si = _mm256_loadu_pd(sin_phi.data() + i);
    const __m256d c = _mm256_fmadd_pd(cs, si, _mm256_fmadd_pd(cc, co, c0));
    const __m256d d = _mm256_fmadd_pd(ds, si, _mm256_fmadd_pd(dc, co, d0));
    _mm256_storeu_pd(p_c.data() + i, c);
    _mm256_storeu_pd(p_d.data() + i, d);
    _mm256_storeu_pd(p_abs.data() + i, _mm256_sub_pd(_mm256_sub_pd(one, c), d));
  }
  for (; i < n; ++i) {
    const double c = k.c0 + k.c_cos * cos_phi[i] + k.c_sin * sin_phi[i];
    const double d = k.d0 + k.d_cos * cos_phi[i] + k.d_sin * sin_phi[i];
    p_c[i] = c;
    p_d[i] = d;
    p_abs[i] = (1.0 - c) - d;
  }
}

PowerSums power_sums_avx2(std::span<const double> x, double center) {
  const std::size_t n = x.size();
  const __m256d mid = _mm256_set1_pd(center);
  __m256d a1 = _mm256_setzero_pd(), a2 = a1, a3 = a1, a4 = a1;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), mid);
    const __m256d d2 = _mm256_mul_pd(d, d);
    a1 = _mm256_add_pd(a1, d);
    a2 = _mm256_add_pd(a2, d2);
    a3 = _mm256_fmadd_pd(d2, d, a3);
    a4 = _mm256_fmadd_pd(d2, d2, a4);
  }
  PowerSums s;
  s.count = n;
  s.s1 = horizontal_sum(a1);
  s.s2 = horizontal_sum(a2);
  s.s3 = horizontal_sum(a3);
  s.s4 = horizontal_sum(a4);
  for (; i < n; ++i) {
    const double d = x[i] - center;
    const double d2 = d * d;
    s.s1 += d;
    s.s2 += d2;
    s.s3 += d2 * d;
    s.s4 += d2 * d2;
  }
  return s;
}

void apply_window_avx2(std::span<const double> x, double offset, std::span<const double> window,
                       std::span<double> out) {
  const std::size_t n = x.size();
  const __m256d off = _mm256_set1_pd(offset);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), off);
    _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(v, _mm256_loadu_pd(window.data() + i)));
  }
  for (; i < n; ++i) out[i] = (x[i] - offset) * window[i];
}

void accumulate_power_avx2(std::span<const double> interleaved, std::span<double> acc) {
  const std::size_t n = acc.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    // Two loads hold (re0 im0 re1 im1) and (re2 im2 re3 im3).
    const __m256d lo = _mm256_loadu_pd(interleaved.data() + 2 * k);
    const __m256d hi = _mm256_loadu_pd(interleaved.data() + 2 * k + 4);
    const __m256d sq_lo = _mm256_mul_pd(lo, lo);
    const __m256d sq_hi = _mm256_mul_pd(hi, hi);
    // hadd gives (p0 p2 p1 p3); permute back to (p0 p1 p2 p3).
    const __m256d pairs = _mm256_hadd_pd(sq_lo, sq_hi);
    const __m256d ordered = _mm256_permute4x64_pd(pairs, 0b11011000);
    _mm256_storeu_pd(acc.data() + k, _mm256_add_pd(_mm256_loadu_pd(acc.data() + k), ordered));
  }
  for (; k < n; ++k) {
    const double re = interleaved[2 * k];
    const double im = interleaved[2 * k + 1];
    acc[k] += re * re + im * im;
  }
}

}  // namespace

namespace detail {
const KernelTable avx2_table{Backend::avx2, &port_probabilities_avx2, &power_sums_avx2,
                             &apply_window_avx2, &accumulate_power_avx2};
}  // namespace detail

}  // namespace photonlock::kernels
