// Compiled with -mavx2 -mfma; only called after a CPUID check.
#include <immintrin.h>

#include <cstring>

#include "groupmatch/kernels.hpp"

namespace groupmatch::kernels::avx2 {
namespace {

inline __m256d load_mask4(const std::uint8_t* mask) {
  std::int32_t bytes;
  std::memcpy(&bytes, mask, sizeof(bytes));
  return _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(bytes)));
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

MaskedSum masked_sum(const double* x, const std::uint8_t* mask, std::size_t n) noexcept {
  __m256d count0 = _mm256_setzero_pd(), count1 = _mm256_setzero_pd();
  __m256d sum0 = _mm256_setzero_pd(), sum1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d m0 = load_mask4(mask + i);
    const __m256d m1 = load_mask4(mask + i + 4);
    count0 = _mm256_add_pd(count0, m0);
    count1 = _mm256_add_pd(count1, m1);
    sum0 = _mm256_fmadd_pd(m0, _mm256_loadu_pd(x + i), sum0);
    sum1 = _mm256_fmadd_pd(m1, _mm256_loadu_pd(x + i + 4), sum1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d m0 = load_mask4(mask + i);
    count0 = _mm256_add_pd(count0, m0);
    sum0 = _mm256_fmadd_pd(m0, _mm256_loadu_pd(x + i), sum0);
  }
  MaskedSum out{hsum(_mm256_add_pd(count0, count1)), hsum(_mm256_add_pd(sum0, sum1))};
  for (; i < n; ++i) {
    const double m = mask[i];
    out.count += m;
    out.sum += m * x[i];
  }
  return out;
}

double masked_sq_dev(const double* x, const std::uint8_t* mask, std::size_t n, double center) noexcept {
  const __m256d c = _mm256_set1_pd(center);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), c), load_mask4(mask + i));
    const __m256d d1 = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i + 4), c), load_mask4(mask + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), c), load_mask4(mask + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = (x[i] - center) * static_cast<double>(mask[i]);
    acc += d * d;
  }
  return acc;
}

double ad_inner_sum(const double* l, const double* b, const double* m, std::size_t n, double total,
                    double sample_size) noexcept {
  const __m256d vn = _mm256_set1_pd(total);
  const __m256d vs = _mm256_set1_pd(sample_size);
  const __m256d quarter_n = _mm256_set1_pd(total * 0.25);
  const __m256d inv_n = _mm256_set1_pd(1.0 / total);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d vl = _mm256_loadu_pd(l + j);
    const __m256d vb = _mm256_loadu_pd(b + j);
    const __m256d vm = _mm256_loadu_pd(m + j);
    const __m256d diff = _mm256_fmsub_pd(vn, vm, _mm256_mul_pd(vs, vb));
    const __m256d denom = _mm256_fmsub_pd(vb, _mm256_sub_pd(vn, vb), _mm256_mul_pd(quarter_n, vl));
    const __m256d num = _mm256_mul_pd(_mm256_mul_pd(vl, inv_n), _mm256_mul_pd(diff, diff));
    acc = _mm256_add_pd(acc, _mm256_div_pd(num, denom));
  }
  double out = hsum(acc);
  for (; j < n; ++j) {
    const double diff = total * m[j] - sample_size * b[j];
    const double denom = b[j] * (total - b[j]) - total * l[j] * 0.25;
    out += l[j] / total * diff * diff / denom;
  }
  return out;
}

}  // namespace groupmatch::kernels::avx2
