#include "ctmdp/kernels.hpp"

#if CTMDP_HAVE_AVX2

#include <immintrin.h>

namespace ctmdp::kernels::avx2 {

namespace {

inline double hadd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hadd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = alpha * x[i] + y[i];
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  }
  double acc = hadd(acc0);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(xv, xv, acc0);
  }
  double acc = hadd(acc0);
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d bv = _mm256_loadu_pd(best + i);
    __m256d cv = _mm256_loadu_pd(cand + i);
    __m256d lt = _mm256_cmp_pd(cv, bv, _CMP_LT_OQ);
    int mask = _mm256_movemask_pd(lt);
    if (mask) {
      _mm256_storeu_pd(best + i, _mm256_blendv_pd(bv, cv, lt));
      for (int lane = 0; lane < 4; ++lane) {
        if (mask & (1 << lane)) arg[i + lane] = idx;
      }
    }
  }
  for (; i < n; ++i) {
    if (cand[i] < best[i]) {
      best[i] = cand[i];
      arg[i] = idx;
    }
  }
}

void hjb_interior(const double* v, const double* drift,
                  const double* half_sig2, const double* rhs, double dt,
                  double inv_dx, double inv_dx2, double* out, std::size_t n) {
  if (n < 3) return;
  const __m256d zero = _mm256_setzero_pd();
  const __m256d dtv = _mm256_set1_pd(dt);
  const __m256d idx = _mm256_set1_pd(inv_dx);
  const __m256d idx2 = _mm256_set1_pd(inv_dx2);
  std::size_t i = 1;
  for (; i + 4 <= n - 1; i += 4) {
    __m256d vm = _mm256_loadu_pd(v + i - 1);
    __m256d vc = _mm256_loadu_pd(v + i);
    __m256d vp = _mm256_loadu_pd(v + i + 1);
    __m256d fwd = _mm256_mul_pd(_mm256_sub_pd(vp, vc), idx);
    __m256d bwd = _mm256_mul_pd(_mm256_sub_pd(vc, vm), idx);
    __m256d dr = _mm256_loadu_pd(drift + i);
    __m256d bp = _mm256_max_pd(dr, zero);
    __m256d bm = _mm256_min_pd(dr, zero);
    __m256d lap = _mm256_add_pd(_mm256_sub_pd(vp, _mm256_add_pd(vc, vc)), vm);
    __m256d second = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(half_sig2 + i), lap), idx2);
    __m256d acc = _mm256_loadu_pd(rhs + i);
    acc = _mm256_fmadd_pd(bp, fwd, acc);
    acc = _mm256_fmadd_pd(bm, bwd, acc);
    acc = _mm256_add_pd(acc, second);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(dtv, acc, vc));
  }
  for (; i + 1 < n; ++i) {
    const double fwd = (v[i + 1] - v[i]) * inv_dx;
    const double bwd = (v[i] - v[i - 1]) * inv_dx;
    const double bp = drift[i] > 0.0 ? drift[i] : 0.0;
    const double bm = drift[i] < 0.0 ? drift[i] : 0.0;
    const double second = half_sig2[i] * (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2;
    out[i] = v[i] + dt * (rhs[i] + bp * fwd + bm * bwd + second);
  }
}

}  // namespace ctmdp::kernels::avx2

#endif  // CTMDP_HAVE_AVX2
