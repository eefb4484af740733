#include "ctmdp/kernels.hpp"

#include <algorithm>

namespace ctmdp::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + y[i];
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
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
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double fwd = (v[i + 1] - v[i]) * inv_dx;
    const double bwd = (v[i] - v[i - 1]) * inv_dx;
    const double bp = std::max(drift[i], 0.0);
    const double bm = std::min(drift[i], 0.0);
    const double second = half_sig2[i] * (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2;
    out[i] = v[i] + dt * (rhs[i] + bp * fwd + bm * bwd + second);
  }
}

}  // namespace ctmdp::kernels::scalar
