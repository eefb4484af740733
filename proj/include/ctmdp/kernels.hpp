#pragma once

#include <cstddef>

// Data-parallel inner loops used by the semigroup, solver, and simulation
// code paths. Every kernel has a scalar reference implementation and an
// AVX2 variant; the dispatched entry points select one at startup (CPU
// probe, overridable via the CTMDP_KERNELS environment variable or
// force_backend()). The two variants are equivalence-tested against each
// other; callers that need bit-exact, order-fixed summation (generator
// diagonals, mixed totals) must not go through these entry points.

namespace ctmdp::kernels {

enum class Backend { Auto, Scalar, Avx2 };

// Name of the implementation currently behind the dispatched calls.
const char* active_name();
// Force a backend (tests). Backend::Avx2 on a machine without AVX2 falls
// back to scalar.
void force_backend(Backend b);
bool avx2_available();

double dot(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// out = alpha * x + y
void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
// Where cand[i] < best[i]: best[i] = cand[i], arg[i] = idx. Strict
// comparison keeps the earliest index on ties.
void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n);
// Fused explicit HJB stencil on the interior points i in [1, n-2]:
//   out[i] = v[i] + dt * (rhs[i]
//            + max(drift[i],0) * (v[i+1]-v[i]) * inv_dx
//            + min(drift[i],0) * (v[i]-v[i-1]) * inv_dx
//            + half_sig2[i] * (v[i+1]-2v[i]+v[i-1]) * inv_dx2)
// Boundary entries out[0], out[n-1] are left untouched.
void hjb_interior(const double* v, const double* drift,
                  const double* half_sig2, const double* rhs, double dt,
                  double inv_dx, double inv_dx2, double* out, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n);
void hjb_interior(const double* v, const double* drift,
                  const double* half_sig2, const double* rhs, double dt,
                  double inv_dx, double inv_dx2, double* out, std::size_t n);
}  // namespace scalar

#if CTMDP_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n);
void hjb_interior(const double* v, const double* drift,
                  const double* half_sig2, const double* rhs, double dt,
                  double inv_dx, double inv_dx2, double* out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace ctmdp::kernels
