#include "ctmdp/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ctmdp::kernels {

namespace {

struct Vtbl {
  const char* name;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale_add)(double, const double*, const double*, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*min_update)(double*, int*, const double*, int, std::size_t);
  void (*hjb_interior)(const double*, const double*, const double*, const double*,
                       double, double, double, double*, std::size_t);
};

constexpr Vtbl kScalar = {
    "scalar",       scalar::dot,   scalar::axpy,       scalar::scale_add,
    scalar::sum,    scalar::sumsq, scalar::min_update, scalar::hjb_interior,
};

#if CTMDP_HAVE_AVX2
constexpr Vtbl kAvx2 = {
    "avx2",       avx2::dot,   avx2::axpy,       avx2::scale_add,
    avx2::sum,    avx2::sumsq, avx2::min_update, avx2::hjb_interior,
};
#endif

bool cpu_has_avx2() {
#if CTMDP_HAVE_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Vtbl* resolve(Backend b) {
#if CTMDP_HAVE_AVX2
  switch (b) {
    case Backend::Scalar:
      return &kScalar;
    case Backend::Avx2:
      return cpu_has_avx2() ? &kAvx2 : &kScalar;
    case Backend::Auto:
    default: {
      if (const char* env = std::getenv("CTMDP_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &kScalar;
        if (std::strcmp(env, "avx2") == 0)
          return cpu_has_avx2() ? &kAvx2 : &kScalar;
      }
      return cpu_has_avx2() ? &kAvx2 : &kScalar;
    }
  }
#else
  (void)b;
  return &kScalar;
#endif
}

const Vtbl*& active_slot() {
  static const Vtbl* tbl = resolve(Backend::Auto);
  return tbl;
}

}  // namespace

const char* active_name() { return active_slot()->name; }

void force_backend(Backend b) { active_slot() = resolve(b); }

bool avx2_available() { return cpu_has_avx2(); }

double dot(const double* a, const double* b, std::size_t n) {
  return active_slot()->dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active_slot()->axpy(alpha, x, y, n);
}
void scale_add(double alpha, const double* x, const double* y, double* out,
               std::size_t n) {
  active_slot()->scale_add(alpha, x, y, out, n);
}
double sum(const double* x, std::size_t n) { return active_slot()->sum(x, n); }
double sumsq(const double* x, std::size_t n) {
  return active_slot()->sumsq(x, n);
}
void min_update(double* best, int* arg, const double* cand, int idx,
                std::size_t n) {
  active_slot()->min_update(best, arg, cand, idx, n);
}
void hjb_interior(const double* v, const double* drift, const double* half_sig2,
                  const double* rhs, double dt, double inv_dx, double inv_dx2,
                  double* out, std::size_t n) {
  active_slot()->hjb_interior(v, drift, half_sig2, rhs, dt, inv_dx, inv_dx2,
                              out, n);
}

}  // namespace ctmdp::kernels
