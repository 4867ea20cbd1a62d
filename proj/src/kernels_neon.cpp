// NEON variants, 2-wide f64 (AArch64 only; float64x2_t needs A64).

#include "anlg/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace anlg::kern {
namespace neon {

void axpy(std::size_t n, double a, const double* x, double* y) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sum(std::size_t n, const double* x) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double vmax(std::size_t n, const double* x) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= 2) {
        float64x2_t vm = vld1q_f64(x);
        for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(x + i));
        m = vmaxvq_f64(vm);
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

void scale(std::size_t n, double a, double* x) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void add(std::size_t n, const double* x, double* y) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

}  // namespace neon

extern const KernelTable kNeonTable;
const KernelTable kNeonTable{neon::axpy, neon::dot, neon::sum,
                             neon::vmax, neon::scale, neon::add};

}  // namespace anlg::kern

#endif  // __aarch64__
