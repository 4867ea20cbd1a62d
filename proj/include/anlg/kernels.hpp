#pragma once

#include <cstddef>
#include <string>

// Dense f64 primitives behind a runtime-dispatched backend table.
// Scalar is the reference; AVX2/NEON variants must agree with it to
// tight tolerance (see tests/test_kernels.cpp).

namespace anlg::kern {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    // y += a * x
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    double (*dot)(std::size_t n, const double* x, const double* y);
    double (*sum)(std::size_t n, const double* x);
    // n >= 1
    double (*vmax)(std::size_t n, const double* x);
    // x *= a
    void (*scale)(std::size_t n, double a, double* x);
    // y += x
    void (*add)(std::size_t n, const double* x, double* y);
};

const char* backend_name(Backend b);
bool backend_available(Backend b);

// Active backend. Defaults to the best available; the ANLG_KERNEL_BACKEND
// environment variable (scalar|avx2|neon) overrides at startup.
Backend backend();
void set_backend(Backend b);  // throws std::runtime_error if unavailable

// Direct access to one backend's table (for equivalence tests).
const KernelTable& table(Backend b);

extern const KernelTable* g_active;

inline void axpy(std::size_t n, double a, const double* x, double* y) { g_active->axpy(n, a, x, y); }
inline double dot(std::size_t n, const double* x, const double* y) { return g_active->dot(n, x, y); }
inline double sum(std::size_t n, const double* x) { return g_active->sum(n, x); }
inline double vmax(std::size_t n, const double* x) { return g_active->vmax(n, x); }
inline void scale(std::size_t n, double a, double* x) { g_active->scale(n, a, x); }
inline void add(std::size_t n, const double* x, double* y) { g_active->add(n, x, y); }

}  // namespace anlg::kern
