#include "anlg/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace anlg::kern {

extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(__i386__)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;  // f64 NEON is baseline on A64
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return kScalarTable;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(__i386__)
            if (backend_available(Backend::Avx2)) return kAvx2Table;
#endif
            break;
        case Backend::Neon:
#if defined(__aarch64__)
            return kNeonTable;
#endif
            break;
    }
    throw std::runtime_error(std::string("kernel backend not available: ") + backend_name(b));
}

namespace {

Backend g_backend = Backend::Scalar;

Backend pick_default() {
    if (const char* env = std::getenv("ANLG_KERNEL_BACKEND")) {
        const std::string s(env);
        if (s == "scalar") return Backend::Scalar;
        if (s == "avx2") return Backend::Avx2;
        if (s == "neon") return Backend::Neon;
        throw std::runtime_error("ANLG_KERNEL_BACKEND must be scalar|avx2|neon, got: " + s);
    }
    if (backend_available(Backend::Avx2)) return Backend::Avx2;
    if (backend_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

struct Init {
    Init() {
        try {
            g_backend = pick_default();
            g_active = &table(g_backend);
        } catch (const std::exception& e) {
            // runs during static init; fail cleanly instead of std::terminate
            std::fputs(e.what(), stderr);
            std::fputc('\n', stderr);
            std::_Exit(2);
        }
    }
};

}  // namespace

const KernelTable* g_active = &kScalarTable;

static Init g_init;

Backend backend() { return g_backend; }

void set_backend(Backend b) {
    g_active = &table(b);  // throws if unavailable
    g_backend = b;
}

}  // namespace anlg::kern
