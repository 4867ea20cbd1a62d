#include <doctest.h>

#include <cmath>
#include <vector>

#include "anlg/kernels.hpp"
#include "anlg/rng.hpp"

using namespace anlg;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    Rng rng(seed);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<kern::Backend> testable_backends() {
    std::vector<kern::Backend> out = {kern::Backend::Scalar};
    for (auto b : {kern::Backend::Avx2, kern::Backend::Neon}) {
        if (kern::backend_available(b)) out.push_back(b);
    }
    return out;
}

}  // namespace

TEST_CASE("every available backend matches the scalar reference") {
    const auto& ref = kern::table(kern::Backend::Scalar);
    // sizes straddle the vector width, including tails and the empty case
    const std::size_t sizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 64, 127, 257};
    for (auto b : testable_backends()) {
        const auto& t = kern::table(b);
        for (std::size_t n : sizes) {
            const auto x = random_vec(n, 1000 + n);
            const auto y = random_vec(n, 2000 + n);

            if (n > 0) {
                CHECK(t.dot(n, x.data(), y.data()) ==
                      doctest::Approx(ref.dot(n, x.data(), y.data())).epsilon(1e-12));
                CHECK(t.sum(n, x.data()) ==
                      doctest::Approx(ref.sum(n, x.data())).epsilon(1e-12));
                CHECK(t.vmax(n, x.data()) == ref.vmax(n, x.data()));
            }

            auto y1 = y, y2 = y;
            ref.axpy(n, 0.7, x.data(), y1.data());
            t.axpy(n, 0.7, x.data(), y2.data());
            for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

            auto s1 = x, s2 = x;
            ref.scale(n, -1.25, s1.data());
            t.scale(n, -1.25, s2.data());
            CHECK(s1 == s2);  // scale by a constant is exact

            auto a1 = y, a2 = y;
            ref.add(n, x.data(), a1.data());
            t.add(n, x.data(), a2.data());
            CHECK(a1 == a2);  // elementwise add is exact
        }
    }
}

TEST_CASE("scalar dot/sum agree with naive formulas") {
    const auto x = random_vec(33, 7);
    const auto y = random_vec(33, 8);
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        d += x[i] * y[i];
        s += x[i];
    }
    CHECK(kern::table(kern::Backend::Scalar).dot(x.size(), x.data(), y.data()) == doctest::Approx(d));
    CHECK(kern::table(kern::Backend::Scalar).sum(x.size(), x.data()) == doctest::Approx(s));
}

TEST_CASE("backend selection is sticky and reversible") {
    const kern::Backend before = kern::backend();
    kern::set_backend(kern::Backend::Scalar);
    CHECK(kern::backend() == kern::Backend::Scalar);
    const double x[3] = {1, 2, 3};
    CHECK(kern::sum(3, x) == 6.0);
    kern::set_backend(before);
    CHECK(kern::backend() == before);
}

TEST_CASE("unavailable backend is rejected") {
#if defined(__x86_64__)
    CHECK_THROWS(kern::set_backend(kern::Backend::Neon));
#else
    CHECK_THROWS(kern::set_backend(kern::Backend::Avx2));
#endif
}

#include "anlg/model.hpp"

TEST_CASE("model forward agrees across kernel backends") {
    if (!kern::backend_available(kern::Backend::Avx2) &&
        !kern::backend_available(kern::Backend::Neon)) {
        return;  // scalar-only machine
    }
    lm::ModelConfig cfg;
    cfg.vocab_size = 20;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.max_len = 32;
    lm::Parameters p = lm::zero_params(cfg);
    Rng rng(3);
    for (auto& a : lm::param_arrays(p)) {
        const bool gain = a.name.find("_g") != std::string::npos;
        for (std::size_t i = 0; i < a.count; ++i) a.data[i] = (gain ? 1.0 : 0.0) + 0.3 * rng.normal();
    }
    const TokenSeq s = {1, 5, 9, 12, 3};

    const kern::Backend before = kern::backend();
    kern::set_backend(kern::Backend::Scalar);
    const Mat scalar_logits = lm::forward_logits(p, s);
    const kern::Backend simd = kern::backend_available(kern::Backend::Avx2)
                                   ? kern::Backend::Avx2
                                   : kern::Backend::Neon;
    kern::set_backend(simd);
    const Mat simd_logits = lm::forward_logits(p, s);
    kern::set_backend(before);

    REQUIRE(scalar_logits.v.size() == simd_logits.v.size());
    for (std::size_t i = 0; i < scalar_logits.v.size(); ++i) {
        CHECK(scalar_logits.v[i] == doctest::Approx(simd_logits.v[i]).epsilon(1e-9));
    }
}
