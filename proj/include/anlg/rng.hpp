#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace anlg {

// Deterministic RNG: mt19937_64 (sequence fixed by the standard) with
// explicit bit-to-double conversion and hand-rolled Box-Muller, so streams
// are reproducible across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // [0, n)
    int below(int n) {
        // rejection sampling keeps the distribution exact
        const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % static_cast<std::uint64_t>(n);
        std::uint64_t x = gen_();
        while (x >= bound) x = gen_();
        return static_cast<int>(x % static_cast<std::uint64_t>(n));
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(static_cast<int>(i)))]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace anlg
