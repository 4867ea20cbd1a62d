#include "anlg/types.hpp"

#include <cmath>

namespace anlg {

SoftSeq SoftSeq::one_hot(int vocab_size, const TokenSeq& s) {
    SoftSeq out(static_cast<int>(s.size()), vocab_size);
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (s[t] < 0 || s[t] >= vocab_size) {
            throw std::invalid_argument("one_hot: token id " + std::to_string(s[t]) +
                                        " outside vocabulary of size " + std::to_string(vocab_size));
        }
        out.p.at(static_cast<int>(t), s[t]) = 1.0;
    }
    return out;
}

SoftSeq SoftSeq::uniform(int vocab_size, int length) {
    SoftSeq out(length, vocab_size);
    const double u = 1.0 / vocab_size;
    std::fill(out.p.v.begin(), out.p.v.end(), u);
    return out;
}

void SoftSeq::check_simplex(double tol) const {
    for (int t = 0; t < length(); ++t) {
        double s = 0.0;
        for (int i = 0; i < vocab; ++i) {
            const double x = p.at(t, i);
            if (!(x >= -tol && x <= 1.0 + tol) || !std::isfinite(x)) {
                throw std::invalid_argument("soft sequence row " + std::to_string(t) +
                                            " has entry outside [0,1]");
            }
            s += x;
        }
        if (std::fabs(s - 1.0) > tol) {
            throw std::invalid_argument("soft sequence row " + std::to_string(t) +
                                        " sums to " + std::to_string(s) + ", not 1");
        }
    }
}

}  // namespace anlg
