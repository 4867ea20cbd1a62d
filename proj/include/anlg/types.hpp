#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anlg {

using TokenSeq = std::vector<int>;
using Vec = std::vector<double>;

// Row-major f64 matrix.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// Per-position probability distributions over the vocabulary: the continuous
// relaxation that the gradient-based decoders optimize.
struct SoftSeq {
    int vocab = 0;
    Mat p;  // length x vocab

    SoftSeq() = default;
    SoftSeq(int length, int vocab_size) : vocab(vocab_size), p(length, vocab_size) {}

    int length() const { return p.rows; }
    double* row(int t) { return p.row(t); }
    const double* row(int t) const { return p.row(t); }

    static SoftSeq one_hot(int vocab_size, const TokenSeq& s);
    static SoftSeq uniform(int vocab_size, int length);

    // Each row must be a simplex: entries in [0,1], sum within tol of 1.
    void check_simplex(double tol = 1e-4) const;  // throws std::invalid_argument
};

}  // namespace anlg
