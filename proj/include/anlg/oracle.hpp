#pragma once

#include <cstdint>
#include <vector>

#include "anlg/model.hpp"
#include "anlg/types.hpp"

// Brute-force ground truth for tiny configurations: exact enumeration of the
// ranking objective so the gradient-based decoders can be audited against the
// true optimum.

namespace anlg::oracle {

// log P(h | o1) + log P(o2 | o1, h), consistent with lm::log_prob.
double objective(const lm::Parameters& params, const TokenSeq& h, const TokenSeq& o1,
                 const TokenSeq& o2);

struct BruteForceResult {
    TokenSeq best;
    double objective = 0.0;
    std::uint64_t evaluated = 0;
};

// Enumerates every hypothesis over vocab_subset with length 1..max_len and
// returns the objective argmax; ties break lexicographically by token ids.
// Refuses when the candidate count exceeds 10^6.
BruteForceResult brute_force_best(const lm::Parameters& params, const TokenSeq& o1,
                                  const TokenSeq& o2, int max_len,
                                  const std::vector<int>& vocab_subset);

}  // namespace anlg::oracle
