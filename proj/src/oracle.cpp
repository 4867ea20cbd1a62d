#include "anlg/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace anlg::oracle {

double objective(const lm::Parameters& params, const TokenSeq& h, const TokenSeq& o1,
                 const TokenSeq& o2) {
    TokenSeq o1h = o1;
    o1h.insert(o1h.end(), h.begin(), h.end());
    return lm::log_prob(params, h, o1) + lm::log_prob(params, o2, o1h);
}

BruteForceResult brute_force_best(const lm::Parameters& params, const TokenSeq& o1,
                                  const TokenSeq& o2, int max_len,
                                  const std::vector<int>& vocab_subset) {
    if (max_len < 1) throw std::invalid_argument("brute_force_best: max_len must be >= 1");
    if (vocab_subset.empty()) throw std::invalid_argument("brute_force_best: empty vocab subset");

    const double s = static_cast<double>(vocab_subset.size());
    double budget = 0.0, pw = 1.0;
    for (int l = 1; l <= max_len; ++l) {
        pw *= s;
        budget += pw;
        if (budget > 1e6) {
            throw std::runtime_error(
                "brute_force_best: enumeration budget exceeded (needs about " +
                std::to_string(static_cast<std::uint64_t>(budget)) + " > 1000000 candidates)");
        }
    }

    std::vector<int> subset = vocab_subset;
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    const int k = static_cast<int>(subset.size());

    BruteForceResult best;
    bool have = false;
    // lengths ascending, ids lexicographic: the first strict improvement wins,
    // which realizes the documented tie rule independent of enumeration order
    for (int len = 1; len <= max_len; ++len) {
        std::vector<int> idx(len, 0);
        TokenSeq h(len);
        for (;;) {
            for (int i = 0; i < len; ++i) h[i] = subset[idx[i]];
            const double obj = objective(params, h, o1, o2);
            ++best.evaluated;
            if (!have || obj > best.objective ||
                (obj == best.objective &&
                 std::lexicographical_compare(h.begin(), h.end(), best.best.begin(),
                                              best.best.end()))) {
                best.best = h;
                best.objective = obj;
                have = true;
            }
            int pos = len - 1;
            while (pos >= 0 && ++idx[pos] == k) idx[pos--] = 0;
            if (pos < 0) break;
        }
    }
    return best;
}

}  // namespace anlg::oracle
