#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anlg/data.hpp"
#include "anlg/knowledge.hpp"
#include "anlg/model.hpp"
#include "anlg/training.hpp"
#include "anlg/types.hpp"
#include "anlg/vocab.hpp"

// Hypothesis generation. Supervised strategies (greedy / beam / top-p) decode
// from the encoded instance context. The two gradient-based strategies
// operate on raw token sequences with a continuous relaxation of the
// hypothesis:
//  - backprop-mix: initialize hypothesis logits autoregressively from o1,
//    repeatedly (a) descend the cross-entropy of the real o2 under the model,
//    (b) re-run the forward pass position by position and mix it into the
//    logits, discretizing a candidate per iteration; return the candidate
//    with the best ranking objective log P(h|o1) + log P(o2|o1,h).
//  - energy Langevin: treat generation as sampling from exp(-E) with
//    E = w_fluency * fluency + w_future * future-coherence, run noisy
//    projected gradient steps on the probability simplex, then map the soft
//    sequence to tokens with LM-guided top-k discretization.

namespace anlg::decode {

enum class Strategy { Greedy, Beam, TopP, Delorean, Cold };

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

enum class ColdInit { Uniform, Forward };

struct DecodeConfig {
    Strategy strategy = Strategy::Greedy;
    double temperature = 1.0;
    double top_p = 0.9;
    int beam_width = 5;
    int max_len = 8;  // hypothesis length budget T

    // backprop-mix decoding
    int delorean_iters = 10;     // K_d
    double delorean_step = 0.1;  // backward step size
    double delorean_mix = 0.5;   // mixing weight in [0,1]

    // energy Langevin decoding
    int cold_iters = 200;     // K_c
    double cold_step = 0.1;   // step size
    double noise_start = 1.0; // sigma_0, geometric schedule
    double noise_min = 0.01;  // sigma_min
    double w_fluency = 1.0;
    double w_future = 1.0;
    int top_k = 5;  // discretization guidance
    ColdInit cold_init = ColdInit::Forward;

    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

struct EnergyBreakdown {
    double total = 0.0;
    double fluency = 0.0;
    double future = 0.0;
};

struct TraceRow {
    int iteration = 0;
    double energy_total = 0.0;
    double energy_fluency = 0.0;
    double energy_future = 0.0;
    double objective = 0.0;  // ranking objective of the iteration's candidate
    std::string candidate_text;
};

struct DecodeResult {
    TokenSeq tokens;
    std::string text;
    double score = 0.0;  // length-normalized log-prob (supervised) or ranking objective
    EnergyBreakdown energy;       // gradient-based strategies only
    std::vector<TraceRow> trace;  // gradient-based strategies only
};

// ---------------------------------------------------------------------------
// Supervised decoding. Greedy/beam are deterministic; top-p is deterministic
// given cfg.seed. Generation stops at <eos> or after cfg.max_len tokens; ties
// always break toward the smallest token id.
DecodeResult decode_standard(const lm::Parameters& params, const Vocabulary& vocab,
                             const AbductiveInstance& inst, const DecodeConfig& cfg,
                             train::Variant variant = train::Variant::Base,
                             const KnowledgeBundle* knowledge = nullptr);

// ---------------------------------------------------------------------------
// Energy of a soft hypothesis between the observations:
//   fluency = per-position cross-entropy of soft_h against the model's
//             predictive distribution given o1 and the soft prefix;
//   future  = -log P(o2 | o1, soft_h).
EnergyBreakdown energy(const lm::Parameters& params, const SoftSeq& soft_h, const TokenSeq& o1,
                       const TokenSeq& o2, double w_fluency, double w_future);

// Energy plus its gradient with respect to the soft rows (T x V).
EnergyBreakdown energy_grad(const lm::Parameters& params, const SoftSeq& soft_h,
                            const TokenSeq& o1, const TokenSeq& o2, double w_fluency,
                            double w_future, Mat* grad);

// Euclidean projection of each row onto the probability simplex. Rows already
// on the simplex (within 1e-9) pass through unchanged.
void project_simplex_rows(Mat& rows);

// LM-guided discretization: position by position, restrict to the top-k
// tokens of the model's predictive distribution given [prefix; output so
// far], then pick the one with the most soft mass. k >= vocab degenerates to
// per-position argmax of soft_h; k == 1 is the greedy continuation.
TokenSeq discretize(const SoftSeq& soft_h, const lm::Parameters& params, const TokenSeq& prefix,
                    int k);

// ---------------------------------------------------------------------------
// Gradient-based decoders (unsupervised setting: params untrained or
// LM-pretrained). vocab, when given, is used to render candidate text.
DecodeResult decode_delorean(const lm::Parameters& params, const TokenSeq& o1, const TokenSeq& o2,
                             const DecodeConfig& cfg, const Vocabulary* vocab = nullptr);

DecodeResult decode_cold(const lm::Parameters& params, const TokenSeq& o1, const TokenSeq& o2,
                         const DecodeConfig& cfg, const Vocabulary* vocab = nullptr);

}  // namespace anlg::decode
