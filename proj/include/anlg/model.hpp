#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anlg/types.hpp"

// Small autoregressive transformer with a differentiable soft-input path.
// Pre-LN blocks, causal multi-head attention, GELU MLP, tied input/output
// embedding. All math is f64. Hand-written backward passes deliver gradients
// with respect to both parameters and soft inputs.

namespace anlg::lm {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 2;
    int d_ff = 128;
    int max_len = 128;

    void validate() const;  // throws std::invalid_argument on inconsistent dims
    bool operator==(const ModelConfig&) const = default;
};

struct BlockParams {
    Vec ln1_g, ln1_b;
    Mat w_qkv;  // d x 3d
    Vec b_qkv;
    Mat w_attn;  // d x d
    Vec b_attn;
    Vec ln2_g, ln2_b;
    Mat w_ff1;  // d x d_ff
    Vec b_ff1;
    Mat w_ff2;  // d_ff x d
    Vec b_ff2;
};

struct Parameters {
    ModelConfig config;
    std::uint32_t version = 1;
    std::uint64_t seed = 0;

    Mat tok_emb;  // V x d; also the (tied) output projection
    Mat pos_emb;  // max_len x d
    std::vector<BlockParams> blocks;
    Vec lnf_g, lnf_b;

    void set_zero();
};

struct ArrayRef {
    std::string name;
    std::vector<int> shape;
    double* data;
    std::size_t count;
};

// Stable-order named views over every parameter array (checkpointing,
// optimizer updates, gradient audits).
std::vector<ArrayRef> param_arrays(Parameters& p);

// All arrays zero. Zero parameters give all-zero logits, i.e. the uniform
// next-token distribution.
Parameters zero_params(const ModelConfig& config);

// Deterministic in (config, seed). Weights ~ N(0, 0.02), biases zero, LN
// gains one; the tied embedding/output matrix starts at zero so a fresh
// model is exactly uniform.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

bool all_finite(const Parameters& p);

// ---------------------------------------------------------------------------
// Inputs: a position is a hard token, a distribution over the vocabulary
// (embedded as the probability-weighted mixture of embedding rows), or a raw
// d-vector (knowledge embeddings). Every position consumes a positional slot.

struct InputItem {
    enum class Kind { Token, Soft, Vector };
    Kind kind = Kind::Token;
    int token = -1;
    Vec dist;  // Soft: V entries
    Vec vec;   // Vector: d entries

    static InputItem tok(int id);
    static InputItem soft(Vec dist);
    static InputItem vector(Vec v);
};

using Input = std::vector<InputItem>;

Input to_input(const TokenSeq& s);
void append_tokens(Input& in, const TokenSeq& s);
void append_soft(Input& in, const SoftSeq& s);

// ---------------------------------------------------------------------------
// Forward pass with caches for the backward pass.

struct LnCache {
    Mat out;
    Vec mean, rstd;
};

struct LayerCache {
    Mat x_in;  // residual stream entering the block
    LnCache ln1;
    Mat qkv;   // T x 3d
    Mat att;   // (n_heads*T) x T softmax rows
    Mat ctx;   // T x d, heads concatenated
    Mat x_mid; // after attention residual
    LnCache ln2;
    Mat ff1;   // T x d_ff preactivation
    Mat act;   // gelu(ff1)
};

struct Forward {
    int T = 0;
    Mat x0;       // embedded inputs incl. positions
    std::vector<LayerCache> layers;
    Mat x_final;  // residual stream after the last block (pre-final-LN)
    LnCache lnf;
    Mat logits;   // T x V; row t scores the token at position t+1
};

// Validates inputs (simplex rows within 1e-4, ids in range, length <= max_len,
// nonempty) and runs the network.
Forward forward(const Parameters& p, const Input& in);

// Gradients with respect to soft/vector input items; entries for token items
// stay empty.
struct InputGrads {
    std::vector<Vec> items;
};

// Backpropagates dlogits through the cached forward pass. Either gradient
// sink may be null. param_grads must be shaped like p (see zero_params).
void backward(const Parameters& p, const Input& in, const Forward& f, const Mat& dlogits,
              Parameters* param_grads, InputGrads* input_grads);

// ---------------------------------------------------------------------------
// Public entry points.

// Next-token logits for each prefix position. extra_embeddings, when present,
// are prepended before the tokens (positional slots 0..k-1); returned rows
// align with the prefix tokens only.
Mat forward_logits(const Parameters& p, const TokenSeq& prefix,
                   const std::vector<Vec>* extra_embeddings = nullptr);

// Logits over [hard_prefix; soft]; rows cover all positions, hard prefix
// first. One-hot soft rows reproduce forward_logits exactly.
Mat forward_soft(const Parameters& p, const SoftSeq& soft, const TokenSeq* hard_prefix = nullptr);

// Sum over target positions of log P(target_t | conditioning, target_<t), in
// nats. Always <= 0.
double log_prob(const Parameters& p, const TokenSeq& target, const Input& conditioning);
double log_prob(const Parameters& p, const TokenSeq& target, const TokenSeq& conditioning);
double log_prob(const Parameters& p, const TokenSeq& target, const SoftSeq& conditioning);

// log_prob plus gradients (of the log-probability, not its negation).
double log_prob_grad(const Parameters& p, const TokenSeq& target, const Input& conditioning,
                     Parameters* param_grads, InputGrads* input_grads);

// Per-position hidden states of a token sequence: the residual stream after
// the last block. Used for knowledge-embedding pooling and token encoders.
Mat hidden_states(const Parameters& p, const TokenSeq& tokens);

// log-softmax of one logit row.
Vec log_softmax_row(const double* logits, int v);
// softmax of one logit row.
Vec softmax_row(const double* logits, int v);

// ---------------------------------------------------------------------------
// Checkpoints: versioned container of named arrays + config + seed.
// Binary layout: magic "ANLGCKP1", u64 header length, JSON header (version,
// seed, config, array table with name/shape/dtype/offset), f64 payload.
// Round-trips are bit-exact.

void save_checkpoint(const std::string& path, const Parameters& p);
Parameters load_checkpoint(const std::string& path);

}  // namespace anlg::lm
