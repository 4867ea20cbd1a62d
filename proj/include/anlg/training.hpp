#pragma once

#include <functional>
#include <string>
#include <vector>

#include "anlg/data.hpp"
#include "anlg/knowledge.hpp"
#include "anlg/model.hpp"

// Supervised fine-tuning: teacher-forced NLL over hypothesis positions only
// (context tokens are masked out of the loss), with optional knowledge
// conditioning as text or as 18 prepended embeddings. Optimizer is SGD with
// momentum 0.9 and global-norm gradient clipping.

namespace anlg::train {

enum class Variant { Base, KnowledgeText, KnowledgeEmb };

const char* variant_name(Variant v);

struct TrainConfig {
    Variant variant = Variant::Base;
    double lr = 0.5;
    double momentum = 0.9;
    double clip_norm = 1.0;
    int batch_size = 8;
    int epochs = 30;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // epochs between checkpoints; <= 0: final only

    void validate() const;
};

struct LossResult {
    double loss = 0.0;  // -sum log P over target positions (nats)
    int target_tokens = 0;
    lm::Parameters grads;  // d loss / d params
};

// Loss for one encoded instance. Knowledge must be present iff the variant
// calls for it (KnowledgeEmb passes the 18 vectors as extra embeddings;
// KnowledgeText expects the text already encoded into the context).
LossResult nll_loss(const lm::Parameters& params, const EncodedInstance& encoded, Variant variant,
                    const KnowledgeBundle* knowledge);

// Loss only, no gradient allocation.
double nll_value(const lm::Parameters& params, const EncodedInstance& encoded, Variant variant,
                 const KnowledgeBundle* knowledge);

struct CurvePoint {
    int epoch = 0;
    std::string split;  // "train" | "dev"
    double loss = 0.0;  // mean nats per target token
};

using EpochHook =
    std::function<void(int epoch, const lm::Parameters& params, double train_loss, double dev_loss)>;

struct TrainResult {
    lm::Parameters params;
    std::vector<CurvePoint> curve;
};

// Deterministic in (params, config, corpus). Knowledge bundles, when needed,
// are built once from the initial parameters (a frozen knowledge model).
// Aborts with a diagnostic if the loss goes non-finite.
TrainResult fit(lm::Parameters params, const TrainConfig& config,
                const std::vector<AbductiveInstance>& train_set,
                const std::vector<AbductiveInstance>& dev_set, const Vocabulary& vocab,
                const KnowledgeProvider* provider = nullptr, const EpochHook& hook = nullptr);

// Raw sequence-to-sequence SGD on (conditioning, target) token pairs; the
// pretraining path and the decoder audit share it.
struct SeqExample {
    TokenSeq conditioning;
    TokenSeq target;
};

TrainResult fit_sequences(lm::Parameters params, const TrainConfig& config,
                          const std::vector<SeqExample>& train_set,
                          const std::vector<SeqExample>& dev_set = {},
                          const EpochHook& hook = nullptr);

// Plain language-model pretraining on observation sentences only (hypotheses
// never enter the loss): each observation becomes `<bos> words <eos>` with
// every position predicted. This is the unsupervised-setting model that the
// gradient-based decoders run on.
TrainResult pretrain_lm(lm::Parameters params, const TrainConfig& config,
                        const std::vector<AbductiveInstance>& train_set,
                        const std::vector<AbductiveInstance>& dev_set, const Vocabulary& vocab,
                        const EpochHook& hook = nullptr);

// CSV with header epoch,split,loss.
void save_curve(const std::string& path, const std::vector<CurvePoint>& curve);

}  // namespace anlg::train
