#include "anlg/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "anlg/kernels.hpp"
#include "anlg/rng.hpp"

namespace anlg::train {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Base: return "base";
        case Variant::KnowledgeText: return "knowledge_text";
        case Variant::KnowledgeEmb: return "knowledge_emb";
    }
    return "?";
}

void TrainConfig::validate() const {
    // lr == 0 stays legal so the zero-step identity is expressible
    if (lr < 0.0 || batch_size <= 0 || epochs <= 0 || clip_norm <= 0.0 || momentum < 0.0 ||
        momentum >= 1.0) {
        throw std::invalid_argument("train config: rates and sizes must be positive");
    }
}

namespace {

// conditioning input for one encoded instance under a variant
lm::Input build_conditioning(const EncodedInstance& e, Variant variant,
                             const KnowledgeBundle* knowledge, int d_model) {
    lm::Input in;
    switch (variant) {
        case Variant::Base:
            if (knowledge) {
                throw std::invalid_argument("base variant does not take knowledge");
            }
            break;
        case Variant::KnowledgeText:
            if (e.knowledge_len <= 0) {
                throw std::invalid_argument(
                    "knowledge_text variant needs a context encoded with knowledge");
            }
            break;
        case Variant::KnowledgeEmb: {
            if (!knowledge || knowledge->entries.size() != 18) {
                throw std::invalid_argument("knowledge_emb variant needs an 18-entry bundle");
            }
            for (const auto& entry : knowledge->entries) {
                if (static_cast<int>(entry.embedding.size()) != d_model) {
                    throw std::invalid_argument("knowledge embedding dimension mismatch");
                }
                in.push_back(lm::InputItem::vector(entry.embedding));
            }
            break;
        }
    }
    lm::append_tokens(in, e.context);
    return in;
}

// -sum log P(target | conditioning); accumulates d loss / d params when
// grads is non-null
double nll_accumulate(const lm::Parameters& params, const lm::Input& conditioning,
                      const TokenSeq& target, lm::Parameters* grads) {
    if (target.empty()) throw std::invalid_argument("nll: empty target");
    lm::Input full = conditioning;
    lm::append_tokens(full, target);
    lm::Forward f = lm::forward(params, full);
    const int c = static_cast<int>(conditioning.size());
    const int v = params.config.vocab_size;
    double loss = 0.0;
    Mat dlogits;
    if (grads) dlogits = Mat(f.T, v);
    for (std::size_t j = 0; j < target.size(); ++j) {
        const int row = c - 1 + static_cast<int>(j);
        const Vec lsm = lm::log_softmax_row(f.logits.row(row), v);
        loss -= lsm[target[j]];
        if (grads) {
            double* dl = dlogits.row(row);
            for (int i = 0; i < v; ++i) dl[i] = std::exp(lsm[i]);
            dl[target[j]] -= 1.0;
        }
    }
    if (grads) lm::backward(params, full, f, dlogits, grads, nullptr);
    return loss;
}

double grad_norm(lm::Parameters& g) {
    double sq = 0.0;
    for (const auto& a : lm::param_arrays(g)) sq += kern::dot(a.count, a.data, a.data);
    return std::sqrt(sq);
}

struct Prepared {
    lm::Input conditioning;
    TokenSeq target;
};

std::vector<Prepared> prepare_task(const lm::Parameters& params,
                                   const std::vector<AbductiveInstance>& set, Variant variant,
                                   const Vocabulary& vocab, const KnowledgeProvider* provider,
                                   std::vector<KnowledgeBundle>& bundle_store) {
    const bool needs_knowledge = variant != Variant::Base;
    if (needs_knowledge && !provider) {
        throw std::invalid_argument("knowledge variants need a knowledge provider");
    }
    lm::Parameters encoder;
    if (needs_knowledge) encoder = knowledge_encoder_params(params.config, params.seed);
    std::vector<Prepared> out;
    out.reserve(set.size());
    for (const auto& inst : set) {
        if (inst.gold_hyps.empty()) {
            throw std::invalid_argument("training instance " + inst.id + " has no gold hypothesis");
        }
        const KnowledgeBundle* kb = nullptr;
        if (needs_knowledge) {
            bundle_store.push_back(make_bundle(*provider, inst.obs1, inst.obs2, encoder));
            kb = &bundle_store.back();
        }
        const EncodedInstance enc = encode_instance(
            vocab, inst,
            variant == Variant::KnowledgeText ? EncodeVariant::KnowledgeText : EncodeVariant::Base,
            kb, params.config.max_len);
        Prepared p;
        p.conditioning = build_conditioning(enc, variant,
                                            variant == Variant::KnowledgeEmb ? kb : nullptr,
                                            params.config.d_model);
        p.target = enc.target;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Prepared> prepare_lm(const std::vector<AbductiveInstance>& set,
                                 const Vocabulary& vocab, int max_len) {
    std::vector<Prepared> out;
    out.reserve(set.size());
    for (const auto& inst : set) {
        // `<bos> obs1 obs2 <eos>`, every position predicted
        Prepared p;
        p.conditioning.push_back(lm::InputItem::tok(vocab.bos()));
        const TokenSeq t1 = vocab.tokenize(inst.obs1);
        const TokenSeq t2 = vocab.tokenize(inst.obs2);
        p.target.insert(p.target.end(), t1.begin(), t1.end());
        p.target.insert(p.target.end(), t2.begin(), t2.end());
        p.target.push_back(vocab.eos());
        if (static_cast<int>(p.target.size()) + 1 > max_len) {
            throw std::length_error("pretraining sequence exceeds max_len");
        }
        out.push_back(std::move(p));
    }
    return out;
}

TrainResult run_sgd(lm::Parameters params, const TrainConfig& config,
                    const std::vector<Prepared>& train_set, const std::vector<Prepared>& dev_set,
                    const EpochHook& hook) {
    if (train_set.empty()) throw std::invalid_argument("empty training corpus");

    lm::Parameters grads = lm::zero_params(params.config);
    lm::Parameters velocity = lm::zero_params(params.config);
    auto p_arrays = lm::param_arrays(params);
    auto g_arrays = lm::param_arrays(grads);
    auto v_arrays = lm::param_arrays(velocity);

    TrainResult result;
    Rng rng(config.seed);
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        long epoch_tokens = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            grads.set_zero();
            double batch_loss = 0.0;
            long batch_tokens = 0;
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t i = start; i < end; ++i) {
                const Prepared& inst = train_set[order[i]];
                batch_loss += nll_accumulate(params, inst.conditioning, inst.target, &grads);
                batch_tokens += static_cast<long>(inst.target.size());
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(start / config.batch_size));
            }
            epoch_loss += batch_loss;
            epoch_tokens += batch_tokens;

            const double inv = 1.0 / static_cast<double>(batch_tokens);
            for (auto& a : g_arrays) kern::scale(a.count, inv, a.data);
            const double norm = grad_norm(grads);
            if (norm > config.clip_norm) {
                const double s = config.clip_norm / norm;
                for (auto& a : g_arrays) kern::scale(a.count, s, a.data);
            }
            for (std::size_t k = 0; k < p_arrays.size(); ++k) {
                kern::scale(v_arrays[k].count, config.momentum, v_arrays[k].data);
                kern::add(v_arrays[k].count, g_arrays[k].data, v_arrays[k].data);
                kern::axpy(p_arrays[k].count, -config.lr, v_arrays[k].data, p_arrays[k].data);
            }
        }
        const double train_loss = epoch_loss / static_cast<double>(epoch_tokens);

        double dev_loss = 0.0;
        if (!dev_set.empty()) {
            long dev_tokens = 0;
            for (const auto& inst : dev_set) {
                dev_loss += nll_accumulate(params, inst.conditioning, inst.target, nullptr);
                dev_tokens += static_cast<long>(inst.target.size());
            }
            dev_loss /= static_cast<double>(dev_tokens);
        }

        result.curve.push_back({epoch, "train", train_loss});
        if (!dev_set.empty()) result.curve.push_back({epoch, "dev", dev_loss});
        if (hook) hook(epoch, params, train_loss, dev_loss);
    }
    result.params = std::move(params);
    return result;
}

}  // namespace

LossResult nll_loss(const lm::Parameters& params, const EncodedInstance& encoded, Variant variant,
                    const KnowledgeBundle* knowledge) {
    LossResult r;
    r.grads = lm::zero_params(params.config);
    const lm::Input cond = build_conditioning(
        encoded, variant, variant == Variant::KnowledgeText ? nullptr : knowledge,
        params.config.d_model);
    r.loss = nll_accumulate(params, cond, encoded.target, &r.grads);
    r.target_tokens = encoded.N;
    return r;
}

double nll_value(const lm::Parameters& params, const EncodedInstance& encoded, Variant variant,
                 const KnowledgeBundle* knowledge) {
    const lm::Input cond = build_conditioning(
        encoded, variant, variant == Variant::KnowledgeText ? nullptr : knowledge,
        params.config.d_model);
    return nll_accumulate(params, cond, encoded.target, nullptr);
}

TrainResult fit(lm::Parameters params, const TrainConfig& config,
                const std::vector<AbductiveInstance>& train_set,
                const std::vector<AbductiveInstance>& dev_set, const Vocabulary& vocab,
                const KnowledgeProvider* provider, const EpochHook& hook) {
    config.validate();
    // bundles come from the frozen knowledge encoder: the initial parameters,
    // which decoding can rebuild from the checkpoint's (config, seed)
    std::vector<KnowledgeBundle> bundles;  // owns bundles for both splits
    bundles.reserve(train_set.size() + dev_set.size());
    const auto prep_train =
        prepare_task(params, train_set, config.variant, vocab, provider, bundles);
    const auto prep_dev = prepare_task(params, dev_set, config.variant, vocab, provider, bundles);
    return run_sgd(std::move(params), config, prep_train, prep_dev, hook);
}

TrainResult fit_sequences(lm::Parameters params, const TrainConfig& config,
                          const std::vector<SeqExample>& train_set,
                          const std::vector<SeqExample>& dev_set, const EpochHook& hook) {
    config.validate();
    auto convert = [](const std::vector<SeqExample>& set) {
        std::vector<Prepared> out;
        out.reserve(set.size());
        for (const auto& ex : set) {
            Prepared p;
            p.conditioning = lm::to_input(ex.conditioning);
            p.target = ex.target;
            out.push_back(std::move(p));
        }
        return out;
    };
    return run_sgd(std::move(params), config, convert(train_set), convert(dev_set), hook);
}

TrainResult pretrain_lm(lm::Parameters params, const TrainConfig& config,
                        const std::vector<AbductiveInstance>& train_set,
                        const std::vector<AbductiveInstance>& dev_set, const Vocabulary& vocab,
                        const EpochHook& hook) {
    config.validate();
    const auto prep_train = prepare_lm(train_set, vocab, params.config.max_len);
    const auto prep_dev = prepare_lm(dev_set, vocab, params.config.max_len);
    return run_sgd(std::move(params), config, prep_train, prep_dev, hook);
}

void save_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write loss curve: " + path);
    out << "epoch,split,loss\n";
    char buf[64];
    for (const auto& c : curve) {
        std::snprintf(buf, sizeof(buf), "%.10g", c.loss);
        out << c.epoch << ',' << c.split << ',' << buf << '\n';
    }
}

}  // namespace anlg::train
