#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>

#include "anlg/data.hpp"
#include "anlg/training.hpp"
#include "test_util.hpp"

using namespace anlg;

namespace {

Vocabulary world_vocab() { return Vocabulary::build(synth_vocabulary()); }

lm::ModelConfig small_cfg(int v) {
    lm::ModelConfig cfg;
    cfg.vocab_size = v;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.max_len = 128;
    return cfg;
}

AbductiveInstance example_instance() {
    AbductiveInstance inst;
    inst.obs1 = "mia wanted to bake a cake";
    inst.obs2 = "mia threw the broken oven away";
    inst.gold_hyps = {"mia broke the oven"};
    return inst;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1e-5, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("nll on a zero-weight model is N*ln(V)") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    const lm::Parameters p = lm::zero_params(cfg);

    AbductiveInstance inst = example_instance();
    const std::string hyp = "mia broke";  // 2 tokens + <eos> -> N = 3
    const EncodedInstance e = encode_instance(vocab, inst, EncodeVariant::Base, nullptr, 128, &hyp);
    REQUIRE(e.N == 3);
    const double loss = train::nll_value(p, e, train::Variant::Base, nullptr);
    CHECK(loss == doctest::Approx(3.0 * std::log(vocab.size())).epsilon(1e-12));
}

TEST_CASE("nll equals the negated lm log-prob of the target") {
    const Vocabulary vocab = world_vocab();
    const lm::Parameters p = test::random_params(small_cfg(vocab.size()), 3);
    const EncodedInstance e =
        encode_instance(vocab, example_instance(), EncodeVariant::Base, nullptr, 128);
    const double loss = train::nll_value(p, e, train::Variant::Base, nullptr);
    CHECK(loss == doctest::Approx(-lm::log_prob(p, e.target, e.context)).epsilon(1e-10));
}

TEST_CASE("nll gradients match finite differences on sampled parameters") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    lm::Parameters p = test::random_params(cfg, 17);
    const EncodedInstance e =
        encode_instance(vocab, example_instance(), EncodeVariant::Base, nullptr, 128);

    train::LossResult lr = train::nll_loss(p, e, train::Variant::Base, nullptr);
    auto grads = lm::param_arrays(lr.grads);
    auto arrays = lm::param_arrays(p);

    Rng rng(99);
    const double h = 1e-5;
    int checked = 0;
    for (std::size_t a = 0; a < arrays.size(); ++a) {
        // roughly 1% of each array, at least one entry
        const int samples = std::max<int>(1, static_cast<int>(arrays[a].count / 100));
        for (int s = 0; s < samples; ++s) {
            const std::size_t i = rng.below(static_cast<int>(arrays[a].count));
            const double keep = arrays[a].data[i];
            arrays[a].data[i] = keep + h;
            const double up = train::nll_value(p, e, train::Variant::Base, nullptr);
            arrays[a].data[i] = keep - h;
            const double dn = train::nll_value(p, e, train::Variant::Base, nullptr);
            arrays[a].data[i] = keep;
            const double fd = (up - dn) / (2 * h);
            CHECK(rel_err(grads[a].data[i], fd) < 1e-3);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("loss masking: context embeddings matter, trailing padding never does") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    lm::Parameters p = test::random_params(cfg, 23);
    const EncodedInstance e =
        encode_instance(vocab, example_instance(), EncodeVariant::Base, nullptr, 128);
    const double base = train::nll_value(p, e, train::Variant::Base, nullptr);

    // a context token's embedding influences the loss
    const int ctx_tok = e.context[2];  // first obs1 word
    p.tok_emb.at(ctx_tok, 0) += 0.25;
    const double ctx_changed = train::nll_value(p, e, train::Variant::Base, nullptr);
    CHECK(ctx_changed != base);
    p.tok_emb.at(ctx_tok, 0) -= 0.25;

    // padding appended after <eos> is causally inert: the same target rows
    // summed from the padded forward pass reproduce the loss exactly
    lm::Input padded = lm::to_input(e.context);
    lm::append_tokens(padded, e.target);
    padded.push_back(lm::InputItem::tok(vocab.pad()));
    padded.push_back(lm::InputItem::tok(vocab.pad()));
    const lm::Forward f = lm::forward(p, padded);
    double padded_loss = 0.0;
    for (int j = 0; j < e.N; ++j) {
        const int row = static_cast<int>(e.context.size()) - 1 + j;
        padded_loss -= lm::log_softmax_row(f.logits.row(row), cfg.vocab_size)[e.target[j]];
    }
    CHECK(padded_loss == base);
}

TEST_CASE("knowledge variants: structural contracts") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    const lm::Parameters p = test::random_params(cfg, 31);
    const RuleTableProvider provider =
        RuleTableProvider::from_file(vocab, "configs/comet_rules.tsv");
    const AbductiveInstance inst = example_instance();
    const KnowledgeBundle kb = make_bundle(provider, inst.obs1, inst.obs2, p);

    const EncodedInstance base_enc = encode_instance(vocab, inst, EncodeVariant::Base, nullptr, 128);

    SUBCASE("knowledge_emb consumes exactly 18 extra embeddings and shifts the loss") {
        const double base_loss = train::nll_value(p, base_enc, train::Variant::Base, nullptr);
        const double emb_loss = train::nll_value(p, base_enc, train::Variant::KnowledgeEmb, &kb);
        CHECK(std::fabs(base_loss - emb_loss) > 0.0);

        KnowledgeBundle missing = kb;
        missing.entries.pop_back();
        CHECK_THROWS_AS(train::nll_value(p, base_enc, train::Variant::KnowledgeEmb, &missing),
                        std::invalid_argument);
    }

    SUBCASE("missing knowledge for knowledge variants is a config error") {
        CHECK_THROWS_AS(train::nll_value(p, base_enc, train::Variant::KnowledgeEmb, nullptr),
                        std::invalid_argument);
        CHECK_THROWS_AS(train::nll_value(p, base_enc, train::Variant::KnowledgeText, nullptr),
                        std::invalid_argument);  // context has no knowledge span
        CHECK_THROWS_AS(train::nll_value(p, base_enc, train::Variant::Base, &kb),
                        std::invalid_argument);  // base takes none
    }

    SUBCASE("knowledge_text loss runs on a knowledge-encoded context") {
        const EncodedInstance kt_enc =
            encode_instance(vocab, inst, EncodeVariant::KnowledgeText, &kb, 128);
        const double kt_loss = train::nll_value(p, kt_enc, train::Variant::KnowledgeText, nullptr);
        CHECK(std::isfinite(kt_loss));
        CHECK(kt_loss != train::nll_value(p, base_enc, train::Variant::Base, nullptr));
    }
}

TEST_CASE("fit: zero step, determinism, learning") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    const SynthCorpus corpus = synth_corpus(5, 40, [] {
        WorldConfig wc;
        wc.dev_size = 5;
        wc.test_size = 5;
        return wc;
    }());

    SUBCASE("one epoch at lr=0 leaves the parameters untouched") {
        train::TrainConfig tc;
        tc.lr = 0.0;
        tc.epochs = 1;
        std::vector<AbductiveInstance> one = {corpus.train[0]};
        const lm::Parameters before = lm::init_params(cfg, 7);
        const train::TrainResult r = train::fit(before, tc, one, {}, vocab);
        auto pa = lm::param_arrays(const_cast<lm::Parameters&>(before));
        auto qa = lm::param_arrays(const_cast<lm::Parameters&>(r.params));
        for (std::size_t i = 0; i < pa.size(); ++i) {
            for (std::size_t j = 0; j < pa[i].count; ++j) CHECK(pa[i].data[j] == qa[i].data[j]);
        }
    }

    SUBCASE("identical seeds give identical loss curves; loss beats uniform") {
        train::TrainConfig tc;
        tc.epochs = 6;
        tc.seed = 3;
        const train::TrainResult a = train::fit(lm::init_params(cfg, 3), tc, corpus.train,
                                                corpus.dev, vocab);
        const train::TrainResult b = train::fit(lm::init_params(cfg, 3), tc, corpus.train,
                                                corpus.dev, vocab);
        REQUIRE(a.curve.size() == b.curve.size());
        for (std::size_t i = 0; i < a.curve.size(); ++i) {
            CHECK(a.curve[i].loss == b.curve[i].loss);
            CHECK(a.curve[i].epoch == b.curve[i].epoch);
        }
        // final train loss strictly below the uniform baseline ln(V)
        CHECK(a.curve[a.curve.size() - 2].loss < std::log(vocab.size()));
    }

    SUBCASE("training aborts with a diagnostic when the loss blows up") {
        train::TrainConfig tc;
        tc.epochs = 1;
        lm::Parameters p = test::random_params(cfg, 1);
        // an inf in the input embeddings propagates to a NaN loss
        p.pos_emb.at(0, 0) = std::numeric_limits<double>::infinity();
        std::vector<AbductiveInstance> one = {corpus.train[0]};
        CHECK_THROWS_WITH_AS(train::fit(p, tc, one, {}, vocab),
                             doctest::Contains("diverged"), std::runtime_error);
    }
}

TEST_CASE("curve CSV has the documented shape") {
    const std::vector<train::CurvePoint> curve = {{1, "train", 1.5}, {1, "dev", 1.25}};
    const auto path = std::filesystem::temp_directory_path() / "anlg_curve_test.csv";
    train::save_curve(path.string(), curve);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,split,loss");
    std::getline(in, line);
    CHECK(line == "1,train,1.5");
    std::filesystem::remove(path);
}
