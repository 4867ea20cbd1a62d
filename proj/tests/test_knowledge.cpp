#include <doctest.h>

#include <cmath>

#include "anlg/data.hpp"
#include "anlg/knowledge.hpp"
#include "anlg/training.hpp"
#include "test_util.hpp"

using namespace anlg;

namespace {

const char* kShippedRules = "configs/comet_rules.tsv";

Vocabulary world_vocab() { return Vocabulary::build(synth_vocabulary()); }

lm::ModelConfig small_cfg(int v) {
    lm::ModelConfig cfg;
    cfg.vocab_size = v;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.max_len = 64;
    return cfg;
}

}  // namespace

TEST_CASE("shipped rule table: lookups, fallback, determinism") {
    const Vocabulary vocab = world_vocab();
    const RuleTableProvider provider = RuleTableProvider::from_file(vocab, kShippedRules);
    CHECK(provider.rule_count() > 18);

    CHECK(provider.infer_text("nikki wanted candy", Relation::xWant) == "to get candy");
    CHECK(provider.infer_text("mia wanted to bake a cake", Relation::xWant) == "to bake a cake");

    // totality: any text, any relation, never empty
    for (Relation r : kAllRelations) {
        CHECK_FALSE(provider.infer_text("completely unrelated text", r).empty());
        CHECK_FALSE(provider.infer_text("x", r).empty());
    }
    // determinism
    CHECK(provider.infer_text("mia wanted to bake a cake", Relation::xNeed) ==
          provider.infer_text("mia wanted to bake a cake", Relation::xNeed));
    CHECK_THROWS_AS(provider.infer_text("", Relation::xWant), std::invalid_argument);
}

TEST_CASE("rule table rejects malformed rows") {
    const Vocabulary vocab = world_vocab();
    CHECK_THROWS(RuleTableProvider(vocab, "xWant\tonly-two-fields"));
    CHECK_THROWS(RuleTableProvider(vocab, "noSuchRel\t*\ttext"));
    CHECK_NOTHROW(RuleTableProvider(vocab, "# comment only\n"));
}

TEST_CASE("infer_embedding: dimension, determinism, zero-block reduction") {
    const Vocabulary vocab = world_vocab();
    const RuleTableProvider provider = RuleTableProvider::from_file(vocab, kShippedRules);
    const auto cfg = small_cfg(vocab.size());

    SUBCASE("dimension equals d_model and values are finite") {
        const lm::Parameters p = test::random_params(cfg, 5);
        const Vec e = provider.infer_embedding("mia wanted to bake a cake", Relation::xWant, p);
        REQUIRE(static_cast<int>(e.size()) == cfg.d_model);
        for (double x : e) CHECK(std::isfinite(x));
        CHECK(e == provider.infer_embedding("mia wanted to bake a cake", Relation::xWant, p));
    }

    SUBCASE("zeroed blocks reduce to the mean of raw token+position embeddings") {
        // randomize embeddings only; blocks stay zero so the residual stream
        // is exactly tok+pos
        lm::Parameters p = lm::zero_params(cfg);
        Rng rng(7);
        for (auto& x : p.tok_emb.v) x = rng.normal();
        for (auto& x : p.pos_emb.v) x = rng.normal();
        for (auto& b : p.blocks) {
            std::fill(b.ln1_g.begin(), b.ln1_g.end(), 1.0);
            std::fill(b.ln2_g.begin(), b.ln2_g.end(), 1.0);
        }
        std::fill(p.lnf_g.begin(), p.lnf_g.end(), 1.0);

        const std::string text = provider.infer_text("mia wanted to bake a cake", Relation::xWant);
        const TokenSeq toks = vocab.tokenize(text);
        const Vec e = provider.infer_embedding("mia wanted to bake a cake", Relation::xWant, p);
        for (int j = 0; j < cfg.d_model; ++j) {
            double want = 0.0;
            for (std::size_t t = 0; t < toks.size(); ++t) {
                want += p.tok_emb.at(toks[t], j) + p.pos_emb.at(static_cast<int>(t), j);
            }
            want /= static_cast<double>(toks.size());
            CHECK(e[j] == doctest::Approx(want).epsilon(1e-12));
        }
    }

    SUBCASE("different relations with different texts give different vectors") {
        const lm::Parameters p = test::random_params(cfg, 11);
        const std::string obs = "mia wanted to bake a cake";
        REQUIRE(provider.infer_text(obs, Relation::xWant) !=
                provider.infer_text(obs, Relation::xNeed));
        const Vec a = provider.infer_embedding(obs, Relation::xWant, p);
        const Vec b = provider.infer_embedding(obs, Relation::xNeed, p);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
        CHECK(diff > 0.0);
    }
}

TEST_CASE("bundle: 18 entries, stable order, slot independence") {
    const Vocabulary vocab = world_vocab();
    const RuleTableProvider provider = RuleTableProvider::from_file(vocab, kShippedRules);
    const lm::Parameters p = test::random_params(small_cfg(vocab.size()), 3);

    const KnowledgeBundle kb =
        make_bundle(provider, "mia wanted to bake a cake", "mia threw the broken oven away", p);
    REQUIRE(kb.entries.size() == 18);
    CHECK(kb.provider == "rules");
    for (int i = 0; i < 18; ++i) {
        CHECK(kb.entries[i].slot == (i < 9 ? 0 : 1));
        CHECK(kb.entries[i].relation == kAllRelations[i % 9]);
        CHECK_FALSE(kb.entries[i].text.empty());
    }

    // entries 0..8 depend only on obs1
    const KnowledgeBundle kc =
        make_bundle(provider, "mia wanted to bake a cake", "a completely different future", p);
    for (int i = 0; i < 9; ++i) {
        CHECK(kb.entries[i].text == kc.entries[i].text);
        CHECK(kb.entries[i].embedding == kc.entries[i].embedding);
    }

    // stable across calls
    const KnowledgeBundle kd =
        make_bundle(provider, "mia wanted to bake a cake", "mia threw the broken oven away", p);
    for (int i = 0; i < 18; ++i) CHECK(kb.entries[i].text == kd.entries[i].text);

    CHECK(kb.embeddings().size() == 18);
}

namespace {

// minimal alternative provider: proves the interface is swappable
class ConstantProvider : public KnowledgeProvider {
  public:
    explicit ConstantProvider(int d) : d_(d) {}
    std::string name() const override { return "constant"; }
    std::string infer_text(const std::string&, Relation r) const override {
        return std::string("always ") + relation_name(r);
    }
    Vec infer_embedding(const std::string&, Relation, const lm::Parameters&) const override {
        return Vec(d_, 0.5);
    }

  private:
    int d_;
};

}  // namespace

TEST_CASE("any provider satisfying the interface plugs into bundles and training") {
    const Vocabulary vocab = world_vocab();
    const auto cfg = small_cfg(vocab.size());
    const lm::Parameters p = test::random_params(cfg, 3);
    const ConstantProvider provider(cfg.d_model);

    const KnowledgeBundle kb = make_bundle(provider, "any past", "any future", p);
    REQUIRE(kb.entries.size() == 18);
    CHECK(kb.provider == "constant");
    CHECK(kb.entries[0].text == "always oEffect");

    AbductiveInstance inst;
    inst.obs1 = "mia wanted to bake a cake";
    inst.obs2 = "mia threw the broken oven away";
    inst.gold_hyps = {"mia broke the oven"};
    const EncodedInstance enc = encode_instance(vocab, inst, EncodeVariant::Base, nullptr, 128);
    CHECK(std::isfinite(train::nll_value(p, enc, train::Variant::KnowledgeEmb, &kb)));
}
