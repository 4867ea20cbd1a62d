#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "anlg/data.hpp"

using namespace anlg;

namespace {

Vocabulary world_vocab() { return Vocabulary::build(synth_vocabulary()); }

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("vocabulary: specials, ids dense, V >= 16") {
    const Vocabulary v = world_vocab();
    CHECK(v.size() >= 16);
    CHECK(v.token(v.pad()) == "<pad>");
    CHECK(v.token(v.unk()) == "<unk>");
    CHECK(v.token(v.bos()) == "<bos>");
    CHECK(v.token(v.eos()) == "<eos>");
    CHECK(v.token(v.o1_open()) == "<o1>");
    CHECK(v.token(v.o1_close()) == "</o1>");
    CHECK(v.token(v.o2_open()) == "<o2>");
    CHECK(v.token(v.o2_close()) == "</o2>");
    std::set<int> rel_ids;
    for (Relation r : kAllRelations) rel_ids.insert(v.rel_marker(r));
    CHECK(rel_ids.size() == 9);
    // bijective surface <-> id
    for (int i = 0; i < v.size(); ++i) {
        auto id = v.id(v.token(i));
        REQUIRE(id.has_value());
        CHECK(*id == i);
    }
}

TEST_CASE("vocabulary round-trips through a file") {
    const Vocabulary v = world_vocab();
    const auto path = tmp_file("anlg_vocab_test.txt");
    v.save(path.string());
    const Vocabulary w = Vocabulary::load(path.string());
    REQUIRE(w.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(w.token(i) == v.token(i));
    std::filesystem::remove(path);
}

TEST_CASE("tokenize: round trip, normalization, OOV, empty") {
    const Vocabulary v = world_vocab();
    CHECK(v.detokenize(v.tokenize("mia wanted to bake a cake")) == "mia wanted to bake a cake");
    CHECK(v.detokenize(v.tokenize("  MIA   Wanted\tto bake a CAKE ")) ==
          "mia wanted to bake a cake");
    CHECK(v.tokenize("").empty());
    const TokenSeq oov = v.tokenize("zyzzyva");
    REQUIRE(oov.size() == 1);
    CHECK(oov[0] == v.unk());
}

TEST_CASE("relation names parse both ways") {
    CHECK(relation_from_name("xWant") == Relation::xWant);
    CHECK(relation_from_name("oEffect") == Relation::oEffect);
    CHECK_FALSE(relation_from_name("xBogus").has_value());
    for (Relation r : kAllRelations) CHECK(relation_from_name(relation_name(r)) == r);
}

TEST_CASE("encode_instance: layout, boundaries, budget") {
    const Vocabulary v = world_vocab();
    AbductiveInstance inst;
    inst.obs1 = "mia wanted to bake a cake";
    inst.obs2 = "mia threw the broken oven away";
    inst.gold_hyps = {"mia broke the oven"};

    const EncodedInstance e = encode_instance(v, inst, EncodeVariant::Base, nullptr, 128);
    REQUIRE(e.context.size() >= 4);
    CHECK(e.context[0] == v.bos());
    CHECK(e.context[1] == v.o1_open());
    CHECK(e.context[2 + e.m] == v.o1_close());
    CHECK(e.context[3 + e.m] == v.o2_open());
    CHECK(e.context.back() == v.o2_close());
    CHECK(e.m == 6);
    CHECK(e.n == 6);
    CHECK(e.N == 5);  // 4 hypothesis tokens + <eos>
    CHECK(e.target.back() == v.eos());
    // target carries no specials besides <eos>
    for (std::size_t i = 0; i + 1 < e.target.size(); ++i) CHECK_FALSE(v.is_special(e.target[i]));

    // decoding the concatenation reproduces the layout
    TokenSeq all = e.context;
    all.insert(all.end(), e.target.begin(), e.target.end());
    CHECK(v.detokenize(all) ==
          "<bos> <o1> mia wanted to bake a cake </o1> <o2> mia threw the broken oven away </o2> "
          "mia broke the oven <eos>");

    SUBCASE("exact-fit boundary accepted, one less rejected") {
        const int exact = static_cast<int>(e.context.size() + e.target.size());
        CHECK_NOTHROW(encode_instance(v, inst, EncodeVariant::Base, nullptr, exact));
        CHECK_THROWS_AS(encode_instance(v, inst, EncodeVariant::Base, nullptr, exact - 1),
                        std::length_error);
    }

    SUBCASE("hypothesis override replaces the gold target") {
        const std::string hyp = "mia lost the bowl";
        const EncodedInstance o = encode_instance(v, inst, EncodeVariant::Base, nullptr, 128, &hyp);
        CHECK(o.context == e.context);
        CHECK(v.detokenize(o.target) == "mia lost the bowl <eos>");
    }
}

TEST_CASE("encode_instance knowledge_text: markers, truncation-first") {
    const Vocabulary v = world_vocab();
    AbductiveInstance inst;
    inst.obs1 = "mia wanted to bake a cake";
    inst.obs2 = "mia threw the broken oven away";
    inst.gold_hyps = {"mia broke the oven"};

    KnowledgeBundle kb;
    kb.provider = "test";
    for (int slot = 0; slot < 2; ++slot) {
        for (Relation r : kAllRelations) {
            kb.entries.push_back({slot, r, "to do something", {}});
        }
    }
    const EncodedInstance base = encode_instance(v, inst, EncodeVariant::Base, nullptr, 128);
    const EncodedInstance kt = encode_instance(v, inst, EncodeVariant::KnowledgeText, &kb, 128);
    CHECK(kt.context.size() > base.context.size());
    CHECK(kt.target == base.target);
    CHECK(kt.knowledge_len == 18 * 4);  // marker + 3 words each
    // first knowledge token after </o2> is the oEffect marker
    CHECK(kt.context[base.context.size()] == v.rel_marker(Relation::oEffect));

    SUBCASE("knowledge span absorbs the overflow before anything fails") {
        const int full = static_cast<int>(kt.context.size() + kt.target.size());
        const EncodedInstance trimmed =
            encode_instance(v, inst, EncodeVariant::KnowledgeText, &kb, full - 10);
        CHECK(trimmed.knowledge_len == kt.knowledge_len - 10);
        CHECK(trimmed.target == kt.target);
        // too small even after dropping all knowledge
        CHECK_THROWS_AS(encode_instance(v, inst, EncodeVariant::KnowledgeText, &kb, 10),
                        std::length_error);
    }

    SUBCASE("knowledge_text without a bundle is a config error") {
        CHECK_THROWS_AS(encode_instance(v, inst, EncodeVariant::KnowledgeText, nullptr, 128),
                        std::invalid_argument);
    }
}

TEST_CASE("jsonl: round trip, aliases, errors") {
    const auto path = tmp_file("anlg_data_test.jsonl");

    SUBCASE("save/load round trip") {
        std::vector<AbductiveInstance> xs;
        xs.push_back({"a1", "first past", "first future", {"one", "two"}});
        xs.push_back({"", "second past", "second future", {}});
        save_jsonl(path.string(), xs);
        const auto ys = load_jsonl(path.string());
        REQUIRE(ys.size() == 2);
        CHECK(ys[0].id == "a1");
        CHECK(ys[0].obs1 == "first past");
        CHECK(ys[0].gold_hyps == std::vector<std::string>{"one", "two"});
        CHECK(ys[1].id.empty());
        CHECK(ys[1].gold_hyps.empty());
    }

    SUBCASE("direct schema and unknown fields") {
        std::ofstream(path) << R"({"obs1":"a","obs2":"b","hyps":["c"],"extra":42})" << "\n";
        const auto xs = load_jsonl(path.string());
        REQUIRE(xs.size() == 1);
        CHECK(xs[0].obs1 == "a");
        CHECK(xs[0].obs2 == "b");
        CHECK(xs[0].gold_hyps == std::vector<std::string>{"c"});
    }

    SUBCASE("ART-style aliases hyp1/hyp2") {
        std::ofstream(path) << R"({"obs1":"a","obs2":"b","hyp1":"h1","hyp2":"h2"})" << "\n";
        const auto xs = load_jsonl(path.string());
        REQUIRE(xs.size() == 1);
        CHECK(xs[0].gold_hyps == std::vector<std::string>{"h1", "h2"});
    }

    SUBCASE("empty file gives empty list") {
        std::ofstream(path) << "";
        CHECK(load_jsonl(path.string()).empty());
    }

    SUBCASE("missing obs2 names the line") {
        std::ofstream(path) << R"({"obs1":"a","obs2":"b"})" << "\n"
                            << R"({"obs1":"only"})" << "\n";
        try {
            load_jsonl(path.string());
            FAIL("expected parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    SUBCASE("malformed JSON names the line") {
        std::ofstream(path) << R"({"obs1":"a","obs2":"b"})" << "\n" << "{nope" << "\n";
        try {
            load_jsonl(path.string());
            FAIL("expected parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    std::filesystem::remove(path);
}

TEST_CASE("synth_corpus: determinism, inverse lookup, split discipline") {
    const SynthCorpus a = synth_corpus(1, 300);
    const SynthCorpus b = synth_corpus(1, 300);
    CHECK(a.train.size() == 300);
    CHECK(a.dev.size() == 50);
    CHECK(a.test.size() == 50);
    REQUIRE(b.train.size() == a.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].obs1 == b.train[i].obs1);
        CHECK(a.train[i].gold_hyps == b.train[i].gold_hyps);
    }

    SUBCASE("different seeds differ somewhere") {
        const SynthCorpus c = synth_corpus(2, 300);
        bool differs = false;
        for (std::size_t i = 0; i < a.train.size() && !differs; ++i) {
            differs = a.train[i].obs1 != c.train[i].obs1 ||
                      a.train[i].gold_hyps != c.train[i].gold_hyps;
        }
        CHECK(differs);
    }

    SUBCASE("every instance inverts to its unique gold hypothesis") {
        const Vocabulary v = world_vocab();
        for (const auto* split : {&a.train, &a.dev, &a.test}) {
            for (const auto& inst : *split) {
                REQUIRE(inst.gold_hyps.size() == 1);
                const auto inv = synth_inverse_hypothesis(inst.obs1, inst.obs2);
                REQUIRE(inv.has_value());
                CHECK(*inv == inst.gold_hyps[0]);
                // gold is in-vocabulary
                for (int id : v.tokenize(inst.gold_hyps[0])) CHECK(id != v.unk());
            }
        }
        CHECK_FALSE(synth_inverse_hypothesis("not from", "this world").has_value());
    }

    SUBCASE("splits are disjoint on (agent, activity, mishap) triples") {
        auto key = [](const AbductiveInstance& x) { return x.obs1 + "|" + x.gold_hyps[0]; };
        std::set<std::string> train_keys, dev_keys, test_keys;
        for (const auto& x : a.train) train_keys.insert(key(x));
        for (const auto& x : a.dev) dev_keys.insert(key(x));
        for (const auto& x : a.test) test_keys.insert(key(x));
        for (const auto& k : dev_keys) {
            CHECK(train_keys.count(k) == 0);
            CHECK(test_keys.count(k) == 0);
        }
        for (const auto& k : test_keys) CHECK(train_keys.count(k) == 0);
    }

    SUBCASE("size floor enforced") {
        CHECK_THROWS_AS(synth_corpus(1, 29), std::invalid_argument);
    }
}

TEST_CASE("encoding separates distinct observation pairs") {
    const Vocabulary v = world_vocab();
    AbductiveInstance a, b, c;
    a.obs1 = "mia wanted to bake a cake";
    a.obs2 = "mia threw the broken oven away";
    b = a;
    b.obs1 = "ben wanted to bake a cake";
    c = a;
    c.obs2 = "mia looked for the oven everywhere";
    const auto ea = encode_instance(v, a, EncodeVariant::Base, nullptr, 128);
    const auto eb = encode_instance(v, b, EncodeVariant::Base, nullptr, 128);
    const auto ec = encode_instance(v, c, EncodeVariant::Base, nullptr, 128);
    CHECK(ea.context != eb.context);
    CHECK(ea.context != ec.context);
    // same pair re-encodes identically regardless of surface whitespace/case
    AbductiveInstance d = a;
    d.obs1 = "  MIA wanted   to bake a cake ";
    CHECK(encode_instance(v, d, EncodeVariant::Base, nullptr, 128).context == ea.context);
}
