#include "anlg/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "anlg/rng.hpp"

namespace anlg {

namespace {

// collapse whitespace runs, trim; case is preserved (tokenize lowercases)
std::string collapse_ws(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSONL I/O

std::vector<AbductiveInstance> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::vector<AbductiveInstance> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": invalid JSON: " + e.what());
        }
        AbductiveInstance inst;
        try {
            if (!j.contains("obs1") || !j.contains("obs2")) {
                throw std::runtime_error("missing obs1/obs2");
            }
            inst.obs1 = collapse_ws(j.at("obs1").get<std::string>());
            inst.obs2 = collapse_ws(j.at("obs2").get<std::string>());
            if (j.contains("id")) inst.id = j.at("id").get<std::string>();
            if (j.contains("hyps")) {
                for (const auto& h : j.at("hyps")) {
                    inst.gold_hyps.push_back(collapse_ws(h.get<std::string>()));
                }
            } else {
                // ART-style aliases
                for (const char* key : {"hyp", "hyp1", "hyp2"}) {
                    if (j.contains(key) && j.at(key).is_string()) {
                        inst.gold_hyps.push_back(collapse_ws(j.at(key).get<std::string>()));
                    }
                }
            }
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
        if (inst.obs1.empty() || inst.obs2.empty()) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": obs1 and obs2 must be nonempty");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

void save_jsonl(const std::string& path, const std::vector<AbductiveInstance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    for (const auto& inst : instances) {
        nlohmann::json j;
        if (!inst.id.empty()) j["id"] = inst.id;
        j["obs1"] = inst.obs1;
        j["obs2"] = inst.obs2;
        j["hyps"] = inst.gold_hyps;
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Encoding

EncodedInstance encode_instance(const Vocabulary& vocab, const AbductiveInstance& inst,
                                EncodeVariant variant, const KnowledgeBundle* knowledge,
                                int max_len, const std::string* hyp_override) {
    if (inst.obs1.empty() || inst.obs2.empty()) {
        throw std::invalid_argument("encode_instance: empty observation");
    }
    EncodedInstance e;
    const TokenSeq o1 = vocab.tokenize(inst.obs1);
    const TokenSeq o2 = vocab.tokenize(inst.obs2);
    e.m = static_cast<int>(o1.size());
    e.n = static_cast<int>(o2.size());

    e.context.push_back(vocab.bos());
    e.context.push_back(vocab.o1_open());
    e.context.insert(e.context.end(), o1.begin(), o1.end());
    e.context.push_back(vocab.o1_close());
    e.context.push_back(vocab.o2_open());
    e.context.insert(e.context.end(), o2.begin(), o2.end());
    e.context.push_back(vocab.o2_close());

    if (variant == EncodeVariant::KnowledgeText) {
        if (!knowledge) {
            throw std::invalid_argument("encode_instance: knowledge_text variant needs a bundle");
        }
        if (knowledge->entries.size() != 18) {
            throw std::invalid_argument("encode_instance: bundle must have 18 entries");
        }
        for (const auto& entry : knowledge->entries) {
            e.context.push_back(vocab.rel_marker(entry.relation));
            const TokenSeq t = vocab.tokenize(entry.text);
            e.context.insert(e.context.end(), t.begin(), t.end());
            e.knowledge_len += 1 + static_cast<int>(t.size());
        }
    }

    std::string hyp;
    if (hyp_override) {
        hyp = *hyp_override;
    } else if (!inst.gold_hyps.empty()) {
        hyp = inst.gold_hyps.front();
    }
    if (!hyp.empty()) {
        e.target = vocab.tokenize(hyp);
        e.target.push_back(vocab.eos());
    }
    e.N = static_cast<int>(e.target.size());

    int total = static_cast<int>(e.context.size() + e.target.size());
    while (total > max_len && e.knowledge_len > 0) {
        e.context.pop_back();
        --e.knowledge_len;
        --total;
    }
    if (total > max_len) {
        throw std::length_error("encoded instance length " + std::to_string(total) +
                                " exceeds max_len " + std::to_string(max_len));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Synthetic world

namespace {

constexpr std::array<const char*, 8> kAgents = {"mia", "ben", "ava", "leo",
                                                "sam", "zoe", "max", "ida"};

struct Activity {
    const char* phrase;
    std::array<const char*, 4> items;
};

constexpr std::array<Activity, 6> kActivities = {{
    {"bake a cake", {"eggs", "flour", "oven", "bowl"}},
    {"paint the fence", {"brush", "ladder", "roller", "bucket"}},
    {"fix the bike", {"wrench", "pump", "chain", "lamp"}},
    {"plant a garden", {"seeds", "shovel", "rake", "pots"}},
    {"sew a dress", {"needle", "thread", "fabric", "button"}},
    {"build a shelf", {"hammer", "nails", "wood", "drill"}},
}};

constexpr std::array<const char*, 2> kVerbs = {"broke", "lost"};

struct Triple {
    int agent, activity, verb, item;
};

std::string make_obs1(const Triple& t) {
    return std::string(kAgents[t.agent]) + " wanted to " + kActivities[t.activity].phrase;
}

std::string make_hyp(const Triple& t) {
    return std::string(kAgents[t.agent]) + " " + kVerbs[t.verb] + " the " +
           kActivities[t.activity].items[t.item];
}

std::string make_obs2(const Triple& t) {
    const std::string agent = kAgents[t.agent];
    const std::string item = kActivities[t.activity].items[t.item];
    if (t.verb == 0) return agent + " threw the broken " + item + " away";
    return agent + " looked for the " + item + " everywhere";
}

AbductiveInstance make_instance(const Triple& t, const std::string& id) {
    AbductiveInstance inst;
    inst.id = id;
    inst.obs1 = make_obs1(t);
    inst.obs2 = make_obs2(t);
    inst.gold_hyps = {make_hyp(t)};
    return inst;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

std::string pad4(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    return buf;
}

}  // namespace

SynthCorpus synth_corpus(std::uint64_t seed, int size, const WorldConfig& config) {
    if (size < 30) throw std::invalid_argument("synth_corpus: size must be >= 30");
    if (config.n_agents < 1 || config.n_agents > static_cast<int>(kAgents.size()) ||
        config.n_activities < 1 || config.n_activities > static_cast<int>(kActivities.size())) {
        throw std::invalid_argument("synth_corpus: world config out of range");
    }
    const int dev_size = config.dev_size >= 0 ? config.dev_size : size / 6;
    const int test_size = config.test_size >= 0 ? config.test_size : size / 6;

    std::vector<Triple> triples;
    for (int a = 0; a < config.n_agents; ++a) {
        for (int g = 0; g < config.n_activities; ++g) {
            for (int v = 0; v < 2; ++v) {
                for (int i = 0; i < 4; ++i) triples.push_back({a, g, v, i});
            }
        }
    }
    if (dev_size + test_size + 1 > static_cast<int>(triples.size())) {
        throw std::invalid_argument("synth_corpus: dev+test sizes exhaust the world");
    }

    Rng rng(seed);
    rng.shuffle(triples);

    SynthCorpus c;
    int pos = 0;
    for (int i = 0; i < test_size; ++i) c.test.push_back(make_instance(triples[pos++], "test-" + pad4(i)));
    for (int i = 0; i < dev_size; ++i) c.dev.push_back(make_instance(triples[pos++], "dev-" + pad4(i)));
    const int pool = static_cast<int>(triples.size()) - pos;
    for (int i = 0; i < size; ++i) {
        const Triple& t = triples[pos + rng.below(pool)];
        c.train.push_back(make_instance(t, "train-" + pad4(i)));
    }
    return c;
}

std::vector<std::string> synth_vocabulary() {
    std::vector<std::string> words;
    for (const char* a : kAgents) words.push_back(a);
    for (const char* w : {"wanted", "to", "the", "a"}) words.push_back(w);
    for (const auto& act : kActivities) {
        for (const auto& w : split_words(act.phrase)) words.push_back(w);
        for (const char* item : act.items) words.push_back(item);
    }
    for (const char* v : kVerbs) words.push_back(v);
    for (const char* w : {"threw", "broken", "away", "looked", "for", "everywhere"}) {
        words.push_back(w);
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

std::optional<std::string> synth_inverse_hypothesis(const std::string& obs1,
                                                    const std::string& obs2) {
    const auto w1 = split_words(normalize_text(obs1));
    const auto w2 = split_words(normalize_text(obs2));
    if (w1.size() < 4 || w2.size() != 6) return std::nullopt;
    if (w1[1] != "wanted" || w1[2] != "to") return std::nullopt;

    int agent = -1;
    for (std::size_t i = 0; i < kAgents.size(); ++i) {
        if (w1[0] == kAgents[i]) agent = static_cast<int>(i);
    }
    if (agent < 0 || w2[0] != kAgents[agent]) return std::nullopt;

    std::string phrase = w1[3];
    for (std::size_t i = 4; i < w1.size(); ++i) phrase += " " + w1[i];
    int activity = -1;
    for (std::size_t g = 0; g < kActivities.size(); ++g) {
        if (phrase == kActivities[g].phrase) activity = static_cast<int>(g);
    }
    if (activity < 0) return std::nullopt;

    int verb;
    std::string item;
    if (w2[1] == "threw" && w2[2] == "the" && w2[3] == "broken" && w2[5] == "away") {
        verb = 0;
        item = w2[4];
    } else if (w2[1] == "looked" && w2[2] == "for" && w2[3] == "the" && w2[5] == "everywhere") {
        verb = 1;
        item = w2[4];
    } else {
        return std::nullopt;
    }

    for (int i = 0; i < 4; ++i) {
        if (item == kActivities[activity].items[i]) {
            return make_hyp({agent, activity, verb, i});
        }
    }
    return std::nullopt;
}

}  // namespace anlg
