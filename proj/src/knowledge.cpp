#include "anlg/knowledge.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace anlg {

std::vector<Vec> KnowledgeBundle::embeddings() const {
    std::vector<Vec> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.embedding);
    return out;
}

namespace {

// last-resort templates so infer_text is total even with a sparse table
const char* generic_inference(Relation r) {
    switch (r) {
        case Relation::oEffect: return "others are affected";
        case Relation::oReact: return "others feel something";
        case Relation::oWant: return "others want something";
        case Relation::xAttr: return "person x is ordinary";
        case Relation::xEffect: return "person x is affected";
        case Relation::xIntent: return "to do something";
        case Relation::xNeed: return "to have something";
        case Relation::xReact: return "person x feels something";
        case Relation::xWant: return "person x wants something";
    }
    return "something happens";
}

}  // namespace

RuleTableProvider::RuleTableProvider(const Vocabulary& vocab, std::string table_text)
    : vocab_(&vocab) {
    std::istringstream in(std::move(table_text));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw std::runtime_error("rule table line " + std::to_string(lineno) +
                                     ": expected relation<TAB>pattern<TAB>inference");
        }
        const std::string rel_name = line.substr(0, tab1);
        const auto rel = relation_from_name(rel_name);
        if (!rel) {
            throw std::runtime_error("rule table line " + std::to_string(lineno) +
                                     ": unknown relation " + rel_name);
        }
        Rule r;
        r.relation = *rel;
        const std::string raw_pattern = line.substr(tab1 + 1, tab2 - tab1 - 1);
        r.pattern = raw_pattern == "*" ? "*" : normalize_text(raw_pattern);
        r.text = normalize_text(line.substr(tab2 + 1));
        if (r.text.empty()) {
            throw std::runtime_error("rule table line " + std::to_string(lineno) +
                                     ": empty inference text");
        }
        rules_.push_back(std::move(r));
    }
}

RuleTableProvider RuleTableProvider::from_file(const Vocabulary& vocab, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rule table: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return RuleTableProvider(vocab, ss.str());
}

std::string RuleTableProvider::infer_text(const std::string& observation, Relation relation) const {
    if (observation.empty()) throw std::invalid_argument("infer_text: empty observation");
    const std::string norm = normalize_text(observation);
    for (const auto& r : rules_) {
        if (r.relation != relation) continue;
        if (r.pattern == "*" || norm.find(r.pattern) != std::string::npos) return r.text;
    }
    return generic_inference(relation);
}

Vec RuleTableProvider::infer_embedding(const std::string& observation, Relation relation,
                                       const lm::Parameters& params) const {
    const std::string text = infer_text(observation, relation);
    const TokenSeq tokens = vocab_->tokenize(text);
    Vec out(params.config.d_model, 0.0);
    if (tokens.empty()) return out;
    const Mat h = lm::hidden_states(params, tokens);
    for (int t = 0; t < h.rows; ++t) {
        for (int j = 0; j < h.cols; ++j) out[j] += h.at(t, j);
    }
    for (auto& x : out) x /= h.rows;
    return out;
}

lm::Parameters knowledge_encoder_params(const lm::ModelConfig& config, std::uint64_t seed) {
    // the model's initial parameters, frozen. With the zeroed embedding table
    // the pooled vectors mostly reflect inference length and position; richer
    // encoders (random embedding tables) trained measurably worse on the
    // synthetic corpus, so the simple choice stands.
    return lm::init_params(config, seed);
}

KnowledgeBundle make_bundle(const KnowledgeProvider& provider, const std::string& obs1,
                            const std::string& obs2, const lm::Parameters& params) {
    KnowledgeBundle b;
    b.provider = provider.name();
    b.entries.reserve(18);
    for (int slot = 0; slot < 2; ++slot) {
        const std::string& obs = slot == 0 ? obs1 : obs2;
        for (Relation r : kAllRelations) {
            KnowledgeEntry e;
            e.slot = slot;
            e.relation = r;
            e.text = provider.infer_text(obs, r);
            e.embedding = provider.infer_embedding(obs, r, params);
            b.entries.push_back(std::move(e));
        }
    }
    return b;
}

}  // namespace anlg
