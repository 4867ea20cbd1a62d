#pragma once

#include <memory>
#include <string>
#include <vector>

#include "anlg/model.hpp"
#include "anlg/types.hpp"
#include "anlg/vocab.hpp"

// Pluggable commonsense-inference provider: maps (observation, relation) to
// an inference as text and as a d-vector, and assembles the 18-entry bundle
// (9 relations x 2 observation slots).

namespace anlg {

struct KnowledgeEntry {
    int slot = 0;  // 0 = past observation, 1 = future observation
    Relation relation = Relation::oEffect;
    std::string text;
    Vec embedding;  // d entries
};

struct KnowledgeBundle {
    std::vector<KnowledgeEntry> entries;  // always 18, o1 relations first
    std::string provider;

    std::vector<Vec> embeddings() const;
};

class KnowledgeProvider {
  public:
    virtual ~KnowledgeProvider() = default;
    virtual std::string name() const = 0;
    // Deterministic, never empty.
    virtual std::string infer_text(const std::string& observation, Relation relation) const = 0;
    // Finite d-vector, deterministic given params.
    virtual Vec infer_embedding(const std::string& observation, Relation relation,
                                const lm::Parameters& params) const = 0;
};

// Deterministic rule-table provider. Rows are
//   relation <TAB> pattern <TAB> inference-text
// ('#' comments allowed). The first row whose relation matches and whose
// pattern occurs in the normalized observation wins; "*" matches anything.
// Inference vectors mean-pool the model's residual stream (after the last
// block, before the final layernorm) over the inference text.
class RuleTableProvider : public KnowledgeProvider {
  public:
    RuleTableProvider(const Vocabulary& vocab, std::string table_text);
    static RuleTableProvider from_file(const Vocabulary& vocab, const std::string& path);

    std::string name() const override { return "rules"; }
    std::string infer_text(const std::string& observation, Relation relation) const override;
    Vec infer_embedding(const std::string& observation, Relation relation,
                        const lm::Parameters& params) const override;

    std::size_t rule_count() const { return rules_.size(); }

  private:
    struct Rule {
        Relation relation;
        std::string pattern;  // normalized; "*" matches anything
        std::string text;
    };
    const Vocabulary* vocab_;
    std::vector<Rule> rules_;
};

// Assembles the 18 entries in stable order: o1 under each relation in
// declaration order, then o2.
KnowledgeBundle make_bundle(const KnowledgeProvider& provider, const std::string& obs1,
                            const std::string& obs2, const lm::Parameters& params);

// The frozen encoder behind knowledge embeddings: the model's initial
// parameters, reconstructible anywhere from the checkpoint's (config, seed)
// so training- and decode-time bundles always match.
lm::Parameters knowledge_encoder_params(const lm::ModelConfig& config, std::uint64_t seed);

}  // namespace anlg
