#pragma once

#include <memory>
#include <string>
#include <vector>

#include "anlg/data.hpp"
#include "anlg/model.hpp"
#include "anlg/types.hpp"
#include "anlg/vocab.hpp"

// Automatic evaluation. All metrics normalize text first (lowercase, trim,
// collapse whitespace) and score on whitespace tokens. meteor_simple and
// embed_score are simplified stand-ins (exact-match alignment; toy-encoder
// greedy cosine matching) and are not comparable to the published METEOR /
// BERTScore numbers; every report carries that footnote.
// Formula details and the hand-computed worksheets live in docs/metrics.md.

namespace anlg::metrics {

// Corpus BLEU-4: geometric mean of clipped n-gram precisions (n=1..4) times
// the brevity penalty, x100. Zero matched counts at an order smooth to
// 1/(2 * candidate n-gram count); orders with no candidate n-grams are
// skipped.
double bleu4(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references);

// LCS F1 (beta = 1), max over references, x100.
double rouge_l(const std::string& prediction, const std::vector<std::string>& references);

// Unigram exact-match with leftmost-greedy alignment:
// F_mean = 10PR/(R+9P), penalty = 0.5*(chunks/matches)^3,
// score = F_mean*(1-penalty), max over references, x100.
double meteor_simple(const std::string& prediction, const std::vector<std::string>& references);

// CIDEr-D: TF-IDF n-gram cosine with clipped candidate counts and a Gaussian
// length penalty (sigma = 6, token lengths), averaged over n = 1..4 and over
// references, corpus mean x10. IDF comes from the evaluation set references.
double cider(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references);

// Per-token vectors for embed_score.
class TokenEncoder {
  public:
    virtual ~TokenEncoder() = default;
    virtual Mat encode(const std::string& text) const = 0;  // tokens x d
};

// Tokens encoded by the toy LM's residual stream (after the last block).
class LmTokenEncoder : public TokenEncoder {
  public:
    LmTokenEncoder(const Vocabulary& vocab, const lm::Parameters& params)
        : vocab_(&vocab), params_(&params) {}
    Mat encode(const std::string& text) const override;

  private:
    const Vocabulary* vocab_;
    const lm::Parameters* params_;
};

// Greedy cosine matching F1 over per-token vectors, max over references,
// x100. Not comparable to published BERTScore numbers.
double embed_score(const std::string& prediction, const std::vector<std::string>& references,
                   const TokenEncoder& encoder);

struct MetricsReport {
    double bleu4 = 0.0;
    double meteor = 0.0;   // meteor_simple
    double rouge_l = 0.0;
    double cider = 0.0;
    double embed = 0.0;    // embed_score; 0 when no encoder given
    int count = 0;
    bool embed_available = false;
};

// Applies every metric; references come from the instances' gold hypotheses.
// Throws on length mismatch or an instance without references.
MetricsReport evaluate_corpus(const std::vector<std::string>& predictions,
                              const std::vector<AbductiveInstance>& instances,
                              const TokenEncoder* encoder = nullptr);

enum class MetricKind { Bleu4, Meteor, RougeL, Cider, Embed };

const char* metric_name(MetricKind k);
std::optional<MetricKind> metric_from_name(std::string_view name);

// Per-instance scores under one metric (for failure ranking). BLEU applies
// the corpus formula to the single pair; CIDEr uses corpus-level IDF.
std::vector<double> per_instance_scores(MetricKind kind,
                                        const std::vector<std::string>& predictions,
                                        const std::vector<AbductiveInstance>& instances,
                                        const TokenEncoder* encoder = nullptr);

}  // namespace anlg::metrics
