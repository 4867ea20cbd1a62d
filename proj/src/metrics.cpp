#include "anlg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace anlg::metrics {

namespace {

constexpr double kCiderSigma = 6.0;

std::vector<std::string> norm_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(normalize_text(text));
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

// n-grams keyed as unit-separator-joined strings
using NgramCounts = std::unordered_map<std::string, double>;

NgramCounts count_ngrams(const std::vector<std::string>& toks, int n) {
    NgramCounts out;
    if (static_cast<int>(toks.size()) < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key = toks[i];
        for (int j = 1; j < n; ++j) {
            key.push_back('\x1f');
            key += toks[i + j];
        }
        out[key] += 1.0;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// BLEU-4

double bleu4(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references) {
    if (predictions.size() != references.size()) {
        throw std::invalid_argument("bleu4: predictions/references length mismatch");
    }
    double matched[5] = {0, 0, 0, 0, 0};
    double total[5] = {0, 0, 0, 0, 0};
    long pred_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (references[i].empty()) throw std::invalid_argument("bleu4: empty reference list");
        const auto pt = norm_tokens(predictions[i]);
        pred_len += static_cast<long>(pt.size());

        // closest reference length; ties toward the shorter
        long best_rl = 0;
        long best_diff = -1;
        for (const auto& r : references[i]) {
            const long rl = static_cast<long>(norm_tokens(r).size());
            const long diff = std::labs(rl - static_cast<long>(pt.size()));
            if (best_diff < 0 || diff < best_diff || (diff == best_diff && rl < best_rl)) {
                best_diff = diff;
                best_rl = rl;
            }
        }
        ref_len += best_rl;

        for (int n = 1; n <= 4; ++n) {
            const NgramCounts pn = count_ngrams(pt, n);
            NgramCounts best;
            for (const auto& r : references[i]) {
                for (const auto& [g, c] : count_ngrams(norm_tokens(r), n)) {
                    best[g] = std::max(best[g], c);
                }
            }
            for (const auto& [g, c] : pn) {
                total[n] += c;
                auto it = best.find(g);
                if (it != best.end()) matched[n] += std::min(c, it->second);
            }
        }
    }

    double log_sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= 4; ++n) {
        if (total[n] == 0.0) continue;  // order not measurable on this corpus
        // smoothing covers the higher orders only; unigram misses mean zero
        if (matched[n] == 0.0 && n == 1) return 0.0;
        const double p = matched[n] > 0.0 ? matched[n] / total[n] : 1.0 / (2.0 * total[n]);
        log_sum += std::log(p);
        ++orders;
    }
    if (orders == 0) return 0.0;
    const double bp =
        pred_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / std::max<long>(1, pred_len));
    return 100.0 * bp * std::exp(log_sum / orders);
}

// ---------------------------------------------------------------------------
// ROUGE-L

namespace {

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge_l(const std::string& prediction, const std::vector<std::string>& references) {
    if (references.empty()) throw std::invalid_argument("rouge_l: empty reference list");
    const auto pt = norm_tokens(prediction);
    double best = 0.0;
    for (const auto& r : references) {
        const auto rt = norm_tokens(r);
        if (pt.empty() || rt.empty()) continue;
        const int l = lcs_length(pt, rt);
        if (l == 0) continue;
        const double p = static_cast<double>(l) / pt.size();
        const double rec = static_cast<double>(l) / rt.size();
        best = std::max(best, 2.0 * p * rec / (p + rec));
    }
    return 100.0 * best;
}

// ---------------------------------------------------------------------------
// METEOR (simplified, exact match only)

double meteor_simple(const std::string& prediction, const std::vector<std::string>& references) {
    if (references.empty()) throw std::invalid_argument("meteor_simple: empty reference list");
    const auto pt = norm_tokens(prediction);
    double best = 0.0;
    for (const auto& r : references) {
        const auto rt = norm_tokens(r);
        if (pt.empty() || rt.empty()) continue;
        std::vector<bool> used(rt.size(), false);
        std::vector<std::pair<int, int>> align;  // (pred pos, ref pos), leftmost-greedy
        for (std::size_t i = 0; i < pt.size(); ++i) {
            for (std::size_t j = 0; j < rt.size(); ++j) {
                if (!used[j] && rt[j] == pt[i]) {
                    used[j] = true;
                    align.emplace_back(static_cast<int>(i), static_cast<int>(j));
                    break;
                }
            }
        }
        const int m = static_cast<int>(align.size());
        if (m == 0) continue;
        int chunks = 1;
        for (int k = 1; k < m; ++k) {
            if (align[k].first != align[k - 1].first + 1 ||
                align[k].second != align[k - 1].second + 1) {
                ++chunks;
            }
        }
        const double p = static_cast<double>(m) / pt.size();
        const double rec = static_cast<double>(m) / rt.size();
        const double f_mean = 10.0 * p * rec / (rec + 9.0 * p);
        const double frag = static_cast<double>(chunks) / m;
        const double penalty = 0.5 * frag * frag * frag;
        best = std::max(best, f_mean * (1.0 - penalty));
    }
    return 100.0 * best;
}

// ---------------------------------------------------------------------------
// CIDEr-D

namespace {

struct CiderIdf {
    NgramCounts df;  // instances whose reference set contains the n-gram
    double m = 0.0;  // instance count

    double idf(const std::string& g) const {
        auto it = df.find(g);
        const double d = it == df.end() ? 0.0 : it->second;
        return std::log(m / std::max(1.0, d));
    }
};

CiderIdf cider_idf(const std::vector<std::vector<std::string>>& references) {
    CiderIdf out;
    out.m = static_cast<double>(references.size());
    for (const auto& refs : references) {
        NgramCounts seen;
        for (const auto& r : refs) {
            const auto rt = norm_tokens(r);
            for (int n = 1; n <= 4; ++n) {
                for (const auto& [g, c] : count_ngrams(rt, n)) seen[g] = 1.0;
            }
        }
        for (const auto& [g, one] : seen) out.df[g] += 1.0;
    }
    return out;
}

struct TfIdfVec {
    NgramCounts w[5];
    double norm[5] = {0, 0, 0, 0, 0};
    int len = 0;
};

TfIdfVec tfidf(const std::vector<std::string>& toks, const CiderIdf& idf) {
    TfIdfVec v;
    v.len = static_cast<int>(toks.size());
    for (int n = 1; n <= 4; ++n) {
        double sq = 0.0;
        for (const auto& [g, c] : count_ngrams(toks, n)) {
            const double w = c * idf.idf(g);
            v.w[n][g] = w;
            sq += w * w;
        }
        v.norm[n] = std::sqrt(sq);
    }
    return v;
}

double cider_instance(const std::vector<std::string>& pt, const std::vector<std::string>& refs,
                      const CiderIdf& idf) {
    const TfIdfVec pv = tfidf(pt, idf);
    double inst = 0.0;
    for (const auto& r : refs) {
        const auto rt = norm_tokens(r);
        const TfIdfVec rv = tfidf(rt, idf);
        const double delta = static_cast<double>(pv.len - rv.len);
        const double penalty = std::exp(-delta * delta / (2.0 * kCiderSigma * kCiderSigma));
        double sum = 0.0;
        for (int n = 1; n <= 4; ++n) {
            if (pv.norm[n] == 0.0 || rv.norm[n] == 0.0) continue;
            double num = 0.0;
            for (const auto& [g, w] : pv.w[n]) {
                auto it = rv.w[n].find(g);
                if (it == rv.w[n].end()) continue;
                num += std::min(w, it->second) * it->second;  // clipped candidate count
            }
            sum += penalty * num / (pv.norm[n] * rv.norm[n]);
        }
        inst += sum / 4.0;
    }
    return inst / static_cast<double>(refs.size());
}

}  // namespace

double cider(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references) {
    if (predictions.size() != references.size()) {
        throw std::invalid_argument("cider: predictions/references length mismatch");
    }
    if (predictions.empty()) return 0.0;
    const CiderIdf idf = cider_idf(references);
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (references[i].empty()) throw std::invalid_argument("cider: empty reference list");
        total += cider_instance(norm_tokens(predictions[i]), references[i], idf);
    }
    return 10.0 * total / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// embed_score

Mat LmTokenEncoder::encode(const std::string& text) const {
    const TokenSeq toks = vocab_->tokenize(text);
    if (toks.empty()) return Mat(0, params_->config.d_model);
    return lm::hidden_states(*params_, toks);
}

namespace {

double cosine(const double* a, const double* b, int d) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int i = 0; i < d; ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace

double embed_score(const std::string& prediction, const std::vector<std::string>& references,
                   const TokenEncoder& encoder) {
    if (references.empty()) throw std::invalid_argument("embed_score: empty reference list");
    const Mat pm = encoder.encode(normalize_text(prediction));
    double best = 0.0;
    for (const auto& r : references) {
        const Mat rm = encoder.encode(normalize_text(r));
        if (pm.rows == 0 || rm.rows == 0) continue;
        double p = 0.0;
        for (int i = 0; i < pm.rows; ++i) {
            double mx = -1.0;
            for (int j = 0; j < rm.rows; ++j) mx = std::max(mx, cosine(pm.row(i), rm.row(j), pm.cols));
            p += mx;
        }
        p /= pm.rows;
        double rec = 0.0;
        for (int j = 0; j < rm.rows; ++j) {
            double mx = -1.0;
            for (int i = 0; i < pm.rows; ++i) mx = std::max(mx, cosine(pm.row(i), rm.row(j), pm.cols));
            rec += mx;
        }
        rec /= rm.rows;
        if (p + rec > 0.0) best = std::max(best, 2.0 * p * rec / (p + rec));
    }
    return 100.0 * best;
}

// ---------------------------------------------------------------------------
// Corpus aggregation

MetricsReport evaluate_corpus(const std::vector<std::string>& predictions,
                              const std::vector<AbductiveInstance>& instances,
                              const TokenEncoder* encoder) {
    if (predictions.size() != instances.size()) {
        throw std::invalid_argument("evaluate_corpus: predictions/instances length mismatch");
    }
    std::vector<std::vector<std::string>> refs;
    refs.reserve(instances.size());
    for (const auto& inst : instances) {
        if (inst.gold_hyps.empty()) {
            throw std::invalid_argument("evaluate_corpus: instance " + inst.id +
                                        " has no references");
        }
        refs.push_back(inst.gold_hyps);
    }
    MetricsReport r;
    r.count = static_cast<int>(predictions.size());
    if (predictions.empty()) return r;
    r.bleu4 = bleu4(predictions, refs);
    r.cider = cider(predictions, refs);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        r.rouge_l += rouge_l(predictions[i], refs[i]);
        r.meteor += meteor_simple(predictions[i], refs[i]);
        if (encoder) r.embed += embed_score(predictions[i], refs[i], *encoder);
    }
    r.rouge_l /= r.count;
    r.meteor /= r.count;
    if (encoder) {
        r.embed /= r.count;
        r.embed_available = true;
    }
    return r;
}

const char* metric_name(MetricKind k) {
    switch (k) {
        case MetricKind::Bleu4: return "bleu4";
        case MetricKind::Meteor: return "meteor_simple";
        case MetricKind::RougeL: return "rouge_l";
        case MetricKind::Cider: return "cider";
        case MetricKind::Embed: return "embed_score";
    }
    return "?";
}

std::optional<MetricKind> metric_from_name(std::string_view name) {
    for (MetricKind k : {MetricKind::Bleu4, MetricKind::Meteor, MetricKind::RougeL,
                         MetricKind::Cider, MetricKind::Embed}) {
        if (name == metric_name(k)) return k;
    }
    if (name == "meteor") return MetricKind::Meteor;
    if (name == "embed") return MetricKind::Embed;
    return std::nullopt;
}

std::vector<double> per_instance_scores(MetricKind kind,
                                        const std::vector<std::string>& predictions,
                                        const std::vector<AbductiveInstance>& instances,
                                        const TokenEncoder* encoder) {
    if (predictions.size() != instances.size()) {
        throw std::invalid_argument("per_instance_scores: length mismatch");
    }
    if (kind == MetricKind::Embed && !encoder) {
        throw std::invalid_argument("per_instance_scores: embed metric needs an encoder");
    }
    std::vector<std::vector<std::string>> refs;
    for (const auto& inst : instances) {
        if (inst.gold_hyps.empty()) {
            throw std::invalid_argument("per_instance_scores: instance " + inst.id +
                                        " has no references");
        }
        refs.push_back(inst.gold_hyps);
    }
    CiderIdf idf;
    if (kind == MetricKind::Cider) idf = cider_idf(refs);

    std::vector<double> out(predictions.size(), 0.0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        switch (kind) {
            case MetricKind::Bleu4:
                out[i] = bleu4({predictions[i]}, {refs[i]});
                break;
            case MetricKind::Meteor:
                out[i] = meteor_simple(predictions[i], refs[i]);
                break;
            case MetricKind::RougeL:
                out[i] = rouge_l(predictions[i], refs[i]);
                break;
            case MetricKind::Cider:
                out[i] = 10.0 * cider_instance(norm_tokens(predictions[i]), refs[i], idf);
                break;
            case MetricKind::Embed:
                out[i] = embed_score(predictions[i], refs[i], *encoder);
                break;
        }
    }
    return out;
}

}  // namespace anlg::metrics
