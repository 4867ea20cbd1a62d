#include "anlg/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "anlg/kernels.hpp"
#include "anlg/oracle.hpp"
#include "anlg/rng.hpp"

namespace anlg::decode {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Greedy: return "greedy";
        case Strategy::Beam: return "beam";
        case Strategy::TopP: return "top_p";
        case Strategy::Delorean: return "delorean";
        case Strategy::Cold: return "cold";
    }
    return "?";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
    for (Strategy s : {Strategy::Greedy, Strategy::Beam, Strategy::TopP, Strategy::Delorean,
                       Strategy::Cold}) {
        if (name == strategy_name(s)) return s;
    }
    return std::nullopt;
}

void DecodeConfig::validate() const {
    // step sizes admit 0 so the degenerate identities (null dynamics, fixed
    // point) stay expressible
    if (max_len < 1) throw std::invalid_argument("decode config: max_len must be >= 1");
    if (temperature <= 0.0) throw std::invalid_argument("decode config: temperature must be > 0");
    if (top_p <= 0.0 || top_p > 1.0) throw std::invalid_argument("decode config: top_p in (0,1]");
    if (beam_width < 1) throw std::invalid_argument("decode config: beam width must be >= 1");
    if (delorean_mix < 0.0 || delorean_mix > 1.0) {
        throw std::invalid_argument("decode config: mixing weight must be in [0,1]");
    }
    if (delorean_step < 0.0 || cold_step < 0.0) {
        throw std::invalid_argument("decode config: step sizes must be >= 0");
    }
    if (delorean_iters < 0 || cold_iters < 0) {
        throw std::invalid_argument("decode config: iteration counts must be >= 0");
    }
    if (noise_start < 0.0 || noise_min < 0.0 || noise_min > noise_start) {
        throw std::invalid_argument("decode config: noise schedule must satisfy 0 <= min <= start");
    }
    if (w_fluency < 0.0 || w_future < 0.0 || (w_fluency == 0.0 && w_future == 0.0)) {
        throw std::invalid_argument("decode config: energy weights must be >= 0, not both zero");
    }
    if (top_k < 1) throw std::invalid_argument("decode config: top_k must be >= 1");
}

namespace {

std::string render(const TokenSeq& toks, const Vocabulary* vocab) {
    if (vocab) return vocab->detokenize(toks);
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) s.push_back(' ');
        s += std::to_string(toks[i]);
    }
    return s;
}

// argmax with smallest-id tie-break
int argmax_id(const double* row, int v) {
    int best = 0;
    for (int i = 1; i < v; ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

TokenSeq argmax_rows(const Mat& y) {
    TokenSeq out(y.rows);
    for (int t = 0; t < y.rows; ++t) out[t] = argmax_id(y.row(t), y.cols);
    return out;
}

SoftSeq softmax_rows(const Mat& y) {
    SoftSeq s(y.rows, y.cols);
    for (int t = 0; t < y.rows; ++t) {
        const Vec sm = lm::softmax_row(y.row(t), y.cols);
        std::copy(sm.begin(), sm.end(), s.row(t));
    }
    return s;
}

// next-token logits at hypothesis position t given o1 and soft rows < t;
// both the initialization pass and the mixing re-pass go through here
Vec step_logits(const lm::Parameters& params, const TokenSeq& o1, const Mat& y, int t) {
    lm::Input in = lm::to_input(o1);
    for (int tt = 0; tt < t; ++tt) {
        in.push_back(lm::InputItem::soft(lm::softmax_row(y.row(tt), y.cols)));
    }
    lm::Forward f = lm::forward(params, in);
    const double* row = f.logits.row(f.T - 1);
    return Vec(row, row + y.cols);
}

struct HypCandidate {
    TokenSeq tokens;
    double objective;
};

}  // namespace

// ---------------------------------------------------------------------------
// Supervised decoding

namespace {

struct Beam {
    TokenSeq toks;
    double lp = 0.0;
    bool done = false;
};

double normalized(const Beam& b) {
    return b.toks.empty() ? -1e300 : b.lp / static_cast<double>(b.toks.size());
}

DecodeResult run_greedy(const lm::Parameters& params, const lm::Input& cond, int eos,
                        const DecodeConfig& cfg) {
    DecodeResult r;
    lm::Input cur = cond;
    const int v = params.config.vocab_size;
    for (int step = 0; step < cfg.max_len; ++step) {
        lm::Forward f = lm::forward(params, cur);
        const Vec lsm = lm::log_softmax_row(f.logits.row(f.T - 1), v);
        const int pick = argmax_id(lsm.data(), v);
        r.score += lsm[pick];
        r.tokens.push_back(pick);
        cur.push_back(lm::InputItem::tok(pick));
        if (pick == eos) break;
    }
    r.score /= static_cast<double>(std::max<std::size_t>(1, r.tokens.size()));
    return r;
}

DecodeResult run_beam(const lm::Parameters& params, const lm::Input& cond, int eos,
                      const DecodeConfig& cfg) {
    const int v = params.config.vocab_size;
    std::vector<Beam> pool = {Beam{}};
    for (int step = 0; step < cfg.max_len; ++step) {
        bool any_alive = false;
        std::vector<Beam> candidates;
        for (const Beam& b : pool) {
            if (b.done) {
                candidates.push_back(b);
                continue;
            }
            any_alive = true;
            lm::Input cur = cond;
            for (int id : b.toks) cur.push_back(lm::InputItem::tok(id));
            lm::Forward f = lm::forward(params, cur);
            const Vec lsm = lm::log_softmax_row(f.logits.row(f.T - 1), v);
            for (int id = 0; id < v; ++id) {
                Beam nb = b;
                nb.toks.push_back(id);
                nb.lp += lsm[id];
                nb.done = id == eos;
                candidates.push_back(std::move(nb));
            }
        }
        if (!any_alive) break;
        std::sort(candidates.begin(), candidates.end(), [](const Beam& a, const Beam& b) {
            if (a.lp != b.lp) return a.lp > b.lp;
            return a.toks < b.toks;
        });
        if (static_cast<int>(candidates.size()) > cfg.beam_width) {
            candidates.resize(cfg.beam_width);
        }
        pool = std::move(candidates);
    }

    // best finished candidate by length-normalized log-prob, else best alive
    const Beam* best = nullptr;
    for (const Beam& b : pool) {
        if (!b.done) continue;
        if (!best || normalized(b) > normalized(*best) ||
            (normalized(b) == normalized(*best) && b.toks < best->toks)) {
            best = &b;
        }
    }
    if (!best) {
        for (const Beam& b : pool) {
            if (!best || normalized(b) > normalized(*best) ||
                (normalized(b) == normalized(*best) && b.toks < best->toks)) {
                best = &b;
            }
        }
    }
    DecodeResult r;
    if (best) {
        r.tokens = best->toks;
        r.score = normalized(*best);
    }
    return r;
}

DecodeResult run_top_p(const lm::Parameters& params, const lm::Input& cond, int eos,
                       const DecodeConfig& cfg) {
    DecodeResult r;
    Rng rng(cfg.seed);
    lm::Input cur = cond;
    const int v = params.config.vocab_size;
    Vec scaled(v);
    for (int step = 0; step < cfg.max_len; ++step) {
        lm::Forward f = lm::forward(params, cur);
        const double* row = f.logits.row(f.T - 1);
        for (int i = 0; i < v; ++i) scaled[i] = row[i] / cfg.temperature;
        const Vec probs = lm::softmax_row(scaled.data(), v);

        std::vector<int> order(v);
        for (int i = 0; i < v; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (probs[a] != probs[b]) return probs[a] > probs[b];
            return a < b;
        });
        double mass = 0.0;
        std::size_t keep = 0;
        while (keep < order.size()) {
            mass += probs[order[keep]];
            ++keep;
            if (mass >= cfg.top_p - 1e-12) break;
        }
        const double ru = rng.uniform() * mass;
        double acc = 0.0;
        int pick = order[keep - 1];
        for (std::size_t i = 0; i < keep; ++i) {
            acc += probs[order[i]];
            if (ru < acc) {
                pick = order[i];
                break;
            }
        }
        r.score += std::log(probs[pick] / mass);
        r.tokens.push_back(pick);
        cur.push_back(lm::InputItem::tok(pick));
        if (pick == eos) break;
    }
    r.score /= static_cast<double>(std::max<std::size_t>(1, r.tokens.size()));
    return r;
}

}  // namespace

DecodeResult decode_standard(const lm::Parameters& params, const Vocabulary& vocab,
                             const AbductiveInstance& inst, const DecodeConfig& cfg,
                             train::Variant variant, const KnowledgeBundle* knowledge) {
    cfg.validate();
    if (cfg.strategy != Strategy::Greedy && cfg.strategy != Strategy::Beam &&
        cfg.strategy != Strategy::TopP) {
        throw std::invalid_argument("decode_standard handles greedy/beam/top_p only");
    }
    const int reserve = cfg.max_len + (variant == train::Variant::KnowledgeEmb ? 18 : 0);
    if (reserve >= params.config.max_len) {
        throw std::invalid_argument("decode config: max_len leaves no room for the context");
    }
    const std::string empty_hyp;
    const EncodedInstance enc = encode_instance(
        vocab, inst,
        variant == train::Variant::KnowledgeText ? EncodeVariant::KnowledgeText
                                                 : EncodeVariant::Base,
        variant == train::Variant::KnowledgeText ? knowledge : nullptr,
        params.config.max_len - reserve, &empty_hyp);

    lm::Input cond;
    if (variant == train::Variant::KnowledgeEmb) {
        if (!knowledge || knowledge->entries.size() != 18) {
            throw std::invalid_argument("knowledge_emb decoding needs an 18-entry bundle");
        }
        for (const auto& e : knowledge->entries) cond.push_back(lm::InputItem::vector(e.embedding));
    }
    lm::append_tokens(cond, enc.context);

    DecodeResult r;
    switch (cfg.strategy) {
        case Strategy::Greedy: r = run_greedy(params, cond, vocab.eos(), cfg); break;
        case Strategy::Beam: r = run_beam(params, cond, vocab.eos(), cfg); break;
        default: r = run_top_p(params, cond, vocab.eos(), cfg); break;
    }
    TokenSeq text_toks = r.tokens;
    while (!text_toks.empty() && text_toks.back() == vocab.eos()) text_toks.pop_back();
    r.text = vocab.detokenize(text_toks);
    return r;
}

// ---------------------------------------------------------------------------
// Energy

EnergyBreakdown energy_grad(const lm::Parameters& params, const SoftSeq& soft_h,
                            const TokenSeq& o1, const TokenSeq& o2, double w_fluency,
                            double w_future, Mat* grad) {
    if (o1.empty()) throw std::invalid_argument("energy: empty past observation");
    const int T = soft_h.length();
    const int v = params.config.vocab_size;
    const int c = static_cast<int>(o1.size());
    if (T < 1) throw std::invalid_argument("energy: empty soft hypothesis");

    lm::Input full = lm::to_input(o1);
    lm::append_soft(full, soft_h);
    lm::append_tokens(full, o2);
    lm::Forward f = lm::forward(params, full);

    EnergyBreakdown bd;
    Mat dlogits;
    if (grad) dlogits = Mat(f.T, v);
    std::vector<Vec> fluency_lsm(T);
    for (int t = 0; t < T; ++t) {
        const int row = c - 1 + t;
        fluency_lsm[t] = lm::log_softmax_row(f.logits.row(row), v);
        bd.fluency -= kern::dot(v, soft_h.row(t), fluency_lsm[t].data());
        if (grad) {
            double* dl = dlogits.row(row);
            const double* p = soft_h.row(t);
            for (int i = 0; i < v; ++i) dl[i] = w_fluency * (std::exp(fluency_lsm[t][i]) - p[i]);
        }
    }
    for (std::size_t j = 0; j < o2.size(); ++j) {
        const int row = c + T - 1 + static_cast<int>(j);
        const Vec lsm = lm::log_softmax_row(f.logits.row(row), v);
        bd.future -= lsm[o2[j]];
        if (grad) {
            double* dl = dlogits.row(row);
            for (int i = 0; i < v; ++i) dl[i] = w_future * std::exp(lsm[i]);
            dl[o2[j]] -= w_future;
        }
    }
    bd.total = w_fluency * bd.fluency + w_future * bd.future;

    if (grad) {
        lm::InputGrads ig;
        lm::backward(params, full, f, dlogits, nullptr, &ig);
        *grad = Mat(T, v);
        for (int t = 0; t < T; ++t) {
            double* g = grad->row(t);
            const Vec& through = ig.items[c + t];
            for (int i = 0; i < v; ++i) {
                g[i] = through[i] - w_fluency * fluency_lsm[t][i];  // + direct CE term
            }
        }
    }
    return bd;
}

EnergyBreakdown energy(const lm::Parameters& params, const SoftSeq& soft_h, const TokenSeq& o1,
                       const TokenSeq& o2, double w_fluency, double w_future) {
    return energy_grad(params, soft_h, o1, o2, w_fluency, w_future, nullptr);
}

// ---------------------------------------------------------------------------
// Simplex projection

namespace {

void project_simplex(double* x, int n) {
    bool feasible = true;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (x[i] < 0.0) feasible = false;
        sum += x[i];
    }
    if (feasible && std::fabs(sum - 1.0) <= 1e-9) return;  // already on the simplex

    std::vector<double> u(x, x + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    for (int j = 0; j < n; ++j) {
        css += u[j];
        const double cand = (css - 1.0) / (j + 1);
        if (u[j] - cand > 0.0) {
            rho = j + 1;
            theta = cand;
        }
    }
    for (int i = 0; i < n; ++i) x[i] = std::max(x[i] - theta, 0.0);
    (void)rho;
}

}  // namespace

void project_simplex_rows(Mat& rows) {
    for (int t = 0; t < rows.rows; ++t) project_simplex(rows.row(t), rows.cols);
}

// ---------------------------------------------------------------------------
// Discretization

TokenSeq discretize(const SoftSeq& soft_h, const lm::Parameters& params, const TokenSeq& prefix,
                    int k) {
    if (k < 1) throw std::invalid_argument("discretize: k must be >= 1");
    if (prefix.empty()) throw std::invalid_argument("discretize: empty prefix");
    const int v = params.config.vocab_size;
    k = std::min(k, v);

    TokenSeq out;
    lm::Input cur = lm::to_input(prefix);
    std::vector<int> order(v);
    for (int t = 0; t < soft_h.length(); ++t) {
        lm::Forward f = lm::forward(params, cur);
        const double* row = f.logits.row(f.T - 1);
        for (int i = 0; i < v; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        });
        int pick = order[0];
        const double* mass = soft_h.row(t);
        for (int i = 1; i < k; ++i) {
            const int id = order[i];
            if (mass[id] > mass[pick] || (mass[id] == mass[pick] && id < pick)) pick = id;
        }
        out.push_back(pick);
        cur.push_back(lm::InputItem::tok(pick));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backprop-mix decoding

DecodeResult decode_delorean(const lm::Parameters& params, const TokenSeq& o1, const TokenSeq& o2,
                             const DecodeConfig& cfg, const Vocabulary* vocab) {
    cfg.validate();
    if (cfg.strategy != Strategy::Delorean) {
        throw std::invalid_argument("decode_delorean needs strategy=delorean");
    }
    if (o1.empty()) throw std::invalid_argument("decode_delorean: empty past observation");
    const int T = cfg.max_len;
    const int v = params.config.vocab_size;
    const int c = static_cast<int>(o1.size());

    Mat y(T, v);
    for (int t = 0; t < T; ++t) {
        const Vec l = step_logits(params, o1, y, t);
        std::copy(l.begin(), l.end(), y.row(t));
    }

    DecodeResult r;
    std::vector<HypCandidate> candidates;
    auto record = [&](int iter) {
        HypCandidate cand{argmax_rows(y), 0.0};
        cand.objective = oracle::objective(params, cand.tokens, o1, o2);
        const EnergyBreakdown bd =
            energy(params, softmax_rows(y), o1, o2, cfg.w_fluency, cfg.w_future);
        r.trace.push_back({iter, bd.total, bd.fluency, bd.future, cand.objective,
                           render(cand.tokens, vocab)});
        candidates.push_back(std::move(cand));
    };
    record(0);

    for (int iter = 1; iter <= cfg.delorean_iters; ++iter) {
        // backward pass: descend -log P(o2 | o1, softmax(y))
        const SoftSeq s = softmax_rows(y);
        lm::Input full = lm::to_input(o1);
        lm::append_soft(full, s);
        lm::append_tokens(full, o2);
        lm::Forward f = lm::forward(params, full);
        Mat dlogits(f.T, v);
        for (std::size_t j = 0; j < o2.size(); ++j) {
            const int row = c + T - 1 + static_cast<int>(j);
            const Vec lsm = lm::log_softmax_row(f.logits.row(row), v);
            double* dl = dlogits.row(row);
            for (int i = 0; i < v; ++i) dl[i] = std::exp(lsm[i]);
            dl[o2[j]] -= 1.0;
        }
        lm::InputGrads ig;
        lm::backward(params, full, f, dlogits, nullptr, &ig);

        for (int t = 0; t < T; ++t) {
            const Vec& dp = ig.items[c + t];
            const double* p = s.row(t);
            const double inner = kern::dot(v, dp.data(), p);
            double* yt = y.row(t);
            for (int i = 0; i < v; ++i) {
                const double dy = p[i] * (dp[i] - inner);  // softmax chain
                if (!std::isfinite(dy)) {
                    throw std::runtime_error("decode_delorean: non-finite gradient at iteration " +
                                             std::to_string(iter));
                }
                yt[i] -= cfg.delorean_step * dy;
            }
        }

        // forward re-pass, mixing per position
        for (int t = 0; t < T; ++t) {
            const Vec fl = step_logits(params, o1, y, t);
            double* yt = y.row(t);
            for (int i = 0; i < v; ++i) {
                yt[i] = cfg.delorean_mix * fl[i] + (1.0 - cfg.delorean_mix) * yt[i];
            }
        }
        record(iter);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].objective > candidates[best].objective) best = i;
    }
    r.tokens = candidates[best].tokens;
    r.text = render(r.tokens, vocab);
    r.score = candidates[best].objective;
    const TraceRow& last = r.trace.back();
    r.energy = {last.energy_total, last.energy_fluency, last.energy_future};
    return r;
}

// ---------------------------------------------------------------------------
// Energy Langevin decoding

DecodeResult decode_cold(const lm::Parameters& params, const TokenSeq& o1, const TokenSeq& o2,
                         const DecodeConfig& cfg, const Vocabulary* vocab) {
    cfg.validate();
    if (cfg.strategy != Strategy::Cold) {
        throw std::invalid_argument("decode_cold needs strategy=cold");
    }
    if (o1.empty()) throw std::invalid_argument("decode_cold: empty past observation");
    const int T = cfg.max_len;
    const int v = params.config.vocab_size;

    SoftSeq y(T, v);
    if (cfg.cold_init == ColdInit::Uniform) {
        y = SoftSeq::uniform(v, T);
    } else {
        Mat logits(T, v);
        for (int t = 0; t < T; ++t) {
            const Vec l = step_logits(params, o1, logits, t);
            std::copy(l.begin(), l.end(), logits.row(t));
        }
        y = softmax_rows(logits);
    }

    DecodeResult r;
    Rng rng(cfg.seed);
    const int steps = cfg.cold_iters;
    for (int k = 0; k <= steps; ++k) {
        Mat grad;
        const EnergyBreakdown bd = energy_grad(params, y, o1, o2, cfg.w_fluency, cfg.w_future,
                                               k < steps ? &grad : nullptr);
        if (!std::isfinite(bd.total)) {
            throw std::runtime_error("decode_cold: non-finite energy at iteration " +
                                     std::to_string(k));
        }
        // candidate objective is tracked per iteration only by the backprop
        // decoder; recomputing it every Langevin step would double the cost
        r.trace.push_back({k, bd.total, bd.fluency, bd.future,
                           std::numeric_limits<double>::quiet_NaN(),
                           render(argmax_rows(y.p), vocab)});
        if (k == steps) {
            r.energy = bd;
            break;
        }
        double sigma = cfg.noise_start;
        if (steps > 1) {
            sigma = cfg.noise_start *
                    std::pow(cfg.noise_min / std::max(cfg.noise_start, 1e-300),
                             static_cast<double>(k) / (steps - 1));
        }
        if (cfg.noise_start == 0.0) sigma = 0.0;
        for (int t = 0; t < T; ++t) {
            double* yt = y.row(t);
            const double* g = grad.row(t);
            for (int i = 0; i < v; ++i) {
                double upd = -cfg.cold_step * g[i];
                if (sigma > 0.0) upd += sigma * rng.normal();
                yt[i] += upd;
            }
        }
        project_simplex_rows(y.p);
    }

    r.tokens = discretize(y, params, o1, cfg.top_k);
    r.text = render(r.tokens, vocab);
    r.score = oracle::objective(params, r.tokens, o1, o2);
    return r;
}

}  // namespace anlg::decode
