// Acceptance suite: one pass/fail line per criterion, exit code = failures.
// Criteria run against the shipped synthetic corpus, shipped defaults, and
// fixed seeds; every tolerance is pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "anlg/data.hpp"
#include "anlg/decoding.hpp"
#include "anlg/harness.hpp"
#include "anlg/kernels.hpp"
#include "anlg/metrics.hpp"
#include "anlg/model.hpp"
#include "anlg/oracle.hpp"
#include "anlg/rng.hpp"
#include "anlg/training.hpp"

using namespace anlg;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void criterion(int id, const std::string& name,
               const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, name, ok, detail, secs);
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1e-5, std::fabs(a), std::fabs(b)});
}

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

lm::Parameters random_params(const lm::ModelConfig& cfg, std::uint64_t seed, double scale = 0.3) {
    lm::Parameters p = lm::zero_params(cfg);
    Rng rng(seed);
    for (auto& a : lm::param_arrays(p)) {
        const bool gain = a.name.find("_g") != std::string::npos;
        for (std::size_t i = 0; i < a.count; ++i) {
            a.data[i] = (gain ? 1.0 : 0.0) + scale * rng.normal();
        }
    }
    return p;
}

SoftSeq random_soft(int length, int vocab, std::uint64_t seed) {
    SoftSeq s(length, vocab);
    Rng rng(seed);
    for (int t = 0; t < length; ++t) {
        double sum = 0.0;
        for (int i = 0; i < vocab; ++i) {
            const double x = 0.05 + rng.uniform();
            s.p.at(t, i) = x;
            sum += x;
        }
        for (int i = 0; i < vocab; ++i) s.p.at(t, i) /= sum;
    }
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("missing file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"anlg"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return harness::run_cli(static_cast<int>(argv.size()), argv.data());
}

double exact_match(const std::vector<std::string>& hyps,
                   const std::vector<AbductiveInstance>& insts) {
    int hit = 0;
    for (std::size_t i = 0; i < insts.size(); ++i) {
        hit += normalize_text(hyps[i]) == normalize_text(insts[i].gold_hyps[0]);
    }
    return static_cast<double>(hit) / static_cast<double>(insts.size());
}

}  // namespace

int main() {
    std::printf("acceptance suite (kernel backend: %s)\n",
                kern::backend_name(kern::backend()));

    const Vocabulary vocab = Vocabulary::build(synth_vocabulary());
    const SynthCorpus corpus = synth_corpus(1, 300);

    // -----------------------------------------------------------------
    criterion(1, "metric identity suite on 50 synthetic instances", [&](std::string& detail) {
        const auto& set = corpus.test;  // 50 instances
        std::vector<std::string> self, disjoint;
        for (const auto& inst : set) {
            self.push_back(inst.gold_hyps[0]);
            disjoint.push_back("qq ww ee rr");  // shares no token with any gold
        }
        const lm::Parameters enc_params = random_params(small_cfg(vocab.size()), 11);
        const metrics::LmTokenEncoder encoder(vocab, enc_params);

        const auto ident = metrics::evaluate_corpus(self, set, &encoder);
        double meteor_expected = 0.0;
        for (const auto& inst : set) {
            const double len = static_cast<double>(vocab.tokenize(inst.gold_hyps[0]).size());
            meteor_expected += 100.0 * (1.0 - 0.5 / (len * len * len));
        }
        meteor_expected /= static_cast<double>(set.size());

        const auto junk = metrics::evaluate_corpus(disjoint, set, nullptr);
        std::ostringstream ss;
        ss << "identity bleu4 " << ident.bleu4 << ", rouge_l " << ident.rouge_l << ", meteor "
           << ident.meteor << " (expected " << meteor_expected << "), embed " << ident.embed
           << "; disjoint bleu4 " << junk.bleu4 << ", rouge_l " << junk.rouge_l << ", meteor "
           << junk.meteor;
        detail = ss.str();
        return std::fabs(ident.bleu4 - 100.0) <= 1e-6 && std::fabs(ident.rouge_l - 100.0) <= 1e-6 &&
               std::fabs(ident.meteor - meteor_expected) <= 1e-6 &&
               std::fabs(ident.embed - 100.0) <= 1e-6 && junk.bleu4 == 0.0 &&
               junk.rouge_l == 0.0 && junk.meteor == 0.0;
    });

    // -----------------------------------------------------------------
    criterion(2, "golden metric worksheets", [&](std::string& detail) {
        const double b = metrics::bleu4({"the cat sat on the mat"}, {{"the cat sat on a mat"}});
        const double r = metrics::rouge_l("a b c d", {"a c d e"});
        const double c = metrics::cider({"a cat sat on the mat", "the dog ran fast", "birds fly"},
                                        {{"a cat sat on the mat"},
                                         {"a dog ran very fast"},
                                         {"fish swim"}});
        std::ostringstream ss;
        ss << "bleu " << b << " vs 53.7284965911771, rouge " << r << " vs 75, cider " << c
           << " vs 4.176723142653695";
        detail = ss.str();
        return std::fabs(b - 53.7284965911771) <= 1e-6 && std::fabs(r - 75.0) <= 1e-6 &&
               std::fabs(c - 4.176723142653695) <= 1e-6;
    });

    // -----------------------------------------------------------------
    criterion(3, "gradient audit vs central finite differences, 20 seeds", [&](std::string& detail) {
        const auto mc = small_cfg(24);
        double worst = 0.0;
        int checks = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const lm::Parameters p = random_params(mc, seed);
            Rng rng(1000 + seed);

            // forward_soft gradient through a weighted logit sum
            {
                const TokenSeq hard = {static_cast<int>(seed % 24), 3};
                SoftSeq s = random_soft(3, mc.vocab_size, seed);
                lm::Input in = lm::to_input(hard);
                lm::append_soft(in, s);
                const lm::Forward f = lm::forward(p, in);
                Mat w(f.T, mc.vocab_size);
                for (auto& x : w.v) x = rng.normal();
                lm::InputGrads ig;
                lm::backward(p, in, f, w, nullptr, &ig);
                auto weighted = [&](const lm::Input& q) {
                    const lm::Forward ff = lm::forward(p, q);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < ff.logits.v.size(); ++i) acc += w.v[i] * ff.logits.v[i];
                    return acc;
                };
                const double h = 5e-5;
                for (int t = 2; t < 5; ++t) {
                    const int i = rng.below(mc.vocab_size);
                    lm::Input plus = in, minus = in;
                    plus[t].dist[i] += h;
                    minus[t].dist[i] -= h;
                    const double fd = (weighted(plus) - weighted(minus)) / (2 * h);
                    worst = std::max(worst, rel_err(ig.items[t][i], fd));
                    ++checks;
                }
            }

            // nll_loss parameter gradients (sampled entries)
            {
                AbductiveInstance inst = corpus.train[seed % corpus.train.size()];
                const Vocabulary& v = vocab;
                lm::ModelConfig mc2 = small_cfg(v.size());
                lm::Parameters q = random_params(mc2, seed + 40);
                const EncodedInstance e =
                    encode_instance(v, inst, EncodeVariant::Base, nullptr, mc2.max_len);
                train::LossResult lr = train::nll_loss(q, e, train::Variant::Base, nullptr);
                auto grads = lm::param_arrays(lr.grads);
                auto arrays = lm::param_arrays(q);
                const double h = 1e-5;
                for (int s = 0; s < 6; ++s) {
                    const std::size_t a = rng.below(static_cast<int>(arrays.size()));
                    const std::size_t i = rng.below(static_cast<int>(arrays[a].count));
                    const double keep = arrays[a].data[i];
                    arrays[a].data[i] = keep + h;
                    const double up = train::nll_value(q, e, train::Variant::Base, nullptr);
                    arrays[a].data[i] = keep - h;
                    const double dn = train::nll_value(q, e, train::Variant::Base, nullptr);
                    arrays[a].data[i] = keep;
                    worst = std::max(worst, rel_err(grads[a].data[i], (up - dn) / (2 * h)));
                    ++checks;
                }
            }

            // energy gradient w.r.t. the soft hypothesis
            {
                const TokenSeq o1 = {1, 2, 3};
                const TokenSeq o2 = {4, 5};
                const SoftSeq s = random_soft(3, mc.vocab_size, 70 + seed);
                Mat g;
                decode::energy_grad(p, s, o1, o2, 1.0, 1.0, &g);
                const double h = 5e-5;
                for (int t = 0; t < 3; ++t) {
                    const int i = rng.below(mc.vocab_size);
                    SoftSeq plus = s, minus = s;
                    plus.p.at(t, i) += h;
                    minus.p.at(t, i) -= h;
                    const double fd = (decode::energy(p, plus, o1, o2, 1.0, 1.0).total -
                                       decode::energy(p, minus, o1, o2, 1.0, 1.0).total) /
                                      (2 * h);
                    worst = std::max(worst, rel_err(g.at(t, i), fd));
                    ++checks;
                }
            }
        }
        std::ostringstream ss;
        ss << checks << " derivatives, worst relative error " << worst;
        detail = ss.str();
        return worst < 1e-3;
    });

    // -----------------------------------------------------------------
    criterion(4, "one-hot soft/hard equivalence on 100 random sequences", [&](std::string& detail) {
        const auto mc = small_cfg(24);
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const lm::Parameters p = random_params(mc, 3000 + seed);
            Rng rng(seed);
            TokenSeq s(2 + rng.below(6));
            for (auto& id : s) id = rng.below(mc.vocab_size);
            const Mat hard = lm::forward_logits(p, s);
            const Mat soft = lm::forward_soft(p, SoftSeq::one_hot(mc.vocab_size, s));
            for (std::size_t i = 0; i < hard.v.size(); ++i) {
                worst = std::max(worst, std::fabs(hard.v[i] - soft.v[i]));
            }
        }
        detail = "worst elementwise gap " + std::to_string(worst);
        return worst < 1e-5;
    });

    // -----------------------------------------------------------------
    // shared supervised model for criteria 5, 6 and 8
    lm::ModelConfig toy;
    toy.vocab_size = vocab.size();
    const train::TrainConfig default_tc;  // shipped defaults
    train::TrainResult base_fit;
    criterion(5, "supervised toy reproduction: >=90% train EM, >=60% dev EM", [&](std::string& detail) {
        base_fit = train::fit(lm::init_params(toy, 1), default_tc, corpus.train, corpus.dev, vocab);
        decode::DecodeConfig dc;
        dc.strategy = decode::Strategy::Greedy;
        dc.max_len = 8;
        std::vector<std::string> train_hyps, dev_hyps;
        for (const auto& inst : corpus.train) {
            train_hyps.push_back(decode::decode_standard(base_fit.params, vocab, inst, dc).text);
        }
        for (const auto& inst : corpus.dev) {
            dev_hyps.push_back(decode::decode_standard(base_fit.params, vocab, inst, dc).text);
        }
        const double train_em = exact_match(train_hyps, corpus.train);
        const double dev_em = exact_match(dev_hyps, corpus.dev);
        std::ostringstream ss;
        ss << "train EM " << 100 * train_em << "%, dev EM " << 100 * dev_em << "% after "
           << default_tc.epochs << " epochs";
        detail = ss.str();
        return train_em >= 0.90 && dev_em >= 0.60;
    });

    // -----------------------------------------------------------------
    criterion(6, "knowledge pathway: 18 embeddings consumed, nonzero dev-loss margin",
              [&](std::string& detail) {
        const RuleTableProvider provider =
            RuleTableProvider::from_file(vocab, "configs/comet_rules.tsv");
        const lm::Parameters probe = random_params(small_cfg(vocab.size()), 5);
        const KnowledgeBundle kb =
            make_bundle(provider, corpus.train[0].obs1, corpus.train[0].obs2, probe);
        if (kb.entries.size() != 18) {
            detail = "bundle size " + std::to_string(kb.entries.size());
            return false;
        }
        // structurally: 17 embeddings must be rejected, 18 accepted
        const EncodedInstance enc = encode_instance(vocab, corpus.train[0], EncodeVariant::Base,
                                                    nullptr, probe.config.max_len);
        KnowledgeBundle short_kb = kb;
        short_kb.entries.pop_back();
        bool rejected = false;
        try {
            train::nll_value(probe, enc, train::Variant::KnowledgeEmb, &short_kb);
        } catch (const std::invalid_argument&) {
            rejected = true;
        }
        const double with18 = train::nll_value(probe, enc, train::Variant::KnowledgeEmb, &kb);

        train::TrainConfig ktc = default_tc;
        ktc.variant = train::Variant::KnowledgeEmb;
        const train::TrainResult kfit =
            train::fit(lm::init_params(toy, 1), ktc, corpus.train, corpus.dev, vocab, &provider);
        const double base_dev = base_fit.curve.back().loss;
        const double emb_dev = kfit.curve.back().loss;
        std::ostringstream ss;
        ss << "dev loss base " << base_dev << " vs knowledge_emb " << emb_dev << " (margin "
           << std::fabs(base_dev - emb_dev) << ")";
        detail = ss.str();
        return rejected && std::isfinite(with18) && std::fabs(base_dev - emb_dev) > 0.0;
    });

    // -----------------------------------------------------------------
    criterion(7, "decoder-vs-oracle audit: >=70% vs greedy, brute-force bound", [&](std::string& detail) {
        harness::AuditConfig ac;  // 50 instances, seed 9
        const harness::AuditResult r = harness::run_oracle_audit(ac);
        std::ostringstream ss;
        ss << "delorean >= greedy on " << 100 * r.frac_delorean_ge_greedy << "%, cold on "
           << 100 * r.frac_cold_ge_greedy << "%, bound "
           << (r.oracle_bound_ok ? "respected" : "VIOLATED");
        detail = ss.str();
        return r.frac_delorean_ge_greedy >= 0.70 && r.frac_cold_ge_greedy >= 0.70 &&
               r.oracle_bound_ok;
    });

    // -----------------------------------------------------------------
    criterion(8, "qualitative ordering: supervised greedy beats both unsupervised decoders",
              [&](std::string& detail) {
        // the unsupervised decoders run on an LM that never saw hypotheses
        const train::TrainResult lm_fit =
            train::pretrain_lm(lm::init_params(toy, 1), default_tc, corpus.train, corpus.dev, vocab);

        decode::DecodeConfig dg;
        dg.strategy = decode::Strategy::Greedy;
        dg.max_len = 8;
        decode::DecodeConfig dd;
        dd.strategy = decode::Strategy::Delorean;
        dd.max_len = 5;
        decode::DecodeConfig dc;
        dc.strategy = decode::Strategy::Cold;
        dc.max_len = 5;

        std::vector<std::string> sup, dlr, cold;
        for (std::size_t i = 0; i < corpus.test.size(); ++i) {
            const AbductiveInstance& inst = corpus.test[i];
            sup.push_back(decode::decode_standard(base_fit.params, vocab, inst, dg).text);
            TokenSeq o1 = {vocab.bos()};
            const TokenSeq t1 = vocab.tokenize(inst.obs1);
            o1.insert(o1.end(), t1.begin(), t1.end());
            const TokenSeq o2 = vocab.tokenize(inst.obs2);
            decode::DecodeConfig di = dd;
            di.seed = i;
            dlr.push_back(decode::decode_delorean(lm_fit.params, o1, o2, di, &vocab).text);
            decode::DecodeConfig ci = dc;
            ci.seed = i;
            cold.push_back(decode::decode_cold(lm_fit.params, o1, o2, ci, &vocab).text);
        }
        const auto m_sup = metrics::evaluate_corpus(sup, corpus.test);
        const auto m_dlr = metrics::evaluate_corpus(dlr, corpus.test);
        const auto m_cold = metrics::evaluate_corpus(cold, corpus.test);
        std::ostringstream ss;
        ss << "cider sup " << m_sup.cider << " vs delorean " << m_dlr.cider << " / cold "
           << m_cold.cider << "; bleu4 sup " << m_sup.bleu4 << " vs " << m_dlr.bleu4 << " / "
           << m_cold.bleu4;
        detail = ss.str();
        return m_sup.cider > m_dlr.cider && m_sup.cider > m_cold.cider &&
               m_sup.bleu4 > m_dlr.bleu4 && m_sup.bleu4 > m_cold.bleu4;
    });

    // -----------------------------------------------------------------
    criterion(9, "degenerate-config equalities, token-exact on 20 instances each",
              [&](std::string& detail) {
        const auto mc = small_cfg(vocab.size());
        int fails = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const lm::Parameters p = random_params(mc, 500 + seed, 0.4);
            const AbductiveInstance& inst = corpus.train[seed];

            decode::DecodeConfig g;
            g.strategy = decode::Strategy::Greedy;
            g.max_len = 5;
            decode::DecodeConfig b1 = g;
            b1.strategy = decode::Strategy::Beam;
            b1.beam_width = 1;
            fails += decode::decode_standard(p, vocab, inst, g).tokens !=
                     decode::decode_standard(p, vocab, inst, b1).tokens;

            const TokenSeq o1 = vocab.tokenize(inst.obs1);
            const TokenSeq o2 = vocab.tokenize(inst.obs2);
            decode::DecodeConfig fw;
            fw.strategy = decode::Strategy::Delorean;
            fw.max_len = 3;
            fw.delorean_iters = 0;
            decode::DecodeConfig mixed = fw;
            mixed.delorean_mix = 1.0;
            mixed.delorean_iters = 3;
            fails += decode::decode_delorean(p, o1, o2, fw).tokens !=
                     decode::decode_delorean(p, o1, o2, mixed).tokens;

            // k = 1 discretization is the greedy continuation of the prefix
            const SoftSeq soft = random_soft(4, mc.vocab_size, 900 + seed);
            const TokenSeq guided = decode::discretize(soft, p, o1, 1);
            TokenSeq reference;
            lm::Input cur = lm::to_input(o1);
            for (int t = 0; t < 4; ++t) {
                const lm::Forward f = lm::forward(p, cur);
                const double* row = f.logits.row(f.T - 1);
                int best = 0;
                for (int i = 1; i < mc.vocab_size; ++i) {
                    if (row[i] > row[best]) best = i;
                }
                reference.push_back(best);
                cur.push_back(lm::InputItem::tok(best));
            }
            fails += guided != reference;
        }
        detail = fails == 0 ? "all 60 identities exact" : std::to_string(fails) + " mismatches";
        return fails == 0;
    });

    // -----------------------------------------------------------------
    criterion(10, "byte-identical pipeline reruns (manifest excluded)", [&](std::string& detail) {
        const fs::path root = fs::temp_directory_path() / "anlg_acceptance_determinism";
        fs::remove_all(root);
        fs::create_directories(root);
        auto p = [&](const std::string& s) { return (root / s).string(); };

        // identical configs both passes: same paths, dirs wiped in between
        const std::vector<std::string> artifacts = {
            "data/train.jsonl", "data/dev.jsonl",        "data/test.jsonl",
            "data/vocab.txt",   "data/config.resolved",  "run/checkpoint.bin",
            "run/loss_curve.csv", "run/config.resolved", "dec/predictions.jsonl",
            "dec/traces.jsonl", "dec/report.json",       "dec/report.md",
            "dec/config.resolved",
        };
        auto run_pipeline = [&]() -> bool {
            return run_cli({"synth", "--seed", "7", "--size", "30", "--dev-size", "4",
                            "--test-size", "4", "--out", p("data")}) == 0 &&
                   run_cli({"train", "--data", p("data"), "--out", p("run"), "--variant", "base",
                            "--epochs", "3", "--d-model", "16", "--d-ff", "32", "--seed",
                            "5"}) == 0 &&
                   run_cli({"decode", "--model", p("run"), "--data", p("data") + "/test.jsonl",
                            "--out", p("dec"), "--strategy", "cold", "--max-hyp-len", "3",
                            "--cold-iters", "15", "--seed", "3", "--name", "det"}) == 0;
        };
        if (!run_pipeline()) {
            detail = "first pipeline pass failed";
            return false;
        }
        std::vector<std::string> first;
        for (const auto& a : artifacts) first.push_back(slurp(root / a));
        fs::remove_all(root);
        fs::create_directories(root);
        if (!run_pipeline()) {
            detail = "second pipeline pass failed";
            return false;
        }
        for (std::size_t i = 0; i < artifacts.size(); ++i) {
            if (slurp(root / artifacts[i]) != first[i]) {
                detail = "differs: " + artifacts[i];
                return false;
            }
        }
        fs::remove_all(root);
        detail = std::to_string(artifacts.size()) + " artifacts byte-identical across reruns";
        return true;
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures ? "FAILURE" : "SUCCESS", g_failures);
    return g_failures ? 1 : 0;
}
