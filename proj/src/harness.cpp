#include "anlg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "anlg/kernels.hpp"
#include "anlg/oracle.hpp"
#include "anlg/rng.hpp"

namespace anlg::harness {

// ---------------------------------------------------------------------------
// Predictions / traces

std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open predictions: " + path);
    std::vector<Prediction> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Prediction p;
            p.id = j.at("id").get<std::string>();
            p.hypothesis = j.at("hypothesis").get<std::string>();
            p.score = j.at("score").get<double>();
            p.strategy = j.at("strategy").get<std::string>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void append_predictions(const std::string& path, const std::vector<Prediction>& preds) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot write predictions: " + path);
    for (const auto& p : preds) {
        nlohmann::json j;
        j["id"] = p.id;
        j["hypothesis"] = p.hypothesis;
        j["score"] = p.score;
        j["strategy"] = p.strategy;
        out << j.dump() << '\n';
    }
}

void append_traces(const std::string& path, const std::string& id,
                   const std::vector<decode::TraceRow>& trace) {
    if (trace.empty()) return;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot write traces: " + path);
    for (const auto& row : trace) {
        nlohmann::json j;
        j["id"] = id;
        j["iteration"] = row.iteration;
        j["energy_total"] = row.energy_total;
        j["energy_fluency"] = row.energy_fluency;
        j["energy_future"] = row.energy_future;
        if (std::isfinite(row.objective)) j["objective"] = row.objective;
        j["candidate_text"] = row.candidate_text;
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Manifest / reports

void write_manifest(const std::string& run_dir, const std::string& command, const Config& cfg,
                    double seconds) {
    nlohmann::json j;
    j["tool"] = "anlg";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["kernel_backend"] = kern::backend_name(kern::backend());
    j["timing_seconds"] = seconds;
    nlohmann::json seeds = nlohmann::json::object();
    for (const auto& [k, v] : cfg.entries()) {
        if (k == "seed" || (k.size() > 5 && k.substr(k.size() - 5) == ".seed")) seeds[k] = v;
    }
    j["seeds"] = seeds;
    j["config"] = nlohmann::json::object();
    for (const auto& [k, v] : cfg.entries()) j["config"][k] = v;
    std::ofstream out(std::filesystem::path(run_dir) / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + run_dir);
    out << j.dump(2) << '\n';
}

namespace {

nlohmann::json metrics_json(const metrics::MetricsReport& m) {
    nlohmann::json j;
    j["bleu4"] = m.bleu4;
    j["meteor_simple"] = m.meteor;
    j["rouge_l"] = m.rouge_l;
    j["cider"] = m.cider;
    if (m.embed_available) j["embed_score"] = m.embed;
    j["count"] = m.count;
    return j;
}

constexpr const char* kFootnote =
    "\\* simplified variants: METEOR* is exact-match `meteor_simple`, Embed* is the toy-encoder "
    "`embed_score`; neither is comparable to published METEOR or BERTScore numbers.";

std::string fmt2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}

}  // namespace

void write_report_json(const std::string& path, const std::vector<RunReport>& runs) {
    nlohmann::json j;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : runs) {
        nlohmann::json e;
        e["name"] = r.name;
        e["strategy"] = r.strategy;
        e["variant"] = r.variant;
        e["metrics"] = metrics_json(r.metrics);
        j["runs"].push_back(e);
    }
    j["notes"] = kFootnote;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump(2) << '\n';
}

std::vector<RunReport> load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<RunReport> out;
    for (const auto& e : j.at("runs")) {
        RunReport r;
        r.name = e.at("name").get<std::string>();
        r.strategy = e.at("strategy").get<std::string>();
        r.variant = e.at("variant").get<std::string>();
        const auto& m = e.at("metrics");
        r.metrics.bleu4 = m.at("bleu4").get<double>();
        r.metrics.meteor = m.at("meteor_simple").get<double>();
        r.metrics.rouge_l = m.at("rouge_l").get<double>();
        r.metrics.cider = m.at("cider").get<double>();
        if (m.contains("embed_score")) {
            r.metrics.embed = m.at("embed_score").get<double>();
            r.metrics.embed_available = true;
        }
        r.metrics.count = m.at("count").get<int>();
        out.push_back(std::move(r));
    }
    return out;
}

void write_report_md(const std::string& path, const std::vector<RunReport>& runs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << "| Model | Bleu-4 | METEOR* | ROUGE-L | Cider | Embed* |\n";
    out << "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : runs) {
        out << "| " << r.name << " (" << r.variant << "/" << r.strategy << ") | "
            << fmt2(r.metrics.bleu4) << " | " << fmt2(r.metrics.meteor) << " | "
            << fmt2(r.metrics.rouge_l) << " | " << fmt2(r.metrics.cider) << " | "
            << (r.metrics.embed_available ? fmt2(r.metrics.embed) : std::string("n/a")) << " |\n";
    }
    out << '\n' << kFootnote << '\n';
}

// ---------------------------------------------------------------------------
// Failure report

std::string failure_report(const std::vector<AbductiveInstance>& instances,
                           const std::vector<std::vector<Prediction>>& model_predictions,
                           const std::vector<std::string>& model_names, int n,
                           metrics::MetricKind metric, const metrics::TokenEncoder* encoder) {
    if (model_predictions.empty() || model_predictions.size() != model_names.size()) {
        throw std::invalid_argument("failure_report: need one name per predictions set");
    }
    // order and rank by the first model's predictions
    std::vector<std::string> first_preds;
    std::vector<std::vector<std::string>> rows(instances.size(),
                                               std::vector<std::string>(model_names.size()));
    for (std::size_t m = 0; m < model_predictions.size(); ++m) {
        std::map<std::string, std::string> by_id;
        for (const auto& p : model_predictions[m]) by_id[p.id] = p.hypothesis;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            // id-less datasets fall back to the corpus index, like decode does
            const std::string id =
                instances[i].id.empty() ? std::to_string(i) : instances[i].id;
            auto it = by_id.find(id);
            rows[i][m] = it == by_id.end() ? "" : it->second;
        }
    }
    for (std::size_t i = 0; i < instances.size(); ++i) first_preds.push_back(rows[i][0]);

    const std::vector<double> scores =
        metrics::per_instance_scores(metric, first_preds, instances, encoder);
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    if (n < static_cast<int>(order.size())) order.resize(n);  // n > corpus clamps

    std::string out;
    out += "# Failure cases (lowest " + std::to_string(order.size()) + " by " +
           metrics::metric_name(metric) + ", ascending)\n";
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t i = order[rank];
        const AbductiveInstance& inst = instances[i];
        out += "\n## case " + std::to_string(rank + 1) + ": " +
               (inst.id.empty() ? std::to_string(i) : inst.id) + " (" +
               metrics::metric_name(metric) + " = " + fmt2(scores[i]) + ")\n\n";
        out += "- past observation: " + inst.obs1 + "\n";
        out += "- future observation: " + inst.obs2 + "\n";
        out += "- gold hypothesis: " + (inst.gold_hyps.empty() ? "" : inst.gold_hyps[0]) + "\n";
        for (std::size_t m = 0; m < model_names.size(); ++m) {
            out += "- hypothesis[" + model_names[m] + "]: " + rows[i][m] + "\n";
        }
        out += "- category:\n";  // filled in by hand
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decoder-vs-oracle audit

AuditConfig::AuditConfig() {
    delorean.strategy = decode::Strategy::Delorean;
    delorean.max_len = hyp_len;
    cold.strategy = decode::Strategy::Cold;
    cold.max_len = hyp_len;
    cold.cold_iters = 120;
    cold.cold_step = 0.05;
    cold.noise_start = 0.1;
    cold.noise_min = 0.001;
    cold.top_k = 4;
}

AuditResult run_oracle_audit(const AuditConfig& cfg) {
    lm::ModelConfig mc;
    mc.vocab_size = cfg.vocab;
    mc.d_model = 16;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.d_ff = 32;
    mc.max_len = 16;

    // successor chains x, x+1, ..., x+4 (mod vocab)
    Rng rng(cfg.seed);
    std::vector<train::SeqExample> chains;
    for (int i = 0; i < cfg.train_chains; ++i) {
        const int x = rng.below(cfg.vocab);
        train::SeqExample ex;
        ex.conditioning = {x};
        for (int j = 1; j <= 4; ++j) ex.target.push_back((x + j) % cfg.vocab);
        chains.push_back(std::move(ex));
    }
    train::TrainConfig tc;
    tc.lr = cfg.lr;
    tc.epochs = cfg.epochs;
    tc.batch_size = 8;
    tc.seed = cfg.seed;
    lm::Parameters params =
        train::fit_sequences(lm::init_params(mc, cfg.seed), tc, chains, {}).params;

    AuditResult result;
    int ge_d = 0, ge_c = 0, en_c = 0;
    std::vector<int> subset(cfg.vocab);
    std::iota(subset.begin(), subset.end(), 0);
    const SoftSeq flat = SoftSeq::uniform(cfg.vocab, cfg.hyp_len);

    for (int i = 0; i < cfg.instances; ++i) {
        AuditRow row;
        const int x = rng.below(cfg.vocab);
        row.o1 = {x, (x + 1) % cfg.vocab};
        row.o2 = {(x + 2 + cfg.hyp_len) % cfg.vocab, (x + 3 + cfg.hyp_len) % cfg.vocab};

        // greedy baseline: hypothesis-length greedy continuation of o1
        const TokenSeq greedy = decode::discretize(flat, params, row.o1, 1);
        row.obj_greedy = oracle::objective(params, greedy, row.o1, row.o2);

        decode::DecodeConfig dc = cfg.delorean;
        dc.seed = cfg.seed + i;
        row.obj_delorean = decode::decode_delorean(params, row.o1, row.o2, dc).score;

        decode::DecodeConfig cc = cfg.cold;
        cc.seed = cfg.seed + i;
        const decode::DecodeResult cold = decode::decode_cold(params, row.o1, row.o2, cc);
        row.obj_cold = cold.score;
        const double cold_energy =
            decode::energy(params, SoftSeq::one_hot(cfg.vocab, cold.tokens), row.o1, row.o2,
                           cc.w_fluency, cc.w_future)
                .total;
        const double greedy_energy =
            decode::energy(params, SoftSeq::one_hot(cfg.vocab, greedy), row.o1, row.o2,
                           cc.w_fluency, cc.w_future)
                .total;
        if (cold_energy <= greedy_energy + 1e-9) ++en_c;

        row.obj_oracle =
            oracle::brute_force_best(params, row.o1, row.o2, cfg.hyp_len, subset).objective;

        if (row.obj_delorean >= row.obj_greedy) ++ge_d;
        if (row.obj_cold >= row.obj_greedy) ++ge_c;
        if (row.obj_delorean > row.obj_oracle + 1e-9 || row.obj_cold > row.obj_oracle + 1e-9) {
            result.oracle_bound_ok = false;
        }
        result.rows.push_back(std::move(row));
    }
    result.frac_delorean_ge_greedy = static_cast<double>(ge_d) / cfg.instances;
    result.frac_cold_ge_greedy = static_cast<double>(ge_c) / cfg.instances;
    result.frac_cold_energy_le_greedy = static_cast<double>(en_c) / cfg.instances;
    return result;
}

}  // namespace anlg::harness
