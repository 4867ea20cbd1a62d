#pragma once

#include <string>
#include <vector>

#include "anlg/config.hpp"
#include "anlg/data.hpp"
#include "anlg/decoding.hpp"
#include "anlg/metrics.hpp"
#include "anlg/model.hpp"
#include "anlg/training.hpp"

// Experiment orchestration: run directories, predictions/trace files,
// Table-shaped reports, failure dumps, and the decoder-vs-brute-force audit.
//
// Run directory layout (see README):
//   config.resolved   loss_curve.csv     predictions.jsonl   report.json
//   manifest.json     checkpoint*.bin    traces.jsonl        report.md
//   vocab.txt

namespace anlg::harness {

inline constexpr const char* kToolVersion = "0.1.0";

struct Prediction {
    std::string id;
    std::string hypothesis;
    double score = 0.0;
    std::string strategy;
};

std::vector<Prediction> load_predictions(const std::string& path);
void append_predictions(const std::string& path, const std::vector<Prediction>& preds);

// One row per trace entry: {"id", "iteration", "energy_total",
// "energy_fluency", "energy_future", "objective"?, "candidate_text"}.
void append_traces(const std::string& path, const std::string& id,
                   const std::vector<decode::TraceRow>& trace);

// manifest.json carries tool version, the command, every seed used, the
// kernel backend, and wall-clock timing (timing makes it the one run artifact
// that is not byte-reproducible).
void write_manifest(const std::string& run_dir, const std::string& command, const Config& cfg,
                    double seconds);

struct RunReport {
    std::string name;
    std::string strategy;
    std::string variant;
    metrics::MetricsReport metrics;
};

void write_report_json(const std::string& path, const std::vector<RunReport>& runs);
std::vector<RunReport> load_report_json(const std::string& path);
// Table-shaped markdown: one row per run, columns Bleu-4 / METEOR* /
// ROUGE-L / Cider / Embed*, with the simplified-variant footnote.
void write_report_md(const std::string& path, const std::vector<RunReport>& runs);

// The n lowest-scoring instances under the chosen metric, one block each:
// observations, gold, per-model hypotheses, and an empty `category:` line
// for manual tagging.
std::string failure_report(const std::vector<AbductiveInstance>& instances,
                           const std::vector<std::vector<Prediction>>& model_predictions,
                           const std::vector<std::string>& model_names, int n,
                           metrics::MetricKind metric,
                           const metrics::TokenEncoder* encoder = nullptr);

// ---------------------------------------------------------------------------
// Decoder-vs-oracle audit on a tiny successor-chain world (vocabulary 12,
// hypothesis length <= 3): a small LM is trained on chains x, x+1, ..., and
// each decoder's ranking objective is compared against the greedy baseline
// and the brute-force optimum.

struct AuditConfig {
    int instances = 50;
    std::uint64_t seed = 9;
    int vocab = 12;
    int hyp_len = 3;
    int train_chains = 240;
    int epochs = 40;
    double lr = 0.5;
    decode::DecodeConfig delorean;  // strategy forced to Delorean
    decode::DecodeConfig cold;      // strategy forced to Cold

    AuditConfig();
};

struct AuditRow {
    TokenSeq o1, o2;
    double obj_greedy = 0.0;
    double obj_delorean = 0.0;
    double obj_cold = 0.0;
    double obj_oracle = 0.0;
};

struct AuditResult {
    std::vector<AuditRow> rows;
    double frac_delorean_ge_greedy = 0.0;
    double frac_cold_ge_greedy = 0.0;
    // returned hypothesis energy <= greedy baseline energy (cfg weights)
    double frac_cold_energy_le_greedy = 0.0;
    bool oracle_bound_ok = true;  // no decoder ever beats the brute force
};

AuditResult run_oracle_audit(const AuditConfig& cfg);

// ---------------------------------------------------------------------------
// CLI entry point (subcommands: synth, train, decode, eval, report, failures,
// oracle-check). Returns 0 on success, 1 on usage errors, 2 on runtime
// failures.
int run_cli(int argc, const char* const* argv);

}  // namespace anlg::harness
