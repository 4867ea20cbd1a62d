#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "anlg/harness.hpp"
#include "anlg/oracle.hpp"

namespace anlg::harness {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string instance_id(const AbductiveInstance& inst, std::size_t index) {
    return inst.id.empty() ? std::to_string(index) : inst.id;
}

// model directory: checkpoint.bin + vocab.txt side by side
struct Model {
    lm::Parameters params;
    Vocabulary vocab;
};

Model load_model(const std::string& dir_or_ckpt) {
    fs::path ckpt = dir_or_ckpt;
    if (fs::is_directory(ckpt)) ckpt /= "checkpoint.bin";
    Model m{lm::load_checkpoint(ckpt.string()), Vocabulary::load((ckpt.parent_path() / "vocab.txt").string())};
    if (m.vocab.size() != m.params.config.vocab_size) {
        throw std::runtime_error("vocabulary size does not match checkpoint: " + dir_or_ckpt);
    }
    return m;
}

train::Variant parse_task_variant(const std::string& v) {
    if (v == "base") return train::Variant::Base;
    if (v == "knowledge_text") return train::Variant::KnowledgeText;
    if (v == "knowledge_emb") return train::Variant::KnowledgeEmb;
    throw std::runtime_error("unknown variant: " + v + " (base|knowledge_text|knowledge_emb)");
}

decode::DecodeConfig decode_config_from(const Config& cfg) {
    decode::DecodeConfig dc;
    const std::string s = cfg.get_or("strategy", "greedy");
    const auto strat = decode::strategy_from_name(s);
    if (!strat) throw std::runtime_error("unknown strategy: " + s);
    dc.strategy = *strat;
    dc.temperature = cfg.get_double("temperature", dc.temperature);
    dc.top_p = cfg.get_double("top_p", dc.top_p);
    dc.beam_width = cfg.get_int("beam_width", dc.beam_width);
    dc.max_len = cfg.get_int("max_hyp_len", dc.max_len);
    dc.delorean_iters = cfg.get_int("delorean_iters", dc.delorean_iters);
    dc.delorean_step = cfg.get_double("delorean_step", dc.delorean_step);
    dc.delorean_mix = cfg.get_double("delorean_mix", dc.delorean_mix);
    dc.cold_iters = cfg.get_int("cold_iters", dc.cold_iters);
    dc.cold_step = cfg.get_double("cold_step", dc.cold_step);
    dc.noise_start = cfg.get_double("noise_start", dc.noise_start);
    dc.noise_min = cfg.get_double("noise_min", dc.noise_min);
    dc.w_fluency = cfg.get_double("w_fluency", dc.w_fluency);
    dc.w_future = cfg.get_double("w_future", dc.w_future);
    dc.top_k = cfg.get_int("top_k", dc.top_k);
    const std::string init = cfg.get_or("cold_init", "forward");
    if (init == "forward") {
        dc.cold_init = decode::ColdInit::Forward;
    } else if (init == "uniform") {
        dc.cold_init = decode::ColdInit::Uniform;
    } else {
        throw std::runtime_error("cold_init must be forward|uniform, got: " + init);
    }
    dc.seed = cfg.get_u64("seed", dc.seed);
    dc.validate();
    return dc;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Config& cfg) {
    const auto t0 = Clock::now();
    const fs::path out = cfg.get_or("out", "data");
    fs::create_directories(out);
    WorldConfig wc;
    wc.dev_size = cfg.get_int("dev_size", -1);
    wc.test_size = cfg.get_int("test_size", -1);
    const SynthCorpus corpus =
        synth_corpus(cfg.get_u64("seed", 1), cfg.get_int("size", 300), wc);
    save_jsonl((out / "train.jsonl").string(), corpus.train);
    save_jsonl((out / "dev.jsonl").string(), corpus.dev);
    save_jsonl((out / "test.jsonl").string(), corpus.test);
    Vocabulary::build(synth_vocabulary()).save((out / "vocab.txt").string());
    write_text(out / "config.resolved", cfg.resolved());
    write_manifest(out.string(), "synth", cfg, seconds_since(t0));
    std::cout << "synth: " << corpus.train.size() << " train / " << corpus.dev.size() << " dev / "
              << corpus.test.size() << " test instances in " << out << "\n";
    return 0;
}

int cmd_train(const Config& cfg) {
    const auto t0 = Clock::now();
    const fs::path data = cfg.get_or("data", "data");
    const fs::path out = cfg.get_or("out", "runs/train");
    fs::create_directories(out);

    const Vocabulary vocab = Vocabulary::load((data / "vocab.txt").string());
    const auto train_set = load_jsonl((data / "train.jsonl").string());
    const auto dev_set = load_jsonl((data / "dev.jsonl").string());

    lm::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.d_model = cfg.get_int("d_model", 32);
    mc.n_layers = cfg.get_int("n_layers", 2);
    mc.n_heads = cfg.get_int("n_heads", 2);
    mc.d_ff = cfg.get_int("d_ff", 128);
    mc.max_len = cfg.get_int("model_max_len", 128);

    train::TrainConfig tc;
    tc.lr = cfg.get_double("lr", tc.lr);
    tc.momentum = cfg.get_double("momentum", tc.momentum);
    tc.clip_norm = cfg.get_double("clip_norm", tc.clip_norm);
    tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
    tc.epochs = cfg.get_int("epochs", tc.epochs);
    tc.seed = cfg.get_u64("seed", tc.seed);
    tc.checkpoint_every = cfg.get_int("checkpoint_every", tc.checkpoint_every);

    const std::string variant = cfg.get_or("variant", "base");
    lm::Parameters params = lm::init_params(mc, tc.seed);

    const auto hook = [&](int epoch, const lm::Parameters& p, double train_loss,
                          double dev_loss) {
        std::cout << "epoch " << epoch << ": train " << train_loss << " dev " << dev_loss << "\n";
        if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0) {
            lm::save_checkpoint((out / ("checkpoint_epoch" + std::to_string(epoch) + ".bin")).string(), p);
        }
    };

    train::TrainResult result;
    if (variant == "lm") {
        result = train::pretrain_lm(std::move(params), tc, train_set, dev_set, vocab, hook);
    } else {
        tc.variant = parse_task_variant(variant);
        std::unique_ptr<RuleTableProvider> provider;
        if (tc.variant != train::Variant::Base) {
            provider = std::make_unique<RuleTableProvider>(RuleTableProvider::from_file(
                vocab, cfg.get_or("rules", "configs/comet_rules.tsv")));
        }
        result = train::fit(std::move(params), tc, train_set, dev_set, vocab, provider.get(), hook);
    }

    lm::save_checkpoint((out / "checkpoint.bin").string(), result.params);
    vocab.save((out / "vocab.txt").string());
    train::save_curve((out / "loss_curve.csv").string(), result.curve);
    write_text(out / "config.resolved", cfg.resolved());
    write_manifest(out.string(), "train", cfg, seconds_since(t0));
    std::cout << "train: saved " << (out / "checkpoint.bin") << "\n";
    return 0;
}

int cmd_decode(const Config& cfg) {
    const auto t0 = Clock::now();
    const fs::path out = cfg.get_or("out", "runs/decode");
    fs::create_directories(out);
    const Model model = load_model(cfg.get_or("model", "runs/train"));
    const auto instances = load_jsonl(cfg.get_or("data", "data/test.jsonl"));
    const decode::DecodeConfig dc = decode_config_from(cfg);
    const std::string variant = cfg.get_or("variant", "base");

    // resume: skip ids already present in predictions.jsonl, but only when
    // the run was produced by this exact configuration
    const fs::path pred_path = out / "predictions.jsonl";
    std::set<std::string> done;
    if (fs::exists(pred_path)) {
        const fs::path resolved_path = out / "config.resolved";
        std::string previous;
        if (fs::exists(resolved_path)) {
            std::ifstream in(resolved_path, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            previous = ss.str();
        }
        if (previous != cfg.resolved()) {
            throw std::runtime_error(
                "run directory " + out.string() +
                " holds predictions from a different configuration; use a fresh --out");
        }
        for (const auto& p : load_predictions(pred_path.string())) done.insert(p.id);
    }
    write_text(out / "config.resolved", cfg.resolved());

    std::unique_ptr<RuleTableProvider> provider;
    std::unique_ptr<lm::Parameters> knowledge_encoder;
    train::Variant tv = train::Variant::Base;
    const bool standard = dc.strategy == decode::Strategy::Greedy ||
                          dc.strategy == decode::Strategy::Beam ||
                          dc.strategy == decode::Strategy::TopP;
    if (!standard && variant != "base") {
        throw std::runtime_error("unsupervised strategies take no knowledge variant");
    }
    if (standard) {
        tv = parse_task_variant(variant);
        if (tv != train::Variant::Base) {
            provider = std::make_unique<RuleTableProvider>(RuleTableProvider::from_file(
                model.vocab, cfg.get_or("rules", "configs/comet_rules.tsv")));
            // the frozen knowledge encoder, rebuilt from the checkpoint's
            // (config, seed) so decode-time bundles match training-time ones
            knowledge_encoder = std::make_unique<lm::Parameters>(
                knowledge_encoder_params(model.params.config, model.params.seed));
        }
    }

    int decoded = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const AbductiveInstance& inst = instances[i];
        const std::string id = instance_id(inst, i);
        if (done.count(id)) continue;

        decode::DecodeConfig per = dc;
        per.seed = dc.seed + i;  // per-instance stream, independent of resume order

        decode::DecodeResult r;
        if (standard) {
            KnowledgeBundle bundle;
            const KnowledgeBundle* kb = nullptr;
            if (tv != train::Variant::Base) {
                bundle = make_bundle(*provider, inst.obs1, inst.obs2, *knowledge_encoder);
                kb = &bundle;
            }
            r = decode::decode_standard(model.params, model.vocab, inst, per, tv, kb);
        } else {
            TokenSeq o1 = {model.vocab.bos()};
            const TokenSeq t1 = model.vocab.tokenize(inst.obs1);
            o1.insert(o1.end(), t1.begin(), t1.end());
            const TokenSeq o2 = model.vocab.tokenize(inst.obs2);
            r = dc.strategy == decode::Strategy::Delorean
                    ? decode::decode_delorean(model.params, o1, o2, per, &model.vocab)
                    : decode::decode_cold(model.params, o1, o2, per, &model.vocab);
            append_traces((out / "traces.jsonl").string(), id, r.trace);
        }
        append_predictions(pred_path.string(), {{id, r.text, r.score, strategy_name(dc.strategy)}});
        ++decoded;
    }
    std::cout << "decode: " << decoded << " new, " << done.size() << " resumed\n";

    // evaluate in place when every instance carries references
    const bool scorable = !instances.empty() &&
                          std::all_of(instances.begin(), instances.end(),
                                      [](const auto& x) { return !x.gold_hyps.empty(); });
    if (scorable) {
        const auto preds = load_predictions(pred_path.string());
        std::map<std::string, std::string> by_id;
        for (const auto& p : preds) by_id[p.id] = p.hypothesis;
        std::vector<std::string> hyps;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            auto it = by_id.find(instance_id(instances[i], i));
            if (it == by_id.end()) throw std::runtime_error("missing prediction for instance");
            hyps.push_back(it->second);
        }
        const metrics::LmTokenEncoder encoder(model.vocab, model.params);
        RunReport rr;
        rr.name = cfg.get_or("name", out.filename().string());
        rr.strategy = cfg.get_or("strategy", "greedy");
        rr.variant = standard ? variant : "unsupervised";
        rr.metrics = metrics::evaluate_corpus(hyps, instances, &encoder);
        write_report_json((out / "report.json").string(), {rr});
        write_report_md((out / "report.md").string(), {rr});
        std::cout << "eval: bleu4 " << rr.metrics.bleu4 << ", rouge_l " << rr.metrics.rouge_l
                  << ", cider " << rr.metrics.cider << "\n";
    }

    write_manifest(out.string(), "decode", cfg, seconds_since(t0));
    return 0;
}

int cmd_eval(const Config& cfg) {
    const auto t0 = Clock::now();
    const fs::path out = cfg.get_or("out", ".");
    fs::create_directories(out);
    const auto instances = load_jsonl(cfg.get_or("data", "data/test.jsonl"));
    const auto preds = load_predictions(cfg.get_or("predictions", "predictions.jsonl"));

    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : preds) by_id[p.id] = &p;
    std::vector<std::string> hyps;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::string id = instance_id(instances[i], i);
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("missing prediction for instance " + id);
        hyps.push_back(it->second->hypothesis);
    }

    std::unique_ptr<Model> enc_model;
    std::unique_ptr<metrics::LmTokenEncoder> encoder;
    if (cfg.has("encoder")) {
        enc_model = std::make_unique<Model>(load_model(*cfg.get("encoder")));
        encoder = std::make_unique<metrics::LmTokenEncoder>(enc_model->vocab, enc_model->params);
    }

    RunReport rr;
    rr.name = cfg.get_or("name", fs::path(cfg.get_or("predictions", "run")).parent_path()
                                     .filename().string());
    rr.strategy = preds.empty() ? "?" : preds.front().strategy;
    rr.variant = cfg.get_or("variant", "?");
    rr.metrics = metrics::evaluate_corpus(hyps, instances, encoder.get());
    write_report_json((out / "report.json").string(), {rr});
    write_report_md((out / "report.md").string(), {rr});
    write_manifest(out.string(), "eval", cfg, seconds_since(t0));
    std::cout << "eval: bleu4 " << rr.metrics.bleu4 << ", meteor_simple " << rr.metrics.meteor
              << ", rouge_l " << rr.metrics.rouge_l << ", cider " << rr.metrics.cider << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_path) {
    std::vector<RunReport> all;
    for (const auto& run : runs) {
        fs::path p = run;
        if (fs::is_directory(p)) p /= "report.json";
        for (auto& r : load_report_json(p.string())) all.push_back(std::move(r));
    }
    write_report_md(out_path, all);
    std::ifstream in(out_path);
    std::cout << in.rdbuf();
    return 0;
}

int cmd_failures(const Config& cfg, const std::vector<std::string>& pred_paths) {
    if (pred_paths.empty()) throw std::runtime_error("failures: need at least one --predictions");
    const auto instances = load_jsonl(cfg.get_or("data", "data/test.jsonl"));
    std::vector<std::vector<Prediction>> preds;
    std::vector<std::string> names;
    for (const auto& p : pred_paths) {
        preds.push_back(load_predictions(p));
        const fs::path path(p);
        names.push_back(path.parent_path().filename().string().empty()
                            ? path.string()
                            : path.parent_path().filename().string());
    }
    const auto kind = metrics::metric_from_name(cfg.get_or("metric", "cider"));
    if (!kind) throw std::runtime_error("unknown metric: " + cfg.get_or("metric", ""));

    std::unique_ptr<Model> enc_model;
    std::unique_ptr<metrics::LmTokenEncoder> encoder;
    if (cfg.has("encoder")) {
        enc_model = std::make_unique<Model>(load_model(*cfg.get("encoder")));
        encoder = std::make_unique<metrics::LmTokenEncoder>(enc_model->vocab, enc_model->params);
    }

    const std::string md = failure_report(instances, preds, names, cfg.get_int("n", 10), *kind,
                                          encoder.get());
    const std::string out_path = cfg.get_or("out", "failures.md");
    write_text(out_path, md);
    std::cout << md;
    return 0;
}

int cmd_oracle_check(const Config& cfg) {
    AuditConfig ac;
    ac.instances = cfg.get_int("instances", ac.instances);
    ac.seed = cfg.get_u64("seed", ac.seed);
    const AuditResult r = run_oracle_audit(ac);

    const fs::path out = cfg.get_or("out", "runs/oracle-check");
    fs::create_directories(out);
    std::ofstream rows((out / "audit.jsonl").string(), std::ios::binary);
    for (const auto& row : r.rows) {
        nlohmann::json j;
        j["o1"] = row.o1;
        j["o2"] = row.o2;
        j["objective_greedy"] = row.obj_greedy;
        j["objective_delorean"] = row.obj_delorean;
        j["objective_cold"] = row.obj_cold;
        j["objective_oracle"] = row.obj_oracle;
        rows << j.dump() << '\n';
    }
    write_text(out / "config.resolved", cfg.resolved());

    std::cout << "oracle-check over " << r.rows.size() << " instances:\n"
              << "  delorean >= greedy baseline: " << 100.0 * r.frac_delorean_ge_greedy << "%\n"
              << "  cold     >= greedy baseline: " << 100.0 * r.frac_cold_ge_greedy << "%\n"
              << "  cold energy <= greedy energy: " << 100.0 * r.frac_cold_energy_le_greedy
              << "%\n"
              << "  brute-force bound respected: " << (r.oracle_bound_ok ? "yes" : "NO") << "\n";
    return r.oracle_bound_ok ? 0 : 2;
}

// apply a CLI option over the config: explicit flag wins, then config file,
// then the flag's default
void overlay(Config& cfg, const CLI::Option* opt, const std::string& key, const std::string& val) {
    if (opt->count() > 0 || !cfg.has(key)) cfg.set(key, val);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"abductive infilling toolkit: synthetic corpora, supervised training, "
                 "gradient-based decoding, and automatic evaluation"};
    app.require_subcommand(1);

    // every subcommand takes --config (key = value file, `include` supported)
    // and mirrors its flags into the resolved config
    std::string config_path;

    auto add_config_flag = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file");
    };

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    std::uint64_t synth_seed = 1;
    int synth_size = 300, synth_dev = -1, synth_test = -1;
    std::string synth_out = "data";
    add_config_flag(synth);
    auto* o_seed = synth->add_option("--seed", synth_seed, "corpus seed");
    auto* o_size = synth->add_option("--size", synth_size, "train split size (>= 30)");
    auto* o_dev = synth->add_option("--dev-size", synth_dev, "dev split size (-1: size/6)");
    auto* o_test = synth->add_option("--test-size", synth_test, "test split size (-1: size/6)");
    auto* o_out = synth->add_option("--out", synth_out, "output directory");

    // train ------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "fit a model on a corpus");
    std::string tr_data = "data", tr_out = "runs/train", tr_variant = "base",
                tr_rules = "configs/comet_rules.tsv";
    double tr_lr = 0.5, tr_momentum = 0.9, tr_clip = 1.0;
    int tr_batch = 8, tr_epochs = 30, tr_ckpt_every = 0;
    int tr_d = 32, tr_layers = 2, tr_heads = 2, tr_dff = 128, tr_maxlen = 128;
    std::uint64_t tr_seed = 1;
    add_config_flag(tr);
    auto* t_data = tr->add_option("--data", tr_data, "corpus directory (train/dev/vocab)");
    auto* t_out = tr->add_option("--out", tr_out, "run directory");
    auto* t_var = tr->add_option("--variant", tr_variant,
                                 "base|knowledge_text|knowledge_emb|lm (lm: observation-only "
                                 "pretraining for the unsupervised decoders)");
    auto* t_rules = tr->add_option("--rules", tr_rules, "knowledge rule table");
    auto* t_lr = tr->add_option("--lr", tr_lr, "learning rate");
    auto* t_mom = tr->add_option("--momentum", tr_momentum, "SGD momentum");
    auto* t_clip = tr->add_option("--clip-norm", tr_clip, "gradient clip norm");
    auto* t_batch = tr->add_option("--batch-size", tr_batch, "batch size");
    auto* t_epochs = tr->add_option("--epochs", tr_epochs, "epochs");
    auto* t_seed = tr->add_option("--seed", tr_seed, "init/shuffle seed");
    auto* t_ck = tr->add_option("--checkpoint-every", tr_ckpt_every, "checkpoint cadence (epochs)");
    auto* t_d = tr->add_option("--d-model", tr_d, "model width");
    auto* t_l = tr->add_option("--n-layers", tr_layers, "transformer blocks");
    auto* t_h = tr->add_option("--n-heads", tr_heads, "attention heads");
    auto* t_ff = tr->add_option("--d-ff", tr_dff, "feed-forward width");
    auto* t_ml = tr->add_option("--model-max-len", tr_maxlen, "maximum sequence length");

    // decode -------------------------------------------------------------
    auto* de = app.add_subcommand("decode", "generate hypotheses (and score them when "
                                            "references are available)");
    std::string de_model = "runs/train", de_data = "data/test.jsonl", de_out = "runs/decode",
                de_strategy = "greedy", de_variant = "base",
                de_rules = "configs/comet_rules.tsv", de_cold_init = "forward", de_name;
    double de_temp = 1.0, de_topp = 0.9, de_dstep = 0.1, de_dmix = 0.5, de_cstep = 0.1,
           de_ns = 1.0, de_nm = 0.01, de_wf = 1.0, de_wn = 1.0;
    int de_beam = 5, de_maxlen = 8, de_diters = 10, de_citers = 200, de_topk = 5;
    std::uint64_t de_seed = 0;
    add_config_flag(de);
    auto* d_model = de->add_option("--model", de_model, "model run directory or checkpoint");
    auto* d_data = de->add_option("--data", de_data, "instances to decode (JSONL)");
    auto* d_out = de->add_option("--out", de_out, "run directory");
    auto* d_strat = de->add_option("--strategy", de_strategy, "greedy|beam|top_p|delorean|cold");
    auto* d_var = de->add_option("--variant", de_variant,
                                 "base|knowledge_text|knowledge_emb (greedy/beam/top_p only)");
    auto* d_rules = de->add_option("--rules", de_rules, "knowledge rule table");
    auto* d_name = de->add_option("--name", de_name, "row label in reports");
    auto* d_temp = de->add_option("--temperature", de_temp, "softmax temperature");
    auto* d_topp = de->add_option("--top-p", de_topp, "nucleus mass");
    auto* d_beam = de->add_option("--beam-width", de_beam, "beam width");
    auto* d_len = de->add_option("--max-hyp-len", de_maxlen, "hypothesis length budget");
    auto* d_di = de->add_option("--delorean-iters", de_diters, "backprop-mix iterations");
    auto* d_ds = de->add_option("--delorean-step", de_dstep, "backward step size");
    auto* d_dm = de->add_option("--delorean-mix", de_dmix, "forward mixing weight in [0,1]");
    auto* d_ci = de->add_option("--cold-iters", de_citers, "Langevin iterations");
    auto* d_cs = de->add_option("--cold-step", de_cstep, "Langevin step size");
    auto* d_ns = de->add_option("--noise-start", de_ns, "initial noise scale");
    auto* d_nm = de->add_option("--noise-min", de_nm, "final noise scale");
    auto* d_wf = de->add_option("--w-fluency", de_wf, "fluency energy weight");
    auto* d_wn = de->add_option("--w-future", de_wn, "future-coherence energy weight");
    auto* d_tk = de->add_option("--top-k", de_topk, "discretization guidance width");
    auto* d_cin = de->add_option("--cold-init", de_cold_init, "forward|uniform");
    auto* d_seed = de->add_option("--seed", de_seed, "decoder seed");

    // eval -------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "score a predictions file against references");
    std::string ev_pred = "predictions.jsonl", ev_data = "data/test.jsonl", ev_out = ".",
                ev_encoder, ev_name, ev_variant = "?";
    add_config_flag(ev);
    auto* e_pred = ev->add_option("--predictions", ev_pred, "predictions JSONL");
    auto* e_data = ev->add_option("--data", ev_data, "instances with references");
    auto* e_out = ev->add_option("--out", ev_out, "output directory");
    auto* e_enc = ev->add_option("--encoder", ev_encoder, "model dir for embed_score");
    auto* e_name = ev->add_option("--name", ev_name, "row label");
    auto* e_var = ev->add_option("--variant", ev_variant, "row variant label");

    // report -----------------------------------------------------------
    auto* rp = app.add_subcommand("report", "merge run reports into one table");
    std::vector<std::string> rp_runs;
    std::string rp_out = "report.md";
    rp->add_option("runs", rp_runs, "run directories (or report.json files)")->required();
    rp->add_option("--out", rp_out, "merged markdown path");

    // failures ---------------------------------------------------------
    auto* fa = app.add_subcommand("failures", "dump the worst-scoring cases for manual tagging");
    std::vector<std::string> fa_preds;
    std::string fa_data = "data/test.jsonl", fa_out = "failures.md", fa_metric = "cider",
                fa_encoder;
    int fa_n = 10;
    add_config_flag(fa);
    fa->add_option("--predictions", fa_preds, "predictions JSONL (repeatable, first ranks)")
        ->required();
    auto* f_data = fa->add_option("--data", fa_data, "instances with references");
    auto* f_n = fa->add_option("--n", fa_n, "cases to dump");
    auto* f_metric = fa->add_option("--metric", fa_metric,
                                    "bleu4|meteor_simple|rouge_l|cider|embed_score");
    auto* f_out = fa->add_option("--out", fa_out, "markdown path");
    auto* f_enc = fa->add_option("--encoder", fa_encoder, "model dir for embed_score");

    // oracle-check -------------------------------------------------------
    auto* oc = app.add_subcommand("oracle-check", "decoder-vs-brute-force audit on a tiny world");
    std::string oc_out = "runs/oracle-check";
    int oc_instances = 50;
    std::uint64_t oc_seed = 9;
    add_config_flag(oc);
    auto* c_out = oc->add_option("--out", oc_out, "output directory");
    auto* c_inst = oc->add_option("--instances", oc_instances, "audit instances");
    auto* c_seed = oc->add_option("--seed", oc_seed, "audit seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Config cfg;
        if (!config_path.empty()) cfg = Config::from_file(config_path);

        auto str = [](auto v) { return std::to_string(v); };

        if (synth->parsed()) {
            overlay(cfg, o_seed, "seed", str(synth_seed));
            overlay(cfg, o_size, "size", str(synth_size));
            overlay(cfg, o_dev, "dev_size", str(synth_dev));
            overlay(cfg, o_test, "test_size", str(synth_test));
            overlay(cfg, o_out, "out", synth_out);
            return cmd_synth(cfg);
        }
        if (tr->parsed()) {
            overlay(cfg, t_data, "data", tr_data);
            overlay(cfg, t_out, "out", tr_out);
            overlay(cfg, t_var, "variant", tr_variant);
            overlay(cfg, t_rules, "rules", tr_rules);
            overlay(cfg, t_lr, "lr", str(tr_lr));
            overlay(cfg, t_mom, "momentum", str(tr_momentum));
            overlay(cfg, t_clip, "clip_norm", str(tr_clip));
            overlay(cfg, t_batch, "batch_size", str(tr_batch));
            overlay(cfg, t_epochs, "epochs", str(tr_epochs));
            overlay(cfg, t_seed, "seed", str(tr_seed));
            overlay(cfg, t_ck, "checkpoint_every", str(tr_ckpt_every));
            overlay(cfg, t_d, "d_model", str(tr_d));
            overlay(cfg, t_l, "n_layers", str(tr_layers));
            overlay(cfg, t_h, "n_heads", str(tr_heads));
            overlay(cfg, t_ff, "d_ff", str(tr_dff));
            overlay(cfg, t_ml, "model_max_len", str(tr_maxlen));
            return cmd_train(cfg);
        }
        if (de->parsed()) {
            overlay(cfg, d_model, "model", de_model);
            overlay(cfg, d_data, "data", de_data);
            overlay(cfg, d_out, "out", de_out);
            overlay(cfg, d_strat, "strategy", de_strategy);
            overlay(cfg, d_var, "variant", de_variant);
            overlay(cfg, d_rules, "rules", de_rules);
            if (d_name->count()) cfg.set("name", de_name);
            overlay(cfg, d_temp, "temperature", str(de_temp));
            overlay(cfg, d_topp, "top_p", str(de_topp));
            overlay(cfg, d_beam, "beam_width", str(de_beam));
            overlay(cfg, d_len, "max_hyp_len", str(de_maxlen));
            overlay(cfg, d_di, "delorean_iters", str(de_diters));
            overlay(cfg, d_ds, "delorean_step", str(de_dstep));
            overlay(cfg, d_dm, "delorean_mix", str(de_dmix));
            overlay(cfg, d_ci, "cold_iters", str(de_citers));
            overlay(cfg, d_cs, "cold_step", str(de_cstep));
            overlay(cfg, d_ns, "noise_start", str(de_ns));
            overlay(cfg, d_nm, "noise_min", str(de_nm));
            overlay(cfg, d_wf, "w_fluency", str(de_wf));
            overlay(cfg, d_wn, "w_future", str(de_wn));
            overlay(cfg, d_tk, "top_k", str(de_topk));
            overlay(cfg, d_cin, "cold_init", de_cold_init);
            overlay(cfg, d_seed, "seed", str(de_seed));
            return cmd_decode(cfg);
        }
        if (ev->parsed()) {
            overlay(cfg, e_pred, "predictions", ev_pred);
            overlay(cfg, e_data, "data", ev_data);
            overlay(cfg, e_out, "out", ev_out);
            if (e_enc->count() || cfg.has("encoder")) overlay(cfg, e_enc, "encoder", ev_encoder);
            if (e_name->count()) cfg.set("name", ev_name);
            overlay(cfg, e_var, "variant", ev_variant);
            return cmd_eval(cfg);
        }
        if (rp->parsed()) return cmd_report(rp_runs, rp_out);
        if (fa->parsed()) {
            overlay(cfg, f_data, "data", fa_data);
            overlay(cfg, f_n, "n", str(fa_n));
            overlay(cfg, f_metric, "metric", fa_metric);
            overlay(cfg, f_out, "out", fa_out);
            if (f_enc->count() || cfg.has("encoder")) overlay(cfg, f_enc, "encoder", fa_encoder);
            return cmd_failures(cfg, fa_preds);
        }
        if (oc->parsed()) {
            overlay(cfg, c_out, "out", oc_out);
            overlay(cfg, c_inst, "instances", str(oc_instances));
            overlay(cfg, c_seed, "seed", str(oc_seed));
            return cmd_oracle_check(cfg);
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace anlg::harness
