#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "semcom/experiments.hpp"
#include "semcom/tensor_io.hpp"

namespace semcom::exp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (0x9e3779b97f4a7c15ULL + b);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return x ^ (x >> 27);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

const char* metric_name(const std::string& task) {
    if (task == "ir") return "recall@1";
    if (task == "mt") return "bleu";
    return "accuracy";
}

// One trained model per task, restored from the newest checkpoint.
struct TrainedModels {
    std::unique_ptr<model::RetrievalTransceiver> ir;
    std::unique_ptr<model::TranslationTransceiver> mt;
    std::unique_ptr<model::VqaTransceiver> vqa;
    data::RetrievalDataset ir_ds;
    data::ParallelCorpus mt_ds;
    data::VqaDataset vqa_ds;
};

TrainedModels load_trained(const ExperimentConfig& cfg) {
    auto ckpt = latest_checkpoint(cfg);
    if (!ckpt) throw std::runtime_error("sweep: no checkpoint under " + cfg.out_dir);
    const auto loaded = Checkpoint::load(*ckpt);

    TrainedModels out;
    if (cfg.task == "ir") {
        out.ir_ds = load_or_gen_retrieval(cfg);
        out.ir = std::make_unique<model::RetrievalTransceiver>(retrieval_config(cfg),
                                                               mix(cfg.seed, 0x17));
        Checkpoint::restore(loaded, out.ir->params(), cfg.hash());
    } else if (cfg.task == "mt") {
        out.mt_ds = load_or_gen_translation(cfg);
        out.mt = std::make_unique<model::TranslationTransceiver>(
            translation_config(cfg, out.mt_ds), mix(cfg.seed, 0x33));
        Checkpoint::restore(loaded, out.mt->params(), cfg.hash());
    } else {
        out.vqa_ds = load_or_gen_vqa(cfg);
        out.vqa = std::make_unique<model::VqaTransceiver>(vqa_config(cfg, out.vqa_ds),
                                                          mix(cfg.seed, 0x55));
        Checkpoint::restore(loaded, out.vqa->params(), cfg.hash());
    }
    return out;
}

double eval_semantic(const ExperimentConfig& cfg, const TrainedModels& m,
                     const EvalOptions& opt) {
    if (cfg.task == "ir") return eval_ir_recall(*m.ir, m.ir_ds, cfg.channel, opt);
    if (cfg.task == "mt") return eval_mt_bleu(*m.mt, m.mt_ds, cfg.channel, opt);
    return eval_vqa_accuracy(*m.vqa, m.vqa_ds, cfg.channel, opt);
}

double eval_baseline(const ExperimentConfig& cfg, const TrainedModels& m,
                     const EvalOptions& opt) {
    const auto mod = baseline::modulation_from_string(cfg.eval.baseline_modulation);
    if (cfg.task == "ir")
        return eval_ir_recall_baseline(*m.ir, m.ir_ds, cfg.channel, opt,
                                       baseline::Modulation::QAM8);
    if (cfg.task == "mt") return eval_mt_bleu_baseline(*m.mt, m.mt_ds, cfg.channel, opt, mod);
    return eval_vqa_accuracy_baseline(*m.vqa, m.vqa_ds, cfg.channel, opt,
                                      baseline::Modulation::BPSK, baseline::Modulation::QAM8);
}

long baseline_symbols(const ExperimentConfig& cfg) { return account_symbols(cfg).baseline_symbols; }

}  // namespace

std::string sweep_csv(const std::vector<SweepRecord>& records, bool include_timing) {
    std::string out = "task,snr_db,users,csi,seed,metric,value,symbols,wall_s\n";
    for (const auto& r : records) {
        out += r.task + ',' + fmt(r.snr_db) + ',' + std::to_string(r.users) + ',' + r.csi + ',' +
               std::to_string(r.seed) + ',' + r.metric + ',' + fmt(r.value) + ',' +
               std::to_string(r.symbols) + ',' + (include_timing ? fmt(r.wall_s) : "0") + '\n';
    }
    return out;
}

void write_sweep_outputs(const std::vector<SweepRecord>& records, const std::string& out_dir,
                         const std::string& stem, bool timing_in_csv) {
    fs::create_directories(out_dir);
    io::write_text(out_dir + "/" + stem + ".csv", sweep_csv(records, timing_in_csv));
    // Measured timings always land in the sidecar; the primary CSV stays a
    // pure function of (config, seeds) unless timing_in_csv is set.
    io::write_text(out_dir + "/" + stem + "_timings.csv", sweep_csv(records, true));
    json arr = json::array();
    for (const auto& r : records)
        arr.push_back({{"task", r.task},
                       {"snr_db", r.snr_db},
                       {"users", r.users},
                       {"csi", r.csi},
                       {"seed", r.seed},
                       {"metric", r.metric},
                       {"value", r.value},
                       {"symbols", r.symbols},
                       {"wall_s", timing_in_csv ? r.wall_s : 0.0}});
    io::write_text(out_dir + "/" + stem + ".json", arr.dump(2) + "\n");
}

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg) {
    auto models = load_trained(cfg);
    const long sem_symbols = simulated_symbols_per_sample(cfg);
    const long base_symbols = cfg.eval.baseline ? baseline_symbols(cfg) : 0;

    std::vector<SweepRecord> records;
    for (double snr : cfg.eval.snr_grid_db)
        for (const auto& csi : cfg.eval.csi)
            for (uint64_t seed : cfg.eval.seeds) {
                EvalOptions opt;
                opt.snr_db = snr;
                opt.csi_error_var = csi == "imperfect" ? cfg.eval.imperfect_csi_var : 0.0;
                opt.seed = seed;
                opt.max_samples = cfg.eval.max_samples;

                const double t0 = now_s();
                const double value = eval_semantic(cfg, models, opt);
                const double elapsed = now_s() - t0;
                records.push_back({cfg.task, snr, cfg.channel.users, csi, seed,
                                   metric_name(cfg.task), value, sem_symbols, elapsed});

                if (cfg.eval.baseline) {
                    const double b0 = now_s();
                    const double bvalue = eval_baseline(cfg, models, opt);
                    records.push_back({cfg.task, snr, cfg.channel.users, csi, seed,
                                       std::string("baseline_") + metric_name(cfg.task), bvalue,
                                       base_symbols, now_s() - b0});
                }
            }
    write_sweep_outputs(records, cfg.out_dir, "sweep_snr", cfg.eval.timing_in_csv);
    return records;
}

std::vector<SweepRecord> run_user_sweep(const ExperimentConfig& cfg) {
    auto models = load_trained(cfg);
    const long sem_symbols = simulated_symbols_per_sample(cfg);
    const long base_symbols = cfg.eval.baseline ? baseline_symbols(cfg) : 0;

    std::vector<SweepRecord> records;
    for (int users : cfg.eval.user_counts) {
        if (users > cfg.channel.m_antennas)
            throw std::invalid_argument("user sweep: K exceeds the receive antenna count");
        if (cfg.task == "vqa" && users % 2 != 0)
            throw std::invalid_argument("user sweep: VQA needs an even user count");
        for (const auto& csi : cfg.eval.csi)
            for (uint64_t seed : cfg.eval.seeds) {
                EvalOptions opt;
                opt.snr_db = cfg.eval.user_sweep_snr_db;
                opt.csi_error_var = csi == "imperfect" ? cfg.eval.imperfect_csi_var : 0.0;
                opt.seed = seed;
                opt.max_samples = cfg.eval.max_samples;
                opt.users = users;

                const double t0 = now_s();
                const double value = eval_semantic(cfg, models, opt);
                records.push_back({cfg.task, opt.snr_db, users, csi, seed,
                                   metric_name(cfg.task), value, sem_symbols, now_s() - t0});
                if (cfg.eval.baseline) {
                    const double b0 = now_s();
                    const double bvalue = eval_baseline(cfg, models, opt);
                    records.push_back({cfg.task, opt.snr_db, users, csi, seed,
                                       std::string("baseline_") + metric_name(cfg.task), bvalue,
                                       base_symbols, now_s() - b0});
                }
            }
    }
    write_sweep_outputs(records, cfg.out_dir, "sweep_users", cfg.eval.timing_in_csv);
    return records;
}

}  // namespace semcom::exp
