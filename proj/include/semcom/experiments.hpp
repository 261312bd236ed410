#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semcom/baselines.hpp"
#include "semcom/data.hpp"
#include "semcom/training.hpp"
#include "semcom/transceivers.hpp"

namespace semcom::exp {

// ---- configuration ----

struct DatasetSpec {
    // retrieval
    int num_classes = 16;
    int per_class = 24;
    int image_size = 32;
    // translation
    int num_pairs = 600;
    int max_len = 10;
    // vqa
    int num_scenes = 200;
    int questions_per_scene = 4;
    int grid = 4;
    int cell_px = 8;
    uint64_t seed = 7;
};

struct ModelSpec {
    int d_model = 64;
    int heads = 4;
    int ffn = 128;
    int enc_layers = 3;
    int dec_layers = 2;
    int patch = 8;
    int l_c = 16;
    std::vector<int> jsc_hidden = {128};
    // vqa
    int d_image = 64;
    int d_text = 64;
    int image_enc_layers = 2;
    int text_enc_layers = 2;
    int image_l_c = 16;
    int text_l_c = 16;
    int fusion_layers = 2;
    bool layerwise = true;
    std::string combine = "sum";
    int fusion_hidden = 64;
    double dropout = 0.1;
};

struct TrainSpec {
    std::vector<std::string> phases;  // subset of the task's canonical order
    train::PhaseConfig semantic;
    train::PhaseConfig jsc;
    train::PhaseConfig whole;
    bool freeze_image_encoder = true;
};

struct EvalSpec {
    std::vector<double> snr_grid_db = {-6, -3, 0, 3, 6, 9, 12, 18};
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<std::string> csi = {"perfect", "imperfect"};
    double imperfect_csi_var = 0.025;
    bool baseline = false;
    std::string baseline_modulation = "qpsk";
    int max_samples = 64;
    bool timing_in_csv = false;
    double user_sweep_snr_db = 18.0;
    std::vector<int> user_counts = {1, 2, 4};
};

struct ExperimentConfig {
    std::string task;  // "ir" | "mt" | "vqa"
    uint64_t seed = 1;
    std::string out_dir = "runs/out";
    DatasetSpec dataset;
    ModelSpec model;
    model::ChannelParams channel;
    TrainSpec train;
    EvalSpec eval;

    // Strict parse: unknown keys anywhere are rejected.
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string to_json_text() const;  // fully resolved, for the run copy
    uint64_t hash() const;             // FNV-1a over the resolved text
};

// ---- checkpoints ----

struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    struct Loaded {
        uint32_t version = 0;
        uint64_t config_hash = 0;
        std::string phase;
        std::vector<std::pair<std::string, Mat>> tensors;
    };

    static void save(const std::string& path, const nn::ParameterSet& ps, uint64_t config_hash,
                     const std::string& phase);
    static Loaded load(const std::string& path);
    // Copies tensors into an existing set; shape-checked. Warns on stderr
    // when the stored config hash differs from expected.
    static void restore(const Loaded& ckpt, nn::ParameterSet& ps, uint64_t expected_hash);
};

// ---- model construction ----

model::RetrievalConfig retrieval_config(const ExperimentConfig& cfg);
model::TranslationConfig translation_config(const ExperimentConfig& cfg,
                                            const data::ParallelCorpus& ds);
model::VqaConfig vqa_config(const ExperimentConfig& cfg, const data::VqaDataset& ds);

// Datasets derive deterministically from the spec; a persisted dataset
// directory under <out_dir>/dataset takes precedence when present.
data::RetrievalDataset load_or_gen_retrieval(const ExperimentConfig& cfg);
data::ParallelCorpus load_or_gen_translation(const ExperimentConfig& cfg);
data::VqaDataset load_or_gen_vqa(const ExperimentConfig& cfg);

// ---- training pipeline ----

// Runs the configured phases in canonical order, enforcing that a phase can
// only run when its predecessor's checkpoint exists (or ran in-process).
// Saves ckpt_<phase>.ckpt, train_log.ndjson and config.json into out_dir.
void run_training(const ExperimentConfig& cfg);

// Path of the most advanced phase checkpoint present, if any.
std::optional<std::string> latest_checkpoint(const ExperimentConfig& cfg);

// ---- evaluation protocols (held-out split) ----

struct EvalOptions {
    double snr_db = 18.0;
    double csi_error_var = 0.0;
    uint64_t seed = 1;
    int max_samples = 64;
    int users = 0;  // 0 = channel config value
};

double eval_ir_recall(const model::RetrievalTransceiver& tx, const data::RetrievalDataset& ds,
                      const model::ChannelParams& ch, const EvalOptions& opt, int k = 1);
double eval_mt_bleu(const model::TranslationTransceiver& tx, const data::ParallelCorpus& ds,
                    const model::ChannelParams& ch, const EvalOptions& opt);
double eval_vqa_accuracy(const model::VqaTransceiver& tx, const data::VqaDataset& ds,
                         const model::ChannelParams& ch, const EvalOptions& opt);

// Baseline task metrics over the traditional pipeline at the same operating
// point (decode failures score zero for the affected sample).
double eval_ir_recall_baseline(const model::RetrievalTransceiver& tx,
                               const data::RetrievalDataset& ds,
                               const model::ChannelParams& ch, const EvalOptions& opt,
                               baseline::Modulation mod, int k = 1);
double eval_mt_bleu_baseline(const model::TranslationTransceiver& tx,
                             const data::ParallelCorpus& ds, const model::ChannelParams& ch,
                             const EvalOptions& opt, baseline::Modulation mod);
double eval_vqa_accuracy_baseline(const model::VqaTransceiver& tx, const data::VqaDataset& ds,
                                  const model::ChannelParams& ch, const EvalOptions& opt,
                                  baseline::Modulation text_mod, baseline::Modulation image_mod);

// ---- sweeps ----

struct SweepRecord {
    std::string task;
    double snr_db = 0.0;
    int users = 0;
    std::string csi;  // "perfect" | "imperfect"
    uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
    long symbols = 0;
    double wall_s = 0.0;
};

// CSV schema: task,snr_db,users,csi,seed,metric,value,symbols,wall_s.
std::string sweep_csv(const std::vector<SweepRecord>& records, bool include_timing);
void write_sweep_outputs(const std::vector<SweepRecord>& records, const std::string& out_dir,
                         const std::string& stem, bool timing_in_csv);

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_user_sweep(const ExperimentConfig& cfg);

// ---- accounting ----

struct SymbolAccount {
    std::string task;
    long semantic_symbols = 0;   // per image (ir/vqa image) or per sentence (mt)
    long semantic_text_symbols = 0;  // vqa text stream
    long baseline_symbols = 0;
    long baseline_text_symbols = 0;
    double ratio = 0.0;  // semantic / baseline
};
SymbolAccount account_symbols(const ExperimentConfig& cfg);

struct OpsAccount {
    std::string task;
    long semantic_additions = 0;
    long semantic_multiplications = 0;
    long baseline_additions = 0;
    long baseline_multiplications = 0;
};
// Counts cover the JSC codec dense stacks per sample and the baseline
// convolutional encoder plus Viterbi decoder for an equivalent payload.
OpsAccount account_ops(const ExperimentConfig& cfg);

// Building blocks of the operation counts, exposed for direct checking.
// Dense affine in -> out: in*out multiplications, out*(in-1) dot additions
// plus out bias additions.
void dense_op_counts(int in, int out, long& additions, long& multiplications);
long conv_encoder_additions(long payload_bits);
long viterbi_additions(long payload_bits);

// Number of complex symbols one sample occupies in the simulator, per task;
// accounting must match this exactly.
long simulated_symbols_per_sample(const ExperimentConfig& cfg);

}  // namespace semcom::exp
