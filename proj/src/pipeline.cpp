#include <json.hpp>

#include <filesystem>
#include <fstream>

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

std::vector<std::string> canonical_phases(const std::string& task) {
    if (task == "ir") return {"semantic", "jsc"};
    return {"semantic", "jsc", "whole"};
}

std::string ckpt_path(const ExperimentConfig& cfg, const std::string& phase) {
    return cfg.out_dir + "/ckpt_" + phase + ".ckpt";
}

void write_loss_log(const std::string& path, const std::vector<train::LossRecord>& log) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open loss log " + path);
    for (const auto& rec : log) {
        json line = {{"phase", rec.phase},
                     {"step", rec.step},
                     {"loss", rec.loss},
                     {"grad_norm", rec.grad_norm}};
        f << line.dump() << "\n";
    }
}

}  // namespace

model::RetrievalConfig retrieval_config(const ExperimentConfig& cfg) {
    model::RetrievalConfig m;
    m.image_size = cfg.dataset.image_size;
    m.patch = cfg.model.patch;
    m.channels = 3;
    m.d_model = cfg.model.d_model;
    m.heads = cfg.model.heads;
    m.ffn = cfg.model.ffn;
    m.enc_layers = cfg.model.enc_layers;
    m.l_c = cfg.model.l_c;
    m.jsc_hidden = cfg.model.jsc_hidden;
    return m;
}

model::TranslationConfig translation_config(const ExperimentConfig& cfg,
                                            const data::ParallelCorpus& ds) {
    model::TranslationConfig m;
    m.vocab = ds.vocab_size;
    m.max_len = ds.max_len;
    m.d_model = cfg.model.d_model;
    m.heads = cfg.model.heads;
    m.ffn = cfg.model.ffn;
    m.enc_layers = cfg.model.enc_layers;
    m.dec_layers = cfg.model.dec_layers;
    m.l_c = cfg.model.l_c;
    m.jsc_hidden = cfg.model.jsc_hidden;
    return m;
}

model::VqaConfig vqa_config(const ExperimentConfig& cfg, const data::VqaDataset& ds) {
    model::VqaConfig m;
    m.image_size = ds.image_size;
    m.patch = cfg.model.patch;
    m.channels = 3;
    m.d_image = cfg.model.d_image;
    m.image_enc_layers = cfg.model.image_enc_layers;
    m.image_l_c = cfg.model.image_l_c;
    m.question_vocab = static_cast<int>(ds.question_vocab.size());
    m.max_question_len = ds.max_question_len;
    m.d_text = cfg.model.d_text;
    m.text_enc_layers = cfg.model.text_enc_layers;
    m.text_l_c = cfg.model.text_l_c;
    m.heads = cfg.model.heads;
    m.ffn = cfg.model.ffn;
    m.jsc_hidden = cfg.model.jsc_hidden;
    m.fusion_layers = cfg.model.fusion_layers;
    m.layerwise = cfg.model.layerwise;
    m.combine = cfg.model.combine;
    m.fusion_hidden = cfg.model.fusion_hidden;
    m.answers = static_cast<int>(ds.answer_names.size());
    m.dropout = cfg.model.dropout;
    return m;
}

data::RetrievalDataset load_or_gen_retrieval(const ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir + "/dataset";
    if (fs::exists(dir + "/manifest.json")) return data::load_retrieval(dir);
    return data::gen_retrieval(cfg.dataset.num_classes, cfg.dataset.per_class,
                               cfg.dataset.image_size, cfg.dataset.seed);
}

data::ParallelCorpus load_or_gen_translation(const ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir + "/dataset";
    if (fs::exists(dir + "/manifest.json")) return data::load_translation(dir);
    return data::gen_translation(cfg.dataset.num_pairs, cfg.dataset.max_len, cfg.dataset.seed);
}

data::VqaDataset load_or_gen_vqa(const ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir + "/dataset";
    if (fs::exists(dir + "/manifest.json")) return data::load_vqa(dir);
    return data::gen_vqa(cfg.dataset.num_scenes, cfg.dataset.questions_per_scene,
                         cfg.dataset.grid, cfg.dataset.seed, cfg.dataset.cell_px);
}

std::optional<std::string> latest_checkpoint(const ExperimentConfig& cfg) {
    const auto phases = canonical_phases(cfg.task);
    for (auto it = phases.rbegin(); it != phases.rend(); ++it) {
        const std::string path = ckpt_path(cfg, *it);
        if (fs::exists(path)) return path;
    }
    return std::nullopt;
}

void run_training(const ExperimentConfig& cfg) {
    const auto canonical = canonical_phases(cfg.task);
    auto requested = cfg.train.phases;
    if (requested.empty()) requested = canonical;

    // Requested phases must form a contiguous, ordered slice of the
    // canonical schedule.
    size_t first = canonical.size();
    for (size_t i = 0; i < canonical.size(); ++i)
        if (canonical[i] == requested.front()) first = i;
    if (first == canonical.size() || first + requested.size() > canonical.size())
        throw std::invalid_argument("train: unknown phase " + requested.front());
    for (size_t i = 0; i < requested.size(); ++i)
        if (requested[i] != canonical[first + i])
            throw std::invalid_argument("train: phases must follow the canonical order");

    fs::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/config.json", cfg.to_json_text());
    const uint64_t chash = cfg.hash();

    auto phase_seed = [&](size_t idx) { return mix(cfg.seed, 0xF00D + idx); };

    if (cfg.task == "ir") {
        auto ds = load_or_gen_retrieval(cfg);
        model::RetrievalTransceiver tx(retrieval_config(cfg), mix(cfg.seed, 0x17));
        if (first > 0) {
            const std::string prev = ckpt_path(cfg, canonical[first - 1]);
            if (!fs::exists(prev))
                throw std::runtime_error("train: phase '" + requested.front() +
                                         "' needs checkpoint " + prev);
            Checkpoint::restore(Checkpoint::load(prev), tx.params(), chash);
        }
        train::IrTraining training(tx, ds, cfg.channel);
        for (size_t i = 0; i < requested.size(); ++i) {
            const std::string& phase = requested[i];
            if (phase == "semantic")
                training.semantic_phase(cfg.train.semantic, phase_seed(first + i));
            else
                training.jsc_phase(cfg.train.jsc, phase_seed(first + i));
            Checkpoint::save(ckpt_path(cfg, phase), tx.params(), chash, phase);
        }
        write_loss_log(cfg.out_dir + "/train_log.ndjson", training.log());
    } else if (cfg.task == "mt") {
        auto ds = load_or_gen_translation(cfg);
        model::TranslationTransceiver tx(translation_config(cfg, ds), mix(cfg.seed, 0x33));
        if (first > 0) {
            const std::string prev = ckpt_path(cfg, canonical[first - 1]);
            if (!fs::exists(prev))
                throw std::runtime_error("train: phase '" + requested.front() +
                                         "' needs checkpoint " + prev);
            Checkpoint::restore(Checkpoint::load(prev), tx.params(), chash);
        }
        train::MtTraining training(tx, ds, cfg.channel);
        for (size_t i = 0; i < requested.size(); ++i) {
            const std::string& phase = requested[i];
            if (phase == "semantic")
                training.semantic_phase(cfg.train.semantic, phase_seed(first + i));
            else if (phase == "jsc")
                training.jsc_phase(cfg.train.jsc, phase_seed(first + i));
            else
                training.whole_phase(cfg.train.whole, phase_seed(first + i));
            Checkpoint::save(ckpt_path(cfg, phase), tx.params(), chash, phase);
        }
        write_loss_log(cfg.out_dir + "/train_log.ndjson", training.log());
    } else {
        auto ds = load_or_gen_vqa(cfg);
        model::VqaTransceiver tx(vqa_config(cfg, ds), mix(cfg.seed, 0x55));
        if (first > 0) {
            const std::string prev = ckpt_path(cfg, canonical[first - 1]);
            if (!fs::exists(prev))
                throw std::runtime_error("train: phase '" + requested.front() +
                                         "' needs checkpoint " + prev);
            Checkpoint::restore(Checkpoint::load(prev), tx.params(), chash);
        }
        train::VqaTraining training(tx, ds, cfg.channel);
        for (size_t i = 0; i < requested.size(); ++i) {
            const std::string& phase = requested[i];
            if (phase == "semantic")
                training.semantic_phase(cfg.train.semantic, phase_seed(first + i));
            else if (phase == "jsc")
                training.jsc_phase(cfg.train.jsc, phase_seed(first + i));
            else
                training.whole_phase(cfg.train.whole, phase_seed(first + i),
                                     cfg.train.freeze_image_encoder);
            Checkpoint::save(ckpt_path(cfg, phase), tx.params(), chash, phase);
        }
        write_loss_log(cfg.out_dir + "/train_log.ndjson", training.log());
    }
}

}  // namespace semcom::exp
