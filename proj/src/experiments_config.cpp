#include <json.hpp>

#include <fstream>
#include <set>

#include "semcom/experiments.hpp"
#include "semcom/tensor_io.hpp"

namespace semcom::exp {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

train::PhaseConfig parse_phase(const json& obj, const std::string& where,
                               const train::PhaseConfig& defaults) {
    reject_unknown(obj,
                   {"lr", "beta1", "beta2", "weight_decay", "batch", "epochs", "margin",
                    "classes_per_batch", "snr_low_db", "snr_high_db"},
                   where);
    train::PhaseConfig p = defaults;
    maybe(obj, "lr", p.lr);
    maybe(obj, "beta1", p.beta1);
    maybe(obj, "beta2", p.beta2);
    maybe(obj, "weight_decay", p.weight_decay);
    maybe(obj, "batch", p.batch);
    maybe(obj, "epochs", p.epochs);
    maybe(obj, "margin", p.margin);
    maybe(obj, "classes_per_batch", p.classes_per_batch);
    maybe(obj, "snr_low_db", p.snr_low_db);
    maybe(obj, "snr_high_db", p.snr_high_db);
    return p;
}

json phase_json(const train::PhaseConfig& p) {
    return json{{"lr", p.lr},
                {"beta1", p.beta1},
                {"beta2", p.beta2},
                {"weight_decay", p.weight_decay},
                {"batch", p.batch},
                {"epochs", p.epochs},
                {"margin", p.margin},
                {"classes_per_batch", p.classes_per_batch},
                {"snr_low_db", p.snr_low_db},
                {"snr_high_db", p.snr_high_db}};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    const json root = json::parse(text);
    reject_unknown(root, {"task", "seed", "out_dir", "dataset", "model", "channel", "train",
                          "eval"},
                   "top level");
    ExperimentConfig cfg;
    cfg.task = root.at("task").get<std::string>();
    if (cfg.task != "ir" && cfg.task != "mt" && cfg.task != "vqa")
        throw std::invalid_argument("config: task must be ir, mt or vqa");
    maybe(root, "seed", cfg.seed);
    maybe(root, "out_dir", cfg.out_dir);

    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        reject_unknown(d,
                       {"num_classes", "per_class", "image_size", "num_pairs", "max_len",
                        "num_scenes", "questions_per_scene", "grid", "cell_px", "seed"},
                       "dataset");
        maybe(d, "num_classes", cfg.dataset.num_classes);
        maybe(d, "per_class", cfg.dataset.per_class);
        maybe(d, "image_size", cfg.dataset.image_size);
        maybe(d, "num_pairs", cfg.dataset.num_pairs);
        maybe(d, "max_len", cfg.dataset.max_len);
        maybe(d, "num_scenes", cfg.dataset.num_scenes);
        maybe(d, "questions_per_scene", cfg.dataset.questions_per_scene);
        maybe(d, "grid", cfg.dataset.grid);
        maybe(d, "cell_px", cfg.dataset.cell_px);
        maybe(d, "seed", cfg.dataset.seed);
    }

    if (root.contains("model")) {
        const json& m = root.at("model");
        reject_unknown(m,
                       {"d_model", "heads", "ffn", "enc_layers", "dec_layers", "patch", "l_c",
                        "jsc_hidden", "d_image", "d_text", "image_enc_layers",
                        "text_enc_layers", "image_l_c", "text_l_c", "fusion_layers",
                        "layerwise", "combine", "fusion_hidden", "dropout"},
                       "model");
        maybe(m, "d_model", cfg.model.d_model);
        maybe(m, "heads", cfg.model.heads);
        maybe(m, "ffn", cfg.model.ffn);
        maybe(m, "enc_layers", cfg.model.enc_layers);
        maybe(m, "dec_layers", cfg.model.dec_layers);
        maybe(m, "patch", cfg.model.patch);
        maybe(m, "l_c", cfg.model.l_c);
        maybe(m, "jsc_hidden", cfg.model.jsc_hidden);
        maybe(m, "d_image", cfg.model.d_image);
        maybe(m, "d_text", cfg.model.d_text);
        maybe(m, "image_enc_layers", cfg.model.image_enc_layers);
        maybe(m, "text_enc_layers", cfg.model.text_enc_layers);
        maybe(m, "image_l_c", cfg.model.image_l_c);
        maybe(m, "text_l_c", cfg.model.text_l_c);
        maybe(m, "fusion_layers", cfg.model.fusion_layers);
        maybe(m, "layerwise", cfg.model.layerwise);
        maybe(m, "combine", cfg.model.combine);
        maybe(m, "fusion_hidden", cfg.model.fusion_hidden);
        maybe(m, "dropout", cfg.model.dropout);
    }

    if (root.contains("channel")) {
        const json& c = root.at("channel");
        reject_unknown(c, {"model", "m_antennas", "users", "rician_r", "csi_error_var"},
                       "channel");
        if (c.contains("model"))
            cfg.channel.model = chan::fading_model_from_string(c.at("model").get<std::string>());
        maybe(c, "m_antennas", cfg.channel.m_antennas);
        maybe(c, "users", cfg.channel.users);
        maybe(c, "rician_r", cfg.channel.rician_r);
        maybe(c, "csi_error_var", cfg.channel.csi_error_var);
        if (cfg.channel.users < 1 || cfg.channel.m_antennas < cfg.channel.users)
            throw std::invalid_argument("config: channel needs M >= K >= 1");
    }

    // Task-appropriate phase defaults.
    if (cfg.task == "ir") {
        cfg.train.phases = {"semantic", "jsc"};
        cfg.train.semantic.lr = 1e-3;
        cfg.train.semantic.epochs = 30;
        cfg.train.jsc.lr = 1e-3;
        cfg.train.jsc.epochs = 30;
    } else if (cfg.task == "mt") {
        cfg.train.phases = {"semantic", "jsc", "whole"};
        cfg.train.semantic.lr = 1e-3;
        cfg.train.semantic.epochs = 15;
        cfg.train.jsc.lr = 1e-3;
        cfg.train.jsc.epochs = 10;
        cfg.train.whole.lr = 2e-4;
        cfg.train.whole.epochs = 8;
    } else {
        cfg.train.phases = {"semantic", "jsc", "whole"};
        cfg.train.semantic.lr = 1e-3;
        cfg.train.semantic.epochs = 15;
        cfg.train.jsc.lr = 1e-3;
        cfg.train.jsc.epochs = 10;
        cfg.train.whole.lr = 2e-4;
        cfg.train.whole.epochs = 5;
    }

    if (root.contains("train")) {
        const json& t = root.at("train");
        reject_unknown(t, {"phases", "semantic", "jsc", "whole", "freeze_image_encoder"},
                       "train");
        maybe(t, "phases", cfg.train.phases);
        if (t.contains("semantic"))
            cfg.train.semantic = parse_phase(t.at("semantic"), "train.semantic",
                                             cfg.train.semantic);
        if (t.contains("jsc")) cfg.train.jsc = parse_phase(t.at("jsc"), "train.jsc", cfg.train.jsc);
        if (t.contains("whole"))
            cfg.train.whole = parse_phase(t.at("whole"), "train.whole", cfg.train.whole);
        maybe(t, "freeze_image_encoder", cfg.train.freeze_image_encoder);
    }

    if (root.contains("eval")) {
        const json& e = root.at("eval");
        reject_unknown(e,
                       {"snr_grid_db", "seeds", "csi", "imperfect_csi_var", "baseline",
                        "baseline_modulation", "max_samples", "timing_in_csv",
                        "user_sweep_snr_db", "user_counts"},
                       "eval");
        maybe(e, "snr_grid_db", cfg.eval.snr_grid_db);
        maybe(e, "seeds", cfg.eval.seeds);
        maybe(e, "csi", cfg.eval.csi);
        maybe(e, "imperfect_csi_var", cfg.eval.imperfect_csi_var);
        maybe(e, "baseline", cfg.eval.baseline);
        maybe(e, "baseline_modulation", cfg.eval.baseline_modulation);
        maybe(e, "max_samples", cfg.eval.max_samples);
        maybe(e, "timing_in_csv", cfg.eval.timing_in_csv);
        maybe(e, "user_sweep_snr_db", cfg.eval.user_sweep_snr_db);
        maybe(e, "user_counts", cfg.eval.user_counts);
        for (const auto& c : cfg.eval.csi)
            if (c != "perfect" && c != "imperfect")
                throw std::invalid_argument("config: eval.csi entries must be perfect|imperfect");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    return from_json_text(io::read_text(path));
}

std::string ExperimentConfig::to_json_text() const {
    json root;
    root["task"] = task;
    root["seed"] = seed;
    root["out_dir"] = out_dir;
    root["dataset"] = {{"num_classes", dataset.num_classes},
                       {"per_class", dataset.per_class},
                       {"image_size", dataset.image_size},
                       {"num_pairs", dataset.num_pairs},
                       {"max_len", dataset.max_len},
                       {"num_scenes", dataset.num_scenes},
                       {"questions_per_scene", dataset.questions_per_scene},
                       {"grid", dataset.grid},
                       {"cell_px", dataset.cell_px},
                       {"seed", dataset.seed}};
    root["model"] = {{"d_model", model.d_model},
                     {"heads", model.heads},
                     {"ffn", model.ffn},
                     {"enc_layers", model.enc_layers},
                     {"dec_layers", model.dec_layers},
                     {"patch", model.patch},
                     {"l_c", model.l_c},
                     {"jsc_hidden", model.jsc_hidden},
                     {"d_image", model.d_image},
                     {"d_text", model.d_text},
                     {"image_enc_layers", model.image_enc_layers},
                     {"text_enc_layers", model.text_enc_layers},
                     {"image_l_c", model.image_l_c},
                     {"text_l_c", model.text_l_c},
                     {"fusion_layers", model.fusion_layers},
                     {"layerwise", model.layerwise},
                     {"combine", model.combine},
                     {"fusion_hidden", model.fusion_hidden},
                     {"dropout", model.dropout}};
    root["channel"] = {{"model", chan::to_string(channel.model)},
                       {"m_antennas", channel.m_antennas},
                       {"users", channel.users},
                       {"rician_r", channel.rician_r},
                       {"csi_error_var", channel.csi_error_var}};
    root["train"] = {{"phases", train.phases},
                     {"semantic", phase_json(train.semantic)},
                     {"jsc", phase_json(train.jsc)},
                     {"whole", phase_json(train.whole)},
                     {"freeze_image_encoder", train.freeze_image_encoder}};
    root["eval"] = {{"snr_grid_db", eval.snr_grid_db},
                    {"seeds", eval.seeds},
                    {"csi", eval.csi},
                    {"imperfect_csi_var", eval.imperfect_csi_var},
                    {"baseline", eval.baseline},
                    {"baseline_modulation", eval.baseline_modulation},
                    {"max_samples", eval.max_samples},
                    {"timing_in_csv", eval.timing_in_csv},
                    {"user_sweep_snr_db", eval.user_sweep_snr_db},
                    {"user_counts", eval.user_counts}};
    return root.dump(2) + "\n";
}

uint64_t ExperimentConfig::hash() const {
    // FNV-1a over the canonical resolved text.
    const std::string text = to_json_text();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace semcom::exp
