// Command-line front end: dataset generation, phased training, evaluation,
// SNR/user sweeps, symbol and complexity accounting, and VQA attention dumps.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

#include "semcom/experiments.hpp"
#include "semcom/metrics.hpp"
#include "semcom/tensor_io.hpp"

using nlohmann::json;
using namespace semcom;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<uint64_t> seed_override;
    std::string out_override;
};

exp::ExperimentConfig load_config(const GlobalArgs& g) {
    auto cfg = exp::ExperimentConfig::from_file(g.config_path);
    if (g.seed_override) cfg.seed = *g.seed_override;
    if (!g.out_override.empty()) cfg.out_dir = g.out_override;
    return cfg;
}

void cmd_gen_data(const exp::ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir + "/dataset";
    if (cfg.task == "ir") {
        data::save_retrieval(data::gen_retrieval(cfg.dataset.num_classes, cfg.dataset.per_class,
                                                 cfg.dataset.image_size, cfg.dataset.seed),
                             dir);
    } else if (cfg.task == "mt") {
        data::save_translation(
            data::gen_translation(cfg.dataset.num_pairs, cfg.dataset.max_len, cfg.dataset.seed),
            dir);
    } else {
        data::save_vqa(data::gen_vqa(cfg.dataset.num_scenes, cfg.dataset.questions_per_scene,
                                     cfg.dataset.grid, cfg.dataset.seed),
                       dir);
    }
    std::cout << "dataset written to " << dir << "\n";
}

void cmd_eval(const exp::ExperimentConfig& cfg, double snr_db, const std::string& csi,
              uint64_t eval_seed) {
    auto ckpt = exp::latest_checkpoint(cfg);
    if (!ckpt) throw std::runtime_error("eval: no checkpoint under " + cfg.out_dir);
    const auto loaded = exp::Checkpoint::load(*ckpt);

    exp::EvalOptions opt;
    opt.snr_db = snr_db;
    opt.csi_error_var = csi == "imperfect" ? cfg.eval.imperfect_csi_var : 0.0;
    opt.seed = eval_seed;
    opt.max_samples = cfg.eval.max_samples;

    double value = 0.0;
    std::string metric;
    if (cfg.task == "ir") {
        auto ds = exp::load_or_gen_retrieval(cfg);
        model::RetrievalTransceiver tx(exp::retrieval_config(cfg), 0);
        exp::Checkpoint::restore(loaded, tx.params(), cfg.hash());
        value = exp::eval_ir_recall(tx, ds, cfg.channel, opt);
        metric = "recall@1";
    } else if (cfg.task == "mt") {
        auto ds = exp::load_or_gen_translation(cfg);
        model::TranslationTransceiver tx(exp::translation_config(cfg, ds), 0);
        exp::Checkpoint::restore(loaded, tx.params(), cfg.hash());
        value = exp::eval_mt_bleu(tx, ds, cfg.channel, opt);
        metric = "bleu";
    } else {
        auto ds = exp::load_or_gen_vqa(cfg);
        model::VqaTransceiver tx(exp::vqa_config(cfg, ds), 0);
        exp::Checkpoint::restore(loaded, tx.params(), cfg.hash());
        value = exp::eval_vqa_accuracy(tx, ds, cfg.channel, opt);
        metric = "accuracy";
    }
    json out = {{"task", cfg.task}, {"snr_db", snr_db},      {"csi", csi},
                {"seed", eval_seed}, {"metric", metric},      {"value", value},
                {"checkpoint", *ckpt}};
    std::cout << out.dump(2) << "\n";
    io::write_text(cfg.out_dir + "/eval.json", out.dump(2) + "\n");
}

void cmd_account(const exp::ExperimentConfig& cfg) {
    const auto symbols = exp::account_symbols(cfg);
    const auto ops = exp::account_ops(cfg);
    json out;
    out["task"] = cfg.task;
    out["symbols"] = {{"semantic", symbols.semantic_symbols},
                      {"semantic_text", symbols.semantic_text_symbols},
                      {"baseline", symbols.baseline_symbols},
                      {"baseline_text", symbols.baseline_text_symbols},
                      {"ratio", symbols.ratio}};
    out["operations"] = {{"semantic_additions", ops.semantic_additions},
                         {"semantic_multiplications", ops.semantic_multiplications},
                         {"baseline_additions", ops.baseline_additions},
                         {"baseline_multiplications", ops.baseline_multiplications}};
    std::cout << out.dump(2) << "\n";
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/account.json", out.dump(2) + "\n");
}

void cmd_attention_dump(const exp::ExperimentConfig& cfg, int samples, double snr_db) {
    if (cfg.task != "vqa")
        throw std::runtime_error("attention-dump: only meaningful for the vqa task");
    auto ckpt = exp::latest_checkpoint(cfg);
    if (!ckpt) throw std::runtime_error("attention-dump: no checkpoint under " + cfg.out_dir);
    auto ds = exp::load_or_gen_vqa(cfg);
    model::VqaTransceiver tx(exp::vqa_config(cfg, ds), 0);
    exp::Checkpoint::restore(exp::Checkpoint::load(*ckpt), tx.params(), cfg.hash());

    model::ChannelParams ch = cfg.channel;
    ch.users = 2;
    if (ch.model == chan::FadingModel::AWGN) ch.m_antennas = 2;
    model::MultiUserChannel channel(ch);

    Rng rng(cfg.seed);
    json dump = json::array();
    const int n = std::min<int>(samples, static_cast<int>(ds.test_indices.size()));
    for (int i = 0; i < n; ++i) {
        const auto& q = ds.questions[ds.test_indices[i]];
        auto txt = tx.text_semantic_encode(q.tokens);
        auto res = channel.pass({tx.image_transmit_encode(
                                     tx.image_semantic_encode(ds.scenes[q.scene].image)),
                                 tx.text_transmit_encode(txt.z)},
                                snr_db, rng.next_u64(), rng.next_u64());
        auto img_tokens =
            tx.dimension_increase(tx.image_receive_decode(res.detected_rows[0]));
        auto txt_tokens = tx.text_receive_decode(res.detected_rows[1]);
        auto trace = tx.fuse(txt_tokens, txt.mask, img_tokens);
        auto dist = tx.information_fusion(trace.text_cls, trace.image_cls);
        int pred = 0;
        for (int j = 1; j < dist->cols(); ++j)
            if (dist->val.at(0, j) > dist->val.at(0, pred)) pred = j;

        json sample;
        std::vector<std::string> words;
        for (int t : q.tokens) words.push_back(ds.question_vocab[t]);
        sample["question"] = words;
        sample["answer"] = ds.answer_names[q.answer];
        sample["predicted"] = ds.answer_names[pred];
        json layers = json::array();
        for (const auto& layer_attn : trace.guided_attn) {
            json heads = json::array();
            for (const Mat& head : layer_attn.head_weights) {
                json rows = json::array();
                for (int r = 0; r < head.rows; ++r) {
                    json row = json::array();
                    for (int c = 0; c < head.cols; ++c) row.push_back(head.at(r, c));
                    rows.push_back(std::move(row));
                }
                heads.push_back(std::move(rows));
            }
            layers.push_back(std::move(heads));
        }
        sample["decoder_guided_attention"] = std::move(layers);
        dump.push_back(std::move(sample));
    }
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/attention.json", dump.dump() + "\n");
    std::cout << "wrote " << n << " attention dumps to " << cfg.out_dir << "/attention.json\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-oriented multi-user semantic communication simulator"};
    app.require_subcommand(1);
    app.fallthrough();  // accept global flags after the subcommand name

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment config (JSON)")->required();
    uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "override config seed");
    app.add_option("--out", g.out_override, "override output directory");

    auto* gen = app.add_subcommand("gen-data", "generate and persist the dataset");
    auto* train_cmd = app.add_subcommand("train", "run the configured training phases");
    double eval_snr = 18.0;
    std::string eval_csi = "perfect";
    uint64_t eval_seed = 1;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate the newest checkpoint at one point");
    eval_cmd->add_option("--snr", eval_snr, "operating SNR in dB");
    eval_cmd->add_option("--csi", eval_csi, "perfect|imperfect")
        ->check(CLI::IsMember({"perfect", "imperfect"}));
    eval_cmd->add_option("--eval-seed", eval_seed, "evaluation seed");
    auto* sweep_snr = app.add_subcommand("sweep-snr", "metric vs SNR grid, CSV + JSON");
    auto* sweep_users = app.add_subcommand("sweep-users", "metric vs user count");
    auto* account = app.add_subcommand("account", "symbol and operation accounting");
    int dump_samples = 4;
    double dump_snr = 18.0;
    auto* attn = app.add_subcommand("attention-dump", "emit per-layer fusion attention maps");
    attn->add_option("--samples", dump_samples, "number of held-out samples");
    attn->add_option("--snr", dump_snr, "operating SNR in dB");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (seed_opt->count()) g.seed_override = seed_value;
    exp::ExperimentConfig cfg;
    try {
        cfg = load_config(g);
    } catch (const std::exception& e) {
        // Unreadable or invalid configs are usage errors.
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) cmd_gen_data(cfg);
        if (train_cmd->parsed()) exp::run_training(cfg);
        if (eval_cmd->parsed()) cmd_eval(cfg, eval_snr, eval_csi, eval_seed);
        if (sweep_snr->parsed()) {
            auto records = exp::run_sweep(cfg);
            std::cout << "wrote " << records.size() << " sweep records to " << cfg.out_dir
                      << "/sweep_snr.csv\n";
        }
        if (sweep_users->parsed()) {
            auto records = exp::run_user_sweep(cfg);
            std::cout << "wrote " << records.size() << " sweep records to " << cfg.out_dir
                      << "/sweep_users.csv\n";
        }
        if (account->parsed()) cmd_account(cfg);
        if (attn->parsed()) cmd_attention_dump(cfg, dump_samples, dump_snr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
