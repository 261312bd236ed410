#include <bit>

#include "semcom/experiments.hpp"

namespace semcom::exp {

namespace {

long vqa_image_tokens(const ExperimentConfig& cfg) {
    const int size = cfg.dataset.grid * cfg.dataset.cell_px;
    const int side = size / cfg.model.patch;
    return static_cast<long>(side) * side + 1;
}

long vqa_text_tokens() { return 5 + 1; }  // max question length + CLS

long coded_symbols(long source_bits, baseline::Modulation mod) {
    const long coded = 3 * (source_bits + 6);
    const int bps = baseline::bits_per_symbol(mod);
    return (coded + bps - 1) / bps;
}

long image_source_bits(int size) {
    return (5L + static_cast<long>(size) * size * 3) * 8;  // dims header + 8-bit pixels
}

// Mean rendered text length of the toy corpus: ids 3..26 as decimal digits
// plus separators plus the 4-byte length header.
long mean_text_source_bits(const data::ParallelCorpus& ds) {
    long total = 0;
    for (const auto& s : ds.source) {
        long chars = 0;
        for (size_t i = 0; i < s.size(); ++i)
            chars += static_cast<long>(std::to_string(s[i]).size()) + (i ? 1 : 0);
        total += (4 + chars) * 8;
    }
    return total / static_cast<long>(ds.source.size());
}

long mean_question_source_bits(const data::VqaDataset& ds) {
    long total = 0;
    for (const auto& q : ds.questions) {
        long chars = 0;
        for (size_t i = 0; i < q.tokens.size(); ++i)
            chars += static_cast<long>(std::to_string(q.tokens[i]).size()) + (i ? 1 : 0);
        total += (4 + chars) * 8;
    }
    return total / static_cast<long>(ds.questions.size());
}

void jsc_counts(int l_s, int l_c, const std::vector<int>& hidden, long tokens, long& adds,
                long& mults) {
    long a = 0, m = 0;
    int w = l_s;
    for (int h : hidden) {
        dense_op_counts(w, h, a, m);
        w = h;
    }
    dense_op_counts(w, 2 * l_c, a, m);
    w = 2 * l_c;
    for (int h : hidden) {
        dense_op_counts(w, h, a, m);
        w = h;
    }
    dense_op_counts(w, l_s, a, m);
    adds += a * tokens;
    mults += m * tokens;
}

void baseline_code_counts(long payload_bits, long& adds, long& mults) {
    adds += conv_encoder_additions(payload_bits) + viterbi_additions(payload_bits);
    mults += 0;
}

}  // namespace

void dense_op_counts(int in, int out, long& additions, long& multiplications) {
    additions += static_cast<long>(out) * (in - 1) + out;
    multiplications += static_cast<long>(in) * out;
}

// Each generator polynomial costs popcount-1 modulo-2 additions per step.
long conv_encoder_additions(long payload_bits) {
    long taps = 0;
    for (uint32_t poly : {0133u, 0171u, 0165u}) taps += std::popcount(poly) - 1;
    return (payload_bits + 6) * taps;
}

// Per trellis step and state: two branches, each a 3-bit Hamming metric
// (3 additions) plus a path-metric addition, then one compare per state;
// compares are counted as additions.
long viterbi_additions(long payload_bits) {
    return (payload_bits + 6) * (64L * 2 * (3 + 1) + 64);
}

long simulated_symbols_per_sample(const ExperimentConfig& cfg) {
    if (cfg.task == "ir") return cfg.model.l_c;  // CLS-only transmission
    if (cfg.task == "mt") return static_cast<long>(cfg.dataset.max_len) * cfg.model.l_c;
    return vqa_image_tokens(cfg) * cfg.model.image_l_c +
           vqa_text_tokens() * cfg.model.text_l_c;
}

SymbolAccount account_symbols(const ExperimentConfig& cfg) {
    SymbolAccount acc;
    acc.task = cfg.task;
    if (cfg.task == "ir") {
        acc.semantic_symbols = cfg.model.l_c;
        acc.baseline_symbols =
            coded_symbols(image_source_bits(cfg.dataset.image_size), baseline::Modulation::QAM8);
    } else if (cfg.task == "mt") {
        acc.semantic_symbols = static_cast<long>(cfg.dataset.max_len) * cfg.model.l_c;
        const auto ds =
            data::gen_translation(cfg.dataset.num_pairs, cfg.dataset.max_len, cfg.dataset.seed);
        acc.baseline_symbols = coded_symbols(mean_text_source_bits(ds),
                                             baseline::modulation_from_string(
                                                 cfg.eval.baseline_modulation));
    } else {
        acc.semantic_symbols = vqa_image_tokens(cfg) * cfg.model.image_l_c;
        acc.semantic_text_symbols = vqa_text_tokens() * cfg.model.text_l_c;
        acc.baseline_symbols = coded_symbols(
            image_source_bits(cfg.dataset.grid * cfg.dataset.cell_px),
            baseline::Modulation::QAM8);
        const auto ds = data::gen_vqa(cfg.dataset.num_scenes, cfg.dataset.questions_per_scene,
                                      cfg.dataset.grid, cfg.dataset.seed, cfg.dataset.cell_px);
        acc.baseline_text_symbols =
            coded_symbols(mean_question_source_bits(ds), baseline::Modulation::BPSK);
    }
    acc.ratio = acc.baseline_symbols > 0
                    ? static_cast<double>(acc.semantic_symbols) / acc.baseline_symbols
                    : 0.0;
    return acc;
}

OpsAccount account_ops(const ExperimentConfig& cfg) {
    OpsAccount acc;
    acc.task = cfg.task;
    if (cfg.task == "ir") {
        jsc_counts(cfg.model.d_model, cfg.model.l_c, cfg.model.jsc_hidden, 1,
                   acc.semantic_additions, acc.semantic_multiplications);
        baseline_code_counts(image_source_bits(cfg.dataset.image_size), acc.baseline_additions,
                             acc.baseline_multiplications);
    } else if (cfg.task == "mt") {
        jsc_counts(cfg.model.d_model, cfg.model.l_c, cfg.model.jsc_hidden, cfg.dataset.max_len,
                   acc.semantic_additions, acc.semantic_multiplications);
        const auto ds =
            data::gen_translation(cfg.dataset.num_pairs, cfg.dataset.max_len, cfg.dataset.seed);
        baseline_code_counts(mean_text_source_bits(ds), acc.baseline_additions,
                             acc.baseline_multiplications);
    } else {
        jsc_counts(cfg.model.d_image, cfg.model.image_l_c, cfg.model.jsc_hidden,
                   vqa_image_tokens(cfg), acc.semantic_additions, acc.semantic_multiplications);
        jsc_counts(cfg.model.d_text, cfg.model.text_l_c, cfg.model.jsc_hidden, vqa_text_tokens(),
                   acc.semantic_additions, acc.semantic_multiplications);
        baseline_code_counts(image_source_bits(cfg.dataset.grid * cfg.dataset.cell_px),
                             acc.baseline_additions, acc.baseline_multiplications);
        const auto ds = data::gen_vqa(cfg.dataset.num_scenes, cfg.dataset.questions_per_scene,
                                      cfg.dataset.grid, cfg.dataset.seed, cfg.dataset.cell_px);
        baseline_code_counts(mean_question_source_bits(ds), acc.baseline_additions,
                             acc.baseline_multiplications);
    }
    return acc;
}

}  // namespace semcom::exp
