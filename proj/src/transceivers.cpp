#include "semcom/transceivers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semcom::model {

using namespace semcom::nn;

namespace {
uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CMat rows_to_complex(const Mat& x) {
    CMat out(x.rows, x.cols / 2);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < out.cols; ++j)
            out.at(i, j) = cplx(x.at(i, 2 * j), x.at(i, 2 * j + 1));
    return out;
}

Mat rows_to_real(const CMat& x) {
    Mat out(x.rows, x.cols * 2);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) {
            out.at(i, 2 * j) = x.at(i, j).real();
            out.at(i, 2 * j + 1) = x.at(i, j).imag();
        }
    return out;
}
}  // namespace

ChannelUse make_channel_use(const chan::ChannelRealization& h, const chan::CsiEstimate& csi,
                            const chan::NoiseSpec& noise, int block_len, uint64_t noise_seed) {
    ChannelUse use;
    const CMat a = chan::lmmse_matrix(csi, noise.sigma_n_sq);
    use.eff = cmatmul(a, h.h);
    CMat n(h.rx_antennas(), block_len);
    if (noise.sigma_n_sq > 0.0) {
        Rng rng(noise_seed);
        for (auto& v : n.data) v = rng.cnormal(noise.sigma_n_sq);
    }
    use.bias = cmatmul(a, n);
    return use;
}

Var channel_pass(const Var& x_real, const ChannelUse& use) {
    if (x_real->val.cols % 2 != 0)
        throw std::invalid_argument("channel_pass: odd real width");
    if (x_real->val.rows != use.eff.rows)
        throw std::invalid_argument("channel_pass: user count mismatch");
    if (x_real->val.cols / 2 != use.bias.cols)
        throw std::invalid_argument("channel_pass: block length mismatch");

    CMat x = rows_to_complex(x_real->val);
    CMat detected = cmatmul(use.eff, x) + use.bias;
    Mat val = rows_to_real(detected);

    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->requires_grad = x_real->requires_grad;
    if (n->requires_grad) {
        n->parents = {x_real};
        const CMat eff_h = hermitian(use.eff);
        n->backward_fn = [x_real, eff_h](Node& node) {
            CMat w = rows_to_complex(node.grad);
            x_real->accumulate(rows_to_real(cmatmul(eff_h, w)));
        };
    }
    return n;
}

MultiUserChannel::Result MultiUserChannel::pass(const std::vector<Var>& user_rows, double snr_db,
                                                uint64_t h_seed, uint64_t block_seed) const {
    if (static_cast<int>(user_rows.size()) != params_.users)
        throw std::invalid_argument("MultiUserChannel: row count != configured users");
    int max_width = 0;
    for (const auto& r : user_rows) {
        if (r->rows() != 1) throw std::invalid_argument("MultiUserChannel: rows must be 1 x 2L");
        if (r->cols() % 2 != 0) throw std::invalid_argument("MultiUserChannel: odd row width");
        max_width = std::max(max_width, r->cols());
    }
    const int block_len = max_width / 2;

    std::vector<Var> padded;
    padded.reserve(user_rows.size());
    for (const auto& r : user_rows)
        padded.push_back(r->cols() == max_width ? r : pad_cols(r, max_width));
    Var block = user_rows.size() == 1 ? padded[0] : concat_rows(padded);

    auto h = chan::sample_channel(params_.model, params_.m_antennas, params_.users,
                                  params_.rician_r, h_seed);
    auto csi = chan::estimate_csi(h, params_.csi_error_var, mix_seed(block_seed, 0xC51));

    chan::SymbolBlock sb;
    sb.symbols = rows_to_complex(block->val);
    sb.valid_cols.clear();
    for (const auto& r : user_rows) sb.valid_cols.push_back(r->cols() / 2);
    const auto noise = chan::calibrate_noise(snr_db, h, sb);

    const auto use = make_channel_use(h, csi, noise, block_len, mix_seed(block_seed, 0x401));
    Var detected = channel_pass(block, use);

    Result res;
    res.block_len = block_len;
    for (size_t k = 0; k < user_rows.size(); ++k) {
        Var row = user_rows.size() == 1 ? detected
                                        : slice_rows(detected, static_cast<int>(k), 1);
        if (user_rows[k]->cols() != max_width) row = slice_cols(row, 0, user_rows[k]->cols());
        res.detected_rows.push_back(row);
    }
    return res;
}

JscCodec::JscCodec(ParameterSet& ps, const std::string& prefix, int l_s, int l_c,
                   const std::vector<int>& hidden, Rng& rng)
    : l_s_(l_s), l_c_(l_c) {
    if (2 * l_c >= l_s)
        throw std::invalid_argument("JscCodec: need l_c < l_s/2 for actual compression");
    std::vector<DenseLayerSpec> enc_spec, dec_spec;
    for (int hdim : hidden) enc_spec.push_back({hdim, Activation::Relu, 0.0});
    enc_spec.push_back({2 * l_c, Activation::Linear, 0.0});
    for (int hdim : hidden) dec_spec.push_back({hdim, Activation::Relu, 0.0});
    dec_spec.push_back({l_s, Activation::Linear, 0.0});
    enc_ = DenseStack(ps, prefix + ".enc", l_s, enc_spec, rng);
    dec_ = DenseStack(ps, prefix + ".dec", 2 * l_c, dec_spec, rng);
}

Var JscCodec::encode(const Var& z) const {
    if (z->cols() != l_s_) throw std::invalid_argument("JscCodec::encode: width mismatch");
    // Unit average power per complex symbol: ||row||^2 = l_c.
    return scale(l2_normalize_rows(enc_.apply(z)), std::sqrt(static_cast<double>(l_c_)));
}

Var JscCodec::decode(const Var& x_real) const {
    if (x_real->cols() != 2 * l_c_)
        throw std::invalid_argument("JscCodec::decode: width mismatch");
    return dec_.apply(x_real);
}

Var flatten_symbol_rows(const Var& x) { return reshape(x, 1, x->rows() * x->cols()); }

Var unflatten_symbol_rows(const Var& row, int tokens, int l_c) {
    return reshape(row, tokens, 2 * l_c);
}

RetrievalTransceiver::RetrievalTransceiver(const RetrievalConfig& cfg, uint64_t init_seed)
    : cfg_(cfg) {
    Rng rng(init_seed);
    embed_ = PatchEmbedding(params_, "sem_enc.embed", cfg.image_size, cfg.image_size,
                            cfg.channels, cfg.patch, cfg.d_model, rng);
    for (int i = 0; i < cfg.enc_layers; ++i)
        encoder_.emplace_back(params_, "sem_enc.layer" + std::to_string(i), cfg.d_model,
                              cfg.heads, cfg.ffn, rng);
    jsc_ = JscCodec(params_, "jsc", cfg.d_model, cfg.l_c, cfg.jsc_hidden, rng);
}

Var RetrievalTransceiver::semantic_encode(const Image& img) const {
    auto seq = embed_.apply(img);
    Var x = seq.tokens;
    for (const auto& layer : encoder_) x = layer.apply(x, seq.mask).out;
    return l2_normalize_rows(slice_rows(x, 0, 1));
}

Var RetrievalTransceiver::transmit_encode(const Var& z) const {
    return flatten_symbol_rows(jsc_.encode(z));
}

Var RetrievalTransceiver::receive_decode(const Var& detected_row) const {
    return jsc_.decode(unflatten_symbol_rows(detected_row, 1, cfg_.l_c));
}

std::vector<int> rank_by_distance(const Mat& query, const Mat& gallery, int k) {
    if (gallery.rows == 0) throw std::invalid_argument("rank_by_distance: empty gallery");
    if (query.cols != gallery.cols)
        throw std::invalid_argument("rank_by_distance: width mismatch");
    std::vector<std::pair<double, int>> scored(gallery.rows);
    for (int g = 0; g < gallery.rows; ++g) {
        double d2 = 0.0;
        for (int j = 0; j < query.cols; ++j) {
            const double diff = query.at(0, j) - gallery.at(g, j);
            d2 += diff * diff;
        }
        scored[g] = {d2, g};
    }
    std::sort(scored.begin(), scored.end());
    const int lim = std::min<int>(k, gallery.rows);
    std::vector<int> out(lim);
    for (int i = 0; i < lim; ++i) out[i] = scored[i].second;
    return out;
}

TranslationTransceiver::TranslationTransceiver(const TranslationConfig& cfg, uint64_t init_seed)
    : cfg_(cfg) {
    Rng rng(init_seed);
    src_embed_ = TextEmbedding(params_, "sem_enc.embed", cfg.vocab, cfg.d_model, cfg.max_len,
                               false, rng);
    for (int i = 0; i < cfg.enc_layers; ++i)
        encoder_.emplace_back(params_, "sem_enc.layer" + std::to_string(i), cfg.d_model,
                              cfg.heads, cfg.ffn, rng);
    // Target stream can carry one extra position for EOS.
    tgt_embed_ = TextEmbedding(params_, "sem_dec.embed", cfg.vocab, cfg.d_model, cfg.max_len + 1,
                               false, rng);
    for (int i = 0; i < cfg.dec_layers; ++i)
        decoder_.emplace_back(params_, "sem_dec.layer" + std::to_string(i), cfg.d_model,
                              cfg.heads, cfg.ffn, rng);
    out_proj_ = LinearLayer(params_, "sem_dec.out", cfg.d_model, cfg.vocab, rng);
    jsc_ = JscCodec(params_, "jsc", cfg.d_model, cfg.l_c, cfg.jsc_hidden, rng);
}

TranslationTransceiver::Encoded TranslationTransceiver::semantic_encode(
    const std::vector<int>& src_ids) const {
    if (static_cast<int>(src_ids.size()) > cfg_.max_len)
        throw std::invalid_argument("semantic_encode: sentence longer than max_len");
    std::vector<int> padded = src_ids;
    std::vector<bool> valid(src_ids.size(), true);
    while (static_cast<int>(padded.size()) < cfg_.max_len) {
        padded.push_back(data::ParallelCorpus::kPad);
        valid.push_back(false);
    }
    auto seq = src_embed_.apply(padded, valid);
    Var x = seq.tokens;
    for (const auto& layer : encoder_) x = layer.apply(x, seq.mask).out;
    return {x, seq.mask};
}

Var TranslationTransceiver::transmit_encode(const Var& z) const {
    return flatten_symbol_rows(jsc_.encode(z));
}

Var TranslationTransceiver::receive_decode(const Var& detected_row) const {
    return jsc_.decode(unflatten_symbol_rows(detected_row, cfg_.max_len, cfg_.l_c));
}

Var TranslationTransceiver::run_decoder(const Var& z_hat, const std::vector<bool>& src_mask,
                                        const std::vector<int>& shifted_ids) const {
    auto seq = tgt_embed_.apply(shifted_ids, {});
    Var x = seq.tokens;
    for (const auto& layer : decoder_)
        x = layer.apply(x, seq.mask, true, z_hat, src_mask).out;
    return out_proj_.apply(x);
}

Var TranslationTransceiver::decode_teacher_forced(const Var& z_hat,
                                                  const std::vector<bool>& src_mask,
                                                  const std::vector<int>& target_ids) const {
    if (target_ids.empty())
        throw std::invalid_argument("decode_teacher_forced: missing target ids");
    std::vector<int> shifted;
    shifted.push_back(data::ParallelCorpus::kBos);
    shifted.insert(shifted.end(), target_ids.begin(), target_ids.end() - 1);
    return run_decoder(z_hat, src_mask, shifted);
}

std::vector<int> TranslationTransceiver::decode_greedy(const Var& z_hat,
                                                       const std::vector<bool>& src_mask,
                                                       int max_steps) const {
    std::vector<int> out;
    std::vector<int> context{data::ParallelCorpus::kBos};
    for (int step = 0; step < max_steps; ++step) {
        Var logits = run_decoder(z_hat, src_mask, context);
        const int last = logits->rows() - 1;
        int best = 0;
        double best_v = logits->val.at(last, 0);
        for (int j = 1; j < logits->cols(); ++j)
            if (logits->val.at(last, j) > best_v) {
                best_v = logits->val.at(last, j);
                best = j;
            }
        if (best == data::ParallelCorpus::kEos) break;
        out.push_back(best);
        context.push_back(best);
        if (static_cast<int>(context.size()) > cfg_.max_len + 1) break;
    }
    return out;
}

VqaTransceiver::VqaTransceiver(const VqaConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(init_seed);
    image_embed_ = PatchEmbedding(params_, "img_sem.embed", cfg.image_size, cfg.image_size,
                                  cfg.channels, cfg.patch, cfg.d_image, rng);
    for (int i = 0; i < cfg.image_enc_layers; ++i)
        image_encoder_.emplace_back(params_, "img_sem.layer" + std::to_string(i), cfg.d_image,
                                    cfg.heads, cfg.ffn, rng);
    text_embed_ = TextEmbedding(params_, "txt_sem.embed", cfg.question_vocab, cfg.d_text,
                                cfg.max_question_len, true, rng);
    for (int i = 0; i < cfg.text_enc_layers; ++i)
        text_encoder_.emplace_back(params_, "txt_sem.layer" + std::to_string(i), cfg.d_text,
                                   cfg.heads, cfg.ffn, rng);
    image_jsc_ = JscCodec(params_, "img_jsc", cfg.d_image, cfg.image_l_c, cfg.jsc_hidden, rng);
    text_jsc_ = JscCodec(params_, "txt_jsc", cfg.d_text, cfg.text_l_c, cfg.jsc_hidden, rng);

    dim_fc1_ = LinearLayer(params_, "fusion.dim_inc.fc0", cfg.d_image, cfg.d_text, rng);
    dim_fc2_ = LinearLayer(params_, "fusion.dim_inc.fc1", cfg.d_text, cfg.d_text, rng);
    for (int i = 0; i < cfg.fusion_layers; ++i) {
        fusion_encoder_.emplace_back(params_, "fusion.enc" + std::to_string(i), cfg.d_text,
                                     cfg.heads, cfg.ffn, rng);
        fusion_decoder_.emplace_back(params_, "fusion.dec" + std::to_string(i), cfg.d_text,
                                     cfg.heads, cfg.ffn, rng);
    }
    text_cls_proj_ = LinearLayer(params_, "fusion.text_proj", cfg.d_text, cfg.d_text, rng);
    image_cls_proj_ = LinearLayer(params_, "fusion.image_proj", cfg.d_text, cfg.d_text, rng);
    const int combine_width = cfg.combine == "concat" ? 2 * cfg.d_text : cfg.d_text;
    ans_fc1_ = LinearLayer(params_, "fusion.answer.fc0", combine_width, cfg.fusion_hidden, rng);
    ans_fc2_ = LinearLayer(params_, "fusion.answer.fc1", cfg.fusion_hidden, cfg.answers, rng);
}

Var VqaTransceiver::image_semantic_encode(const Image& img) const {
    auto seq = image_embed_.apply(img);
    Var x = seq.tokens;
    for (const auto& layer : image_encoder_) x = layer.apply(x, seq.mask).out;
    return x;  // all token rows transmit
}

VqaTransceiver::EncodedText VqaTransceiver::text_semantic_encode(
    const std::vector<int>& question) const {
    if (static_cast<int>(question.size()) > cfg_.max_question_len)
        throw std::invalid_argument("text_semantic_encode: question too long");
    std::vector<int> padded = question;
    std::vector<bool> valid(question.size(), true);
    while (static_cast<int>(padded.size()) < cfg_.max_question_len) {
        padded.push_back(0);
        valid.push_back(false);
    }
    auto seq = text_embed_.apply(padded, valid);
    Var x = seq.tokens;
    for (const auto& layer : text_encoder_) x = layer.apply(x, seq.mask).out;
    return {x, seq.mask};
}

Var VqaTransceiver::image_transmit_encode(const Var& z) const {
    return flatten_symbol_rows(image_jsc_.encode(z));
}

Var VqaTransceiver::text_transmit_encode(const Var& z) const {
    return flatten_symbol_rows(text_jsc_.encode(z));
}

Var VqaTransceiver::image_receive_decode(const Var& row) const {
    return image_jsc_.decode(unflatten_symbol_rows(row, image_tokens(), cfg_.image_l_c));
}

Var VqaTransceiver::text_receive_decode(const Var& row) const {
    return text_jsc_.decode(unflatten_symbol_rows(row, text_tokens(), cfg_.text_l_c));
}

Var VqaTransceiver::dimension_increase(const Var& z_image, bool training, Rng* rng) const {
    auto drop = [&](const Var& v) {
        if (!training || cfg_.dropout <= 0.0) return v;
        if (!rng) throw std::invalid_argument("dimension_increase: training needs an Rng");
        return dropout(v, cfg_.dropout, *rng, true);
    };
    Var h = elu(dim_fc1_.apply(drop(z_image)));
    return elu(dim_fc2_.apply(drop(h)));
}

VqaTransceiver::FusionTrace VqaTransceiver::fuse(const Var& text_tokens,
                                                 const std::vector<bool>& text_mask,
                                                 const Var& image_tokens) const {
    FusionTrace trace;
    Var x = text_tokens;
    for (const auto& layer : fusion_encoder_) {
        x = layer.apply(x, text_mask).out;
        trace.encoder_outputs.push_back(x);
    }
    auto run = run_fusion_decoder(image_tokens, trace.encoder_outputs, text_mask);
    trace.decoder_outputs = std::move(run.outputs);
    trace.guided_attn = std::move(run.guided_attn);
    trace.text_cls = slice_rows(trace.encoder_outputs.back(), 0, 1);
    trace.image_cls = slice_rows(trace.decoder_outputs.back(), 0, 1);
    return trace;
}

VqaTransceiver::DecoderRun VqaTransceiver::run_fusion_decoder(
    const Var& image_tokens, const std::vector<Var>& encoder_layer_outputs,
    const std::vector<bool>& text_mask) const {
    if (encoder_layer_outputs.size() != fusion_decoder_.size())
        throw std::invalid_argument("run_fusion_decoder: encoder/decoder depth mismatch");
    DecoderRun run;
    Var x = image_tokens;
    for (size_t i = 0; i < fusion_decoder_.size(); ++i) {
        const Var& kv =
            cfg_.layerwise ? encoder_layer_outputs[i] : encoder_layer_outputs.back();
        auto res = fusion_decoder_[i].apply(x, {}, false, kv, text_mask);
        x = res.out;
        run.outputs.push_back(x);
        run.guided_attn.push_back(std::move(res.guided_attn));
    }
    return run;
}

Var VqaTransceiver::answer_logits(const Var& text_cls, const Var& image_cls, bool training,
                                  Rng* rng) const {
    if (text_cls->cols() != cfg_.d_text || image_cls->cols() != cfg_.d_text)
        throw std::invalid_argument("answer_logits: CLS width mismatch");
    Var t = text_cls_proj_.apply(text_cls);
    Var im = image_cls_proj_.apply(image_cls);
    Var combined;
    if (cfg_.combine == "concat")
        combined = reshape(concat_rows({t, im}), 1, 2 * cfg_.d_text);
    else
        combined = add(t, im);
    auto drop = [&](const Var& v) {
        if (!training || cfg_.dropout <= 0.0) return v;
        if (!rng) throw std::invalid_argument("answer_logits: training needs an Rng");
        return dropout(v, cfg_.dropout, *rng, true);
    };
    Var h = elu(ans_fc1_.apply(drop(combined)));
    return ans_fc2_.apply(drop(h));
}

Var VqaTransceiver::information_fusion(const Var& text_cls, const Var& image_cls, bool training,
                                       Rng* rng) const {
    return softmax_rows(answer_logits(text_cls, image_cls, training, rng));
}

}  // namespace semcom::model
