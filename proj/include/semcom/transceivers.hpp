#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/data.hpp"
#include "semcom/nn.hpp"

namespace semcom::model {

// ---- differentiable channel bridge ----

// One block's channel conditions, sampled then held fixed so gradients flow
// through the linear detection map only (reparameterized sampling).
struct ChannelUse {
    CMat eff;   // A*H, users x users
    CMat bias;  // A*N, users x block length
};

ChannelUse make_channel_use(const chan::ChannelRealization& h, const chan::CsiEstimate& csi,
                            const chan::NoiseSpec& noise, int block_len, uint64_t noise_seed);

// x_real: K x 2L interleaved re/im rows. Forward detects
// X_hat = eff*X + bias; backward applies the adjoint eff^H.
nn::Var channel_pass(const nn::Var& x_real, const ChannelUse& use);

struct ChannelParams {
    chan::FadingModel model = chan::FadingModel::Rician;
    int m_antennas = 4;
    int users = 2;
    double rician_r = 2.0;
    double csi_error_var = 0.0;
};

// Stacks per-user flattened symbol rows into one synchronized block, passes
// it through a sampled channel realization and L-MMSE detection, and hands
// each user back its own detected row. Shorter rows are zero padded.
class MultiUserChannel {
public:
    explicit MultiUserChannel(const ChannelParams& p) : params_(p) {}

    struct Result {
        std::vector<nn::Var> detected_rows;  // per user, 1 x original width
        int block_len = 0;                   // complex symbols per user row
    };
    // h_seed picks the fading realization (shared across a batch when block
    // fading is held constant); block_seed drives noise and CSI error.
    Result pass(const std::vector<nn::Var>& user_rows, double snr_db, uint64_t h_seed,
                uint64_t block_seed) const;

    const ChannelParams& params() const { return params_; }

private:
    ChannelParams params_;
};

// ---- JSC codec (shared by all transceivers) ----

// Dense compression of semantic rows into unit-power complex symbol pairs and
// back. Applied row-wise with shared weights: each token row becomes l_c
// complex symbols. Enforces l_c < l_s / 2 at construction.
class JscCodec {
public:
    JscCodec() = default;
    JscCodec(nn::ParameterSet& ps, const std::string& prefix, int l_s, int l_c,
             const std::vector<int>& hidden, Rng& rng);

    // z: T x l_s -> T x 2*l_c, each row scaled to unit average complex power.
    nn::Var encode(const nn::Var& z) const;
    // x_real: T x 2*l_c -> T x l_s.
    nn::Var decode(const nn::Var& x_real) const;

    int l_s() const { return l_s_; }
    int l_c() const { return l_c_; }

private:
    nn::DenseStack enc_, dec_;
    int l_s_ = 0, l_c_ = 0;
};

// Row-major flatten of T x 2*l_c symbol rows into a single 1 x 2*T*l_c
// transmit row, and back.
nn::Var flatten_symbol_rows(const nn::Var& x);
nn::Var unflatten_symbol_rows(const nn::Var& row, int tokens, int l_c);

// ---- image retrieval transceiver ----

struct RetrievalConfig {
    int image_size = 32;
    int patch = 8;
    int channels = 3;
    int d_model = 64;
    int heads = 4;
    int ffn = 128;
    int enc_layers = 3;
    int l_c = 16;
    std::vector<int> jsc_hidden = {128};
};

class RetrievalTransceiver {
public:
    RetrievalTransceiver(const RetrievalConfig& cfg, uint64_t init_seed);

    // Vision Transformer stack; returns the l2-normalized CLS row (1 x d).
    nn::Var semantic_encode(const Image& img) const;
    // CLS row -> one flattened transmit row (1 x 2*l_c).
    nn::Var transmit_encode(const nn::Var& z) const;
    nn::Var receive_decode(const nn::Var& detected_row) const;

    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }
    const RetrievalConfig& config() const { return cfg_; }
    const JscCodec& jsc() const { return jsc_; }
    int symbols_per_image() const { return cfg_.l_c; }  // CLS-only transmission

private:
    RetrievalConfig cfg_;
    nn::ParameterSet params_;
    nn::PatchEmbedding embed_;
    std::vector<nn::TransformerEncoderLayer> encoder_;
    JscCodec jsc_;
};

// Ascending-Euclidean ranking of gallery rows against the query; ties break
// toward the lower gallery index. Returns top-k gallery indices.
std::vector<int> rank_by_distance(const Mat& query, const Mat& gallery, int k);

// ---- machine translation transceiver ----

struct TranslationConfig {
    int vocab = 51;
    int max_len = 12;   // source positions (pad target shares it)
    int d_model = 64;
    int heads = 4;
    int ffn = 128;
    int enc_layers = 2;
    int dec_layers = 2;
    int l_c = 16;
    std::vector<int> jsc_hidden = {128};
};

class TranslationTransceiver {
public:
    TranslationTransceiver(const TranslationConfig& cfg, uint64_t init_seed);

    struct Encoded {
        nn::Var z;               // max_len x d_model
        std::vector<bool> mask;  // valid source positions
    };
    // Pads/masks to max_len and runs the encoder stack; all rows transmit.
    Encoded semantic_encode(const std::vector<int>& src_ids) const;

    nn::Var transmit_encode(const nn::Var& z) const;              // -> 1 x 2*T*l_c
    nn::Var receive_decode(const nn::Var& detected_row) const;    // -> max_len x d_model

    // Teacher-forced decode: logits for positions 0..T-1 of the target.
    nn::Var decode_teacher_forced(const nn::Var& z_hat, const std::vector<bool>& src_mask,
                                  const std::vector<int>& target_ids) const;
    // Greedy decode from BOS until EOS or max steps; returns ids without
    // BOS/EOS.
    std::vector<int> decode_greedy(const nn::Var& z_hat, const std::vector<bool>& src_mask,
                                   int max_steps) const;

    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }
    const TranslationConfig& config() const { return cfg_; }
    const JscCodec& jsc() const { return jsc_; }
    int symbols_per_sentence() const { return cfg_.max_len * cfg_.l_c; }

private:
    TranslationConfig cfg_;
    nn::ParameterSet params_;
    nn::TextEmbedding src_embed_, tgt_embed_;
    std::vector<nn::TransformerEncoderLayer> encoder_;
    std::vector<nn::TransformerDecoderLayer> decoder_;
    nn::LinearLayer out_proj_;
    JscCodec jsc_;

    nn::Var run_decoder(const nn::Var& z_hat, const std::vector<bool>& src_mask,
                        const std::vector<int>& shifted_ids) const;
};

// ---- VQA transceiver ----

struct VqaConfig {
    // image branch
    int image_size = 32;
    int patch = 8;
    int channels = 3;
    int d_image = 64;
    int image_enc_layers = 2;
    int image_l_c = 16;
    // text branch
    int question_vocab = 18;
    int max_question_len = 5;
    int d_text = 64;
    int text_enc_layers = 2;
    int text_l_c = 16;
    // shared
    int heads = 4;
    int ffn = 128;
    std::vector<int> jsc_hidden = {128};
    // fusion decoder
    int fusion_layers = 2;
    bool layerwise = true;          // per-layer encoder taps vs final-only
    std::string combine = "sum";    // "sum" | "concat"
    int fusion_hidden = 64;
    int answers = 12;
    double dropout = 0.1;
};

class VqaTransceiver {
public:
    VqaTransceiver(const VqaConfig& cfg, uint64_t init_seed);

    // Image semantic encoder returns ALL token rows (CLS + patches).
    nn::Var image_semantic_encode(const Image& img) const;
    // Text semantic encoder with CLS; pads the question to max_question_len.
    struct EncodedText {
        nn::Var z;
        std::vector<bool> mask;
    };
    EncodedText text_semantic_encode(const std::vector<int>& question) const;

    nn::Var image_transmit_encode(const nn::Var& z) const;
    nn::Var text_transmit_encode(const nn::Var& z) const;
    nn::Var image_receive_decode(const nn::Var& row) const;
    nn::Var text_receive_decode(const nn::Var& row) const;

    // Dropout -> dense -> ELU -> dropout -> dense -> ELU per image token row,
    // mapping the image JSC output width onto the fusion width.
    nn::Var dimension_increase(const nn::Var& z_image, bool training = false,
                               Rng* rng = nullptr) const;

    struct FusionTrace {
        std::vector<nn::Var> encoder_outputs;        // per layer, text stream
        std::vector<nn::Var> decoder_outputs;        // per layer, image stream
        std::vector<nn::AttentionMap> guided_attn;   // per decoder layer
        nn::Var text_cls;
        nn::Var image_cls;
    };
    // Runs the fusion stack: encoder over recovered text tokens, decoder over
    // recovered image tokens, with each decoder layer keyed by the matching
    // encoder layer (layerwise) or by the final encoder output (classic).
    FusionTrace fuse(const nn::Var& text_tokens, const std::vector<bool>& text_mask,
                     const nn::Var& image_tokens) const;

    // Decoder-only run against externally supplied encoder layer outputs;
    // used by fuse, the wiring tests and the classic ablation.
    struct DecoderRun {
        std::vector<nn::Var> outputs;             // per layer
        std::vector<nn::AttentionMap> guided_attn;
    };
    DecoderRun run_fusion_decoder(const nn::Var& image_tokens,
                                  const std::vector<nn::Var>& encoder_layer_outputs,
                                  const std::vector<bool>& text_mask) const;

    // Projected-CLS combination and the answer head; rows sum to one.
    nn::Var information_fusion(const nn::Var& text_cls, const nn::Var& image_cls,
                               bool training = false, Rng* rng = nullptr) const;
    // Pre-softmax answer logits (for the cross-entropy loss).
    nn::Var answer_logits(const nn::Var& text_cls, const nn::Var& image_cls,
                          bool training = false, Rng* rng = nullptr) const;

    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }
    const VqaConfig& config() const { return cfg_; }
    const JscCodec& image_jsc() const { return image_jsc_; }
    const JscCodec& text_jsc() const { return text_jsc_; }
    int image_tokens() const { return image_embed_.token_count(); }
    int text_tokens() const { return cfg_.max_question_len + 1; }
    int image_symbols() const { return image_tokens() * cfg_.image_l_c; }
    int text_symbols() const { return text_tokens() * cfg_.text_l_c; }

private:
    VqaConfig cfg_;
    nn::ParameterSet params_;
    nn::PatchEmbedding image_embed_;
    std::vector<nn::TransformerEncoderLayer> image_encoder_;
    nn::TextEmbedding text_embed_;
    std::vector<nn::TransformerEncoderLayer> text_encoder_;
    JscCodec image_jsc_, text_jsc_;
    nn::LinearLayer dim_fc1_, dim_fc2_;
    std::vector<nn::TransformerEncoderLayer> fusion_encoder_;
    std::vector<nn::TransformerDecoderLayer> fusion_decoder_;
    nn::LinearLayer text_cls_proj_, image_cls_proj_;
    nn::LinearLayer ans_fc1_, ans_fc2_;
};

}  // namespace semcom::model
