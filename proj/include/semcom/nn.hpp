#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semcom/autograd.hpp"
#include "semcom/image.hpp"

namespace semcom::nn {

// Named parameter store. Names are unique, shapes immutable after insertion;
// checkpoints persist sets by name.
class ParameterSet {
public:
    Var add(const std::string& name, Mat init);
    Var get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
    std::vector<Var> vars() const;
    // Vars whose names start with the given prefix; used for phase freezing.
    std::vector<Var> vars_with_prefix(const std::string& prefix) const;

private:
    std::vector<std::pair<std::string, Var>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

class Adam {
public:
    Adam(std::vector<Var> params, AdamConfig cfg);
    void step();
    void zero_grad();
    const std::vector<Var>& params() const { return params_; }

private:
    std::vector<Var> params_;
    std::vector<Mat> m_, v_;
    AdamConfig cfg_;
    long step_count_ = 0;
};

// Token sequence of shape T x d. mask[t] marks valid positions; when has_cls
// the first row is the CLS token and is always valid.
struct TokenSequence {
    Var tokens;
    std::vector<bool> mask;
    bool has_cls = false;

    int length() const { return tokens->rows(); }
    int width() const { return tokens->cols(); }
};

// One Tq x Tk probability matrix per head; rows sum to one.
struct AttentionMap {
    std::vector<Mat> head_weights;
};

Mat init_fan_in_uniform(int rows, int cols, Rng& rng);

class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(ParameterSet& ps, const std::string& prefix, int in, int out, Rng& rng);
    Var apply(const Var& x) const;  // x: T x in -> T x out
    int in_width() const { return in_; }
    int out_width() const { return out_; }

private:
    Var w_, b_;
    int in_ = 0, out_ = 0;
};

class LayerNormBlock {
public:
    LayerNormBlock() = default;
    LayerNormBlock(ParameterSet& ps, const std::string& prefix, int width);
    Var apply(const Var& x) const;

private:
    Var gamma_, beta_;
};

class MultiHeadAttentionBlock {
public:
    MultiHeadAttentionBlock() = default;
    MultiHeadAttentionBlock(ParameterSet& ps, const std::string& prefix, int width, int heads,
                            Rng& rng);

    struct Result {
        Var out;
        AttentionMap attn;
    };
    // Self attention: queries, keys and values all from x.
    Result self_attend(const Var& x, const std::vector<bool>& mask, bool causal) const;
    // Guided attention: queries from q, keys/values from kv.
    Result guided(const Var& q, const Var& kv, const std::vector<bool>& kv_mask) const;

private:
    LinearLayer wq_, wk_, wv_, wo_;
    int heads_ = 0;
};

class FeedForwardBlock {
public:
    FeedForwardBlock() = default;
    FeedForwardBlock(ParameterSet& ps, const std::string& prefix, int width, int hidden, Rng& rng);
    Var apply(const Var& x) const;

private:
    LinearLayer fc1_, fc2_;
};

// Pre-norm residual encoder layer: x + MHSA(LN(x)), then + FFN(LN(.)).
class TransformerEncoderLayer {
public:
    TransformerEncoderLayer() = default;
    TransformerEncoderLayer(ParameterSet& ps, const std::string& prefix, int width, int heads,
                            int ffn_hidden, Rng& rng);

    struct Result {
        Var out;
        AttentionMap attn;
    };
    Result apply(const Var& x, const std::vector<bool>& mask) const;

private:
    LayerNormBlock ln1_, ln2_;
    MultiHeadAttentionBlock attn_;
    FeedForwardBlock ff_;
};

// Pre-norm residual decoder layer: self attention, guided attention over the
// encoder stream, feed-forward.
class TransformerDecoderLayer {
public:
    TransformerDecoderLayer() = default;
    TransformerDecoderLayer(ParameterSet& ps, const std::string& prefix, int width, int heads,
                            int ffn_hidden, Rng& rng);

    struct Result {
        Var out;
        AttentionMap self_attn;
        AttentionMap guided_attn;
    };
    Result apply(const Var& x, const std::vector<bool>& x_mask, bool causal_self,
                 const Var& enc_out, const std::vector<bool>& enc_mask) const;

private:
    LayerNormBlock ln1_, ln2_, ln3_;
    MultiHeadAttentionBlock self_attn_, guided_attn_;
    FeedForwardBlock ff_;
};

enum class Activation { Linear, Relu, Elu, Gelu };

Activation activation_from_string(const std::string& s);
const char* to_string(Activation a);

struct DenseLayerSpec {
    int width = 0;
    Activation act = Activation::Linear;
    double dropout = 0.0;
};

// Sequential affine stack; dropout applies in training mode only.
class DenseStack {
public:
    DenseStack() = default;
    DenseStack(ParameterSet& ps, const std::string& prefix, int in_width,
               const std::vector<DenseLayerSpec>& layers, Rng& rng);
    Var apply(const Var& x, bool training = false, Rng* rng = nullptr) const;
    int in_width() const { return in_width_; }
    int out_width() const;
    const std::vector<DenseLayerSpec>& specs() const { return specs_; }

private:
    std::vector<LinearLayer> layers_;
    std::vector<DenseLayerSpec> specs_;
    int in_width_ = 0;
};

// Learnable word vectors plus learnable 1-D positional encoding; optionally
// prepends a learnable CLS token at position 0.
class TextEmbedding {
public:
    TextEmbedding() = default;
    TextEmbedding(ParameterSet& ps, const std::string& prefix, int vocab, int width, int max_len,
                  bool with_cls, Rng& rng);
    TokenSequence apply(const std::vector<int>& ids, const std::vector<bool>& valid) const;
    int width() const { return width_; }

private:
    Var table_, posenc_, cls_;
    bool with_cls_ = false;
    int width_ = 0;
};

// Fixed-size patch decomposition, linear projection, CLS token and learnable
// positional encoding.
class PatchEmbedding {
public:
    PatchEmbedding() = default;
    PatchEmbedding(ParameterSet& ps, const std::string& prefix, int image_h, int image_w,
                   int channels, int patch, int width, Rng& rng);
    TokenSequence apply(const Image& img) const;
    int token_count() const { return n_patches_ + 1; }
    int width() const { return width_; }

    // Patch rows (n_patches x patch*patch*c) in raster order; exposed for
    // dataset preprocessing.
    Mat extract_patches(const Image& img) const;

private:
    int image_h_ = 0, image_w_ = 0, channels_ = 0, patch_ = 0, width_ = 0, n_patches_ = 0;
    Var proj_w_, proj_b_, posenc_, cls_;
};

}  // namespace semcom::nn
