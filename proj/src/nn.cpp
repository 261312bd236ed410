#include "semcom/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom::nn {

Var ParameterSet::add(const std::string& name, Mat init) {
    if (index_.count(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    Var v = make_param(std::move(init));
    index_[name] = entries_.size();
    entries_.emplace_back(name, v);
    return v;
}

Var ParameterSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParameterSet: missing " + name);
    return entries_[it->second].second;
}

bool ParameterSet::has(const std::string& name) const { return index_.count(name) > 0; }

std::vector<Var> ParameterSet::vars() const {
    std::vector<Var> out;
    out.reserve(entries_.size());
    for (const auto& [name, v] : entries_) out.push_back(v);
    return out;
}

std::vector<Var> ParameterSet::vars_with_prefix(const std::string& prefix) const {
    std::vector<Var> out;
    for (const auto& [name, v] : entries_)
        if (name.rfind(prefix, 0) == 0) out.push_back(v);
    return out;
}

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p->val.rows, p->val.cols);
        v_.emplace_back(p->val.rows, p->val.cols);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Node& p = *params_[i];
        if (p.grad.size() == 0) continue;
        for (size_t j = 0; j < p.val.data.size(); ++j) {
            const double g = p.grad.data[j];
            m_[i].data[j] = cfg_.beta1 * m_[i].data[j] + (1.0 - cfg_.beta1) * g;
            v_[i].data[j] = cfg_.beta2 * v_[i].data[j] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m_[i].data[j] / bc1;
            const double vhat = v_[i].data[j] / bc2;
            p.val.data[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                        cfg_.weight_decay * p.val.data[j]);
        }
    }
}

void Adam::zero_grad() { zero_grads(params_); }

Mat init_fan_in_uniform(int rows, int cols, Rng& rng) {
    // rows = fan-in for our x*W convention (x: T x in, W: in x out).
    Mat m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    rng.fill_uniform(m, -bound, bound);
    return m;
}

LinearLayer::LinearLayer(ParameterSet& ps, const std::string& prefix, int in, int out, Rng& rng)
    : in_(in), out_(out) {
    w_ = ps.add(prefix + ".w", init_fan_in_uniform(in, out, rng));
    b_ = ps.add(prefix + ".b", Mat(1, out));
}

Var LinearLayer::apply(const Var& x) const { return add_row_broadcast(matmul(x, w_), b_); }

LayerNormBlock::LayerNormBlock(ParameterSet& ps, const std::string& prefix, int width) {
    gamma_ = ps.add(prefix + ".gamma", Mat::full(1, width, 1.0));
    beta_ = ps.add(prefix + ".beta", Mat(1, width));
}

Var LayerNormBlock::apply(const Var& x) const { return layer_norm_rows(x, gamma_, beta_); }

MultiHeadAttentionBlock::MultiHeadAttentionBlock(ParameterSet& ps, const std::string& prefix,
                                                 int width, int heads, Rng& rng)
    : heads_(heads) {
    if (width % heads != 0)
        throw std::invalid_argument("attention block: width not divisible by heads");
    wq_ = LinearLayer(ps, prefix + ".wq", width, width, rng);
    wk_ = LinearLayer(ps, prefix + ".wk", width, width, rng);
    wv_ = LinearLayer(ps, prefix + ".wv", width, width, rng);
    wo_ = LinearLayer(ps, prefix + ".wo", width, width, rng);
}

MultiHeadAttentionBlock::Result MultiHeadAttentionBlock::self_attend(
    const Var& x, const std::vector<bool>& mask, bool causal) const {
    auto res = multi_head_attention(wq_.apply(x), wk_.apply(x), wv_.apply(x), heads_, mask, causal);
    return {wo_.apply(res.out), AttentionMap{std::move(res.attn)}};
}

MultiHeadAttentionBlock::Result MultiHeadAttentionBlock::guided(
    const Var& q, const Var& kv, const std::vector<bool>& kv_mask) const {
    auto res =
        multi_head_attention(wq_.apply(q), wk_.apply(kv), wv_.apply(kv), heads_, kv_mask, false);
    return {wo_.apply(res.out), AttentionMap{std::move(res.attn)}};
}

FeedForwardBlock::FeedForwardBlock(ParameterSet& ps, const std::string& prefix, int width,
                                   int hidden, Rng& rng) {
    fc1_ = LinearLayer(ps, prefix + ".fc1", width, hidden, rng);
    fc2_ = LinearLayer(ps, prefix + ".fc2", hidden, width, rng);
}

Var FeedForwardBlock::apply(const Var& x) const { return fc2_.apply(gelu(fc1_.apply(x))); }

TransformerEncoderLayer::TransformerEncoderLayer(ParameterSet& ps, const std::string& prefix,
                                                 int width, int heads, int ffn_hidden, Rng& rng) {
    ln1_ = LayerNormBlock(ps, prefix + ".ln1", width);
    attn_ = MultiHeadAttentionBlock(ps, prefix + ".attn", width, heads, rng);
    ln2_ = LayerNormBlock(ps, prefix + ".ln2", width);
    ff_ = FeedForwardBlock(ps, prefix + ".ff", width, ffn_hidden, rng);
}

TransformerEncoderLayer::Result TransformerEncoderLayer::apply(
    const Var& x, const std::vector<bool>& mask) const {
    auto attn = attn_.self_attend(ln1_.apply(x), mask, false);
    Var h = add(x, attn.out);
    Var out = add(h, ff_.apply(ln2_.apply(h)));
    return {out, std::move(attn.attn)};
}

TransformerDecoderLayer::TransformerDecoderLayer(ParameterSet& ps, const std::string& prefix,
                                                 int width, int heads, int ffn_hidden, Rng& rng) {
    ln1_ = LayerNormBlock(ps, prefix + ".ln1", width);
    self_attn_ = MultiHeadAttentionBlock(ps, prefix + ".self", width, heads, rng);
    ln2_ = LayerNormBlock(ps, prefix + ".ln2", width);
    guided_attn_ = MultiHeadAttentionBlock(ps, prefix + ".guided", width, heads, rng);
    ln3_ = LayerNormBlock(ps, prefix + ".ln3", width);
    ff_ = FeedForwardBlock(ps, prefix + ".ff", width, ffn_hidden, rng);
}

TransformerDecoderLayer::Result TransformerDecoderLayer::apply(
    const Var& x, const std::vector<bool>& x_mask, bool causal_self, const Var& enc_out,
    const std::vector<bool>& enc_mask) const {
    auto self_res = self_attn_.self_attend(ln1_.apply(x), x_mask, causal_self);
    Var h1 = add(x, self_res.out);
    auto guided_res = guided_attn_.guided(ln2_.apply(h1), enc_out, enc_mask);
    Var h2 = add(h1, guided_res.out);
    Var out = add(h2, ff_.apply(ln3_.apply(h2)));
    return {out, std::move(self_res.attn), std::move(guided_res.attn)};
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "elu") return Activation::Elu;
    if (s == "gelu") return Activation::Gelu;
    throw std::invalid_argument("unknown activation: " + s);
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Elu: return "elu";
        case Activation::Gelu: return "gelu";
    }
    return "?";
}

DenseStack::DenseStack(ParameterSet& ps, const std::string& prefix, int in_width,
                       const std::vector<DenseLayerSpec>& layers, Rng& rng)
    : specs_(layers), in_width_(in_width) {
    int w = in_width;
    for (size_t i = 0; i < layers.size(); ++i) {
        layers_.emplace_back(ps, prefix + ".fc" + std::to_string(i), w, layers[i].width, rng);
        w = layers[i].width;
    }
}

int DenseStack::out_width() const { return specs_.empty() ? in_width_ : specs_.back().width; }

Var DenseStack::apply(const Var& x, bool training, Rng* rng) const {
    Var h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].apply(h);
        switch (specs_[i].act) {
            case Activation::Linear: break;
            case Activation::Relu: h = relu(h); break;
            case Activation::Elu: h = elu(h); break;
            case Activation::Gelu: h = gelu(h); break;
        }
        if (specs_[i].dropout > 0.0 && training) {
            if (!rng) throw std::invalid_argument("DenseStack: training dropout needs an Rng");
            h = dropout(h, specs_[i].dropout, *rng, true);
        }
    }
    return h;
}

TextEmbedding::TextEmbedding(ParameterSet& ps, const std::string& prefix, int vocab, int width,
                             int max_len, bool with_cls, Rng& rng)
    : with_cls_(with_cls), width_(width) {
    Mat table(vocab, width);
    rng.fill_normal(table, 0.0, 0.02);
    table_ = ps.add(prefix + ".table", std::move(table));
    const int slots = max_len + (with_cls ? 1 : 0);
    Mat pos(slots, width);
    rng.fill_normal(pos, 0.0, 0.02);
    posenc_ = ps.add(prefix + ".posenc", std::move(pos));
    if (with_cls) {
        Mat cls(1, width);
        rng.fill_normal(cls, 0.0, 0.02);
        cls_ = ps.add(prefix + ".cls", std::move(cls));
    }
}

TokenSequence TextEmbedding::apply(const std::vector<int>& ids,
                                   const std::vector<bool>& valid) const {
    if (!valid.empty() && valid.size() != ids.size())
        throw std::invalid_argument("TextEmbedding: mask length mismatch");
    TokenSequence seq;
    seq.has_cls = with_cls_;
    Var tok;
    if (ids.empty()) {
        if (!with_cls_) throw std::invalid_argument("TextEmbedding: empty input without CLS");
        tok = cls_;
    } else {
        tok = embedding_rows(table_, ids);
        if (with_cls_) tok = concat_rows({cls_, tok});
    }
    const int t = tok->rows();
    seq.tokens = add(tok, slice_rows(posenc_, 0, t));
    seq.mask.assign(t, true);
    if (!valid.empty()) {
        const int off = with_cls_ ? 1 : 0;
        for (size_t i = 0; i < valid.size(); ++i) seq.mask[i + off] = valid[i];
    }
    return seq;
}

PatchEmbedding::PatchEmbedding(ParameterSet& ps, const std::string& prefix, int image_h,
                               int image_w, int channels, int patch, int width, Rng& rng)
    : image_h_(image_h), image_w_(image_w), channels_(channels), patch_(patch), width_(width) {
    if (patch < 1 || image_h % patch != 0 || image_w % patch != 0)
        throw std::invalid_argument("PatchEmbedding: image dims not divisible by patch size");
    n_patches_ = (image_h / patch) * (image_w / patch);
    const int in = patch * patch * channels;
    proj_w_ = ps.add(prefix + ".proj_w", init_fan_in_uniform(in, width, rng));
    proj_b_ = ps.add(prefix + ".proj_b", Mat(1, width));
    Mat pos(n_patches_ + 1, width);
    rng.fill_normal(pos, 0.0, 0.02);
    posenc_ = ps.add(prefix + ".posenc", std::move(pos));
    Mat cls(1, width);
    rng.fill_normal(cls, 0.0, 0.02);
    cls_ = ps.add(prefix + ".cls", std::move(cls));
}

Mat PatchEmbedding::extract_patches(const Image& img) const {
    if (img.h != image_h_ || img.w != image_w_ || img.c != channels_)
        throw std::invalid_argument("PatchEmbedding: image dims mismatch");
    const int py = image_h_ / patch_, px = image_w_ / patch_;
    Mat patches(n_patches_, patch_ * patch_ * channels_);
    int row = 0;
    for (int gy = 0; gy < py; ++gy)
        for (int gx = 0; gx < px; ++gx) {
            int col = 0;
            for (int y = 0; y < patch_; ++y)
                for (int x = 0; x < patch_; ++x)
                    for (int ch = 0; ch < channels_; ++ch)
                        patches.at(row, col++) = img.at(gy * patch_ + y, gx * patch_ + x, ch);
            ++row;
        }
    return patches;
}

TokenSequence PatchEmbedding::apply(const Image& img) const {
    Var patches = constant(extract_patches(img));
    Var projected = add_row_broadcast(matmul(patches, proj_w_), proj_b_);
    Var tok = concat_rows({cls_, projected});
    TokenSequence seq;
    seq.has_cls = true;
    seq.tokens = add(tok, posenc_);
    seq.mask.assign(n_patches_ + 1, true);
    return seq;
}

}  // namespace semcom::nn
