#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "semcom/mat.hpp"

namespace semcom::nn {

// Reverse-mode autodiff over Mat. Ops evaluate eagerly and record a backward
// closure; backward(root) runs the tape in reverse topological order. Edges
// only point toward parents, so graphs free themselves when the root dies.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Mat val;
    Mat grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    int rows() const { return val.rows; }
    int cols() const { return val.cols; }
    void accumulate(const Mat& g);
};

Var constant(Mat v);
Var make_param(Mat v);
Var detach(const Var& v);  // value copy with no history

// Runs backprop from a 1x1 scalar root. Gradients accumulate; callers zero
// parameter grads between steps.
void backward(const Var& root);

// ---- elementwise / linear ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var add_row_broadcast(const Var& a, const Var& row);  // row is 1 x cols
Var transpose(const Var& a);

Var relu(const Var& a);
Var elu(const Var& a);
Var gelu(const Var& a);
Var softmax_rows(const Var& a);

// ---- shape ----
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int n);
Var slice_cols(const Var& a, int c0, int n);
Var reshape(const Var& a, int rows, int cols);
Var pad_cols(const Var& a, int total_cols);

// ---- normalization / regularization ----
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& x);
Var dropout(const Var& x, double rate, Rng& rng, bool training);

// Gathers rows of table by id. Throws on out-of-range ids.
Var embedding_rows(const Var& table, const std::vector<int>& ids);

// ---- fused attention ----
// q: Tq x d, k/v: Tk x d, d divisible by heads. key_mask marks valid kv rows
// (empty = all valid); causal additionally hides keys j > i and requires
// Tq == Tk. Masked logits are -inf so masked keys get exactly zero weight.
// attn holds one Tq x Tk probability matrix per head.
struct AttentionResult {
    Var out;
    std::vector<Mat> attn;
};
AttentionResult multi_head_attention(const Var& q, const Var& k, const Var& v, int heads,
                                     const std::vector<bool>& key_mask, bool causal);

// ---- losses (scalar outputs) ----
// Mean over valid rows of the squared l2 row difference.
Var mse_loss_rows(const Var& a, const Var& b, const std::vector<bool>& row_mask = {});
// Mean negative log-likelihood over unmasked positions; logits T x V.
Var cross_entropy_loss(const Var& logits, const std::vector<int>& targets,
                       const std::vector<bool>& mask = {});
// Pairwise embedding loss over ordered pairs i != j: mean over same-label
// pairs of (1 - z_i.z_j) plus mean over different-label pairs of
// max(z_i.z_j - margin, 0). Throws when the batch has no positive pair.
Var pairwise_embedding_loss(const Var& z, const std::vector<int>& labels, double margin);

// ---- parameter utilities ----
double grad_norm(const std::vector<Var>& params);
void zero_grads(const std::vector<Var>& params);

}  // namespace semcom::nn
