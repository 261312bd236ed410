#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "semcom/autograd.hpp"

using namespace semcom;
using namespace semcom::nn;
using semcom::testing::max_grad_error;

namespace {

Var random_param(int r, int c, uint64_t seed) {
    Rng rng(seed);
    Mat m(r, c);
    rng.fill_normal(m, 0.0, 1.0);
    return make_param(std::move(m));
}

Mat random_mat(int r, int c, uint64_t seed) {
    Rng rng(seed);
    Mat m(r, c);
    rng.fill_normal(m, 0.0, 1.0);
    return m;
}

// Reduces any node to a scalar via a fixed random weighting so gradient
// structure is exercised beyond plain sums.
Var weighted_sum(const Var& x, uint64_t seed = 99) {
    Var w = constant(random_mat(x->cols(), x->rows(), seed));
    Var prod = matmul(x, w);  // r x r
    Var diag_mask = constant(Mat::identity(prod->rows()));
    Var masked = hadamard(prod, diag_mask);
    Var ones_left = constant(Mat::full(1, masked->rows(), 1.0));
    Var ones_right = constant(Mat::full(masked->cols(), 1, 1.0));
    return matmul(matmul(ones_left, masked), ones_right);
}

}  // namespace

TEST_CASE("elementwise and linear op gradients match finite differences") {
    auto a = random_param(3, 4, 1);
    auto b = random_param(3, 4, 2);
    CHECK(max_grad_error({a, b}, [&] { return weighted_sum(add(a, b)); }) < 1e-4);
    CHECK(max_grad_error({a, b}, [&] { return weighted_sum(sub(a, b)); }) < 1e-4);
    CHECK(max_grad_error({a, b}, [&] { return weighted_sum(hadamard(a, b)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(scale(a, -2.5)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(add_scalar(a, 0.7)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(transpose(a)); }) < 1e-4);

    auto w = random_param(4, 5, 3);
    CHECK(max_grad_error({a, w}, [&] { return weighted_sum(matmul(a, w)); }) < 1e-4);

    auto row = random_param(1, 4, 4);
    CHECK(max_grad_error({a, row}, [&] { return weighted_sum(add_row_broadcast(a, row)); }) <
          1e-4);
}

TEST_CASE("activation gradients match finite differences") {
    auto a = random_param(4, 3, 5);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(relu(a)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(elu(a)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(gelu(a)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(softmax_rows(a)); }) < 1e-4);
}

TEST_CASE("shape op gradients match finite differences") {
    auto a = random_param(3, 4, 6);
    auto b = random_param(2, 4, 7);
    CHECK(max_grad_error({a, b}, [&] { return weighted_sum(concat_rows({a, b})); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(slice_rows(a, 1, 2)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(reshape(a, 4, 3)); }) < 1e-4);
    CHECK(max_grad_error({a}, [&] { return weighted_sum(pad_cols(a, 6)); }) < 1e-4);
}

TEST_CASE("normalization gradients match finite differences") {
    auto x = random_param(3, 6, 8);
    auto gamma = random_param(1, 6, 9);
    auto beta = random_param(1, 6, 10);
    CHECK(max_grad_error({x, gamma, beta},
                         [&] { return weighted_sum(layer_norm_rows(x, gamma, beta)); }) < 1e-4);
    CHECK(max_grad_error({x}, [&] { return weighted_sum(l2_normalize_rows(x)); }) < 1e-4);
}

TEST_CASE("dropout gradient with a fixed mask matches finite differences") {
    auto x = random_param(4, 4, 11);
    auto loss = [&] {
        Rng rng(123);  // same mask on every evaluation
        return weighted_sum(dropout(x, 0.4, rng, true));
    };
    CHECK(max_grad_error({x}, loss) < 1e-4);
}

TEST_CASE("embedding gather gradient matches finite differences") {
    auto table = random_param(7, 3, 12);
    std::vector<int> ids{2, 5, 2, 0};
    CHECK(max_grad_error({table}, [&] { return weighted_sum(embedding_rows(table, ids)); }) <
          1e-4);
    CHECK_THROWS_AS(embedding_rows(table, {7}), std::out_of_range);
    CHECK_THROWS_AS(embedding_rows(table, {-1}), std::out_of_range);
}

TEST_CASE("fused attention gradients match finite differences") {
    for (uint64_t seed = 0; seed < 3; ++seed) {
        auto q = random_param(4, 6, 20 + seed);
        auto k = random_param(5, 6, 30 + seed);
        auto v = random_param(5, 6, 40 + seed);
        std::vector<bool> mask{true, true, false, true, true};
        auto loss = [&] {
            return weighted_sum(multi_head_attention(q, k, v, 2, mask, false).out);
        };
        CHECK(max_grad_error({q, k, v}, loss) < 1e-4);
    }
    // causal variant
    auto q = random_param(4, 6, 50);
    auto k = random_param(4, 6, 51);
    auto v = random_param(4, 6, 52);
    auto loss = [&] { return weighted_sum(multi_head_attention(q, k, v, 3, {}, true).out); };
    CHECK(max_grad_error({q, k, v}, loss) < 1e-4);
}

TEST_CASE("loss gradients match finite differences") {
    auto a = random_param(4, 5, 60);
    auto b = random_param(4, 5, 61);
    CHECK(max_grad_error({a, b}, [&] { return mse_loss_rows(a, b); }) < 1e-4);
    std::vector<bool> mask{true, false, true, true};
    CHECK(max_grad_error({a, b}, [&] { return mse_loss_rows(a, b, mask); }) < 1e-4);

    auto logits = random_param(5, 7, 62);
    std::vector<int> targets{1, 0, 6, 3, 2};
    std::vector<bool> tmask{true, true, false, true, true};
    CHECK(max_grad_error({logits}, [&] { return cross_entropy_loss(logits, targets); }) < 1e-4);
    CHECK(max_grad_error({logits}, [&] { return cross_entropy_loss(logits, targets, tmask); }) <
          1e-4);

    auto z = random_param(6, 4, 63);
    std::vector<int> labels{0, 0, 1, 1, 2, 0};
    auto ir_loss = [&] { return pairwise_embedding_loss(l2_normalize_rows(z), labels, 0.5); };
    CHECK(max_grad_error({z}, ir_loss) < 1e-4);
}

TEST_CASE("backward accumulates across shared subexpressions") {
    auto x = random_param(2, 2, 70);
    Var y = add(matmul(x, x), x);  // x appears three times
    CHECK(max_grad_error({x}, [&] { return weighted_sum(add(matmul(x, x), x)); }) < 1e-4);
    (void)y;
}

TEST_CASE("detach blocks gradient flow") {
    auto x = random_param(2, 3, 71);
    Var loss = mse_loss_rows(detach(x), constant(random_mat(2, 3, 72)));
    CHECK_FALSE(loss->requires_grad);
    zero_grads({x});
    Var loss2 = mse_loss_rows(add(x, detach(x)), constant(random_mat(2, 3, 73)));
    backward(loss2);
    CHECK(x->grad.size() > 0);
}

TEST_CASE("backward rejects non-scalar roots") {
    auto x = random_param(2, 2, 74);
    CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
}
