#include "semcom/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace semcom::nn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool any_requires_grad(const std::vector<Var>& vars) {
    for (const auto& v : vars)
        if (v->requires_grad) return true;
    return false;
}

Var make_node(Mat val, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->requires_grad = any_requires_grad(parents);
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}
}  // namespace

void Node::accumulate(const Mat& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) grad = Mat(val.rows, val.cols);
    grad += g;
}

Var constant(Mat v) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    return n;
}

Var make_param(Mat v) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = true;
    return n;
}

Var detach(const Var& v) { return constant(v->val); }

void backward(const Var& root) {
    if (root->val.rows != 1 || root->val.cols != 1)
        throw std::invalid_argument("backward: root must be a scalar");
    if (!root->requires_grad) return;

    // Iterative post-order DFS over grad-requiring ancestors.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad = Mat::full(1, 1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
    }
}

Var add(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument("add: shape mismatch");
    return make_node(a->val + b->val, {a, b}, [a, b](Node& n) {
        a->accumulate(n.grad);
        b->accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument("sub: shape mismatch");
    return make_node(a->val - b->val, {a, b}, [a, b](Node& n) {
        a->accumulate(n.grad);
        Mat g = n.grad;
        g *= -1.0;
        b->accumulate(g);
    });
}

Var scale(const Var& a, double s) {
    return make_node(a->val * s, {a}, [a, s](Node& n) {
        Mat g = n.grad;
        g *= s;
        a->accumulate(g);
    });
}

Var add_scalar(const Var& a, double s) {
    Mat v = a->val;
    for (double& x : v.data) x += s;
    return make_node(std::move(v), {a}, [a](Node& n) { a->accumulate(n.grad); });
}

Var hadamard(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument("hadamard: shape mismatch");
    Mat v = a->val;
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] *= b->val.data[i];
    return make_node(std::move(v), {a, b}, [a, b](Node& n) {
        Mat ga = n.grad, gb = n.grad;
        for (size_t i = 0; i < ga.data.size(); ++i) {
            ga.data[i] *= b->val.data[i];
            gb.data[i] *= a->val.data[i];
        }
        a->accumulate(ga);
        b->accumulate(gb);
    });
}

Var matmul(const Var& a, const Var& b) {
    return make_node(semcom::matmul(a->val, b->val), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(matmul_a_bT(n.grad, b->val));
        if (b->requires_grad) b->accumulate(matmul_aT_b(a->val, n.grad));
    });
}

Var add_row_broadcast(const Var& a, const Var& row) {
    if (row->val.rows != 1 || row->val.cols != a->val.cols)
        throw std::invalid_argument("add_row_broadcast: row shape mismatch");
    Mat v = a->val;
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) v.at(i, j) += row->val.at(0, j);
    return make_node(std::move(v), {a, row}, [a, row](Node& n) {
        a->accumulate(n.grad);
        if (row->requires_grad) {
            Mat g(1, n.grad.cols);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < n.grad.cols; ++j) g.at(0, j) += n.grad.at(i, j);
            row->accumulate(g);
        }
    });
}

Var transpose(const Var& a) {
    return make_node(semcom::transpose(a->val), {a},
                     [a](Node& n) { a->accumulate(semcom::transpose(n.grad)); });
}

Var relu(const Var& a) {
    Mat v = a->val;
    for (double& x : v.data) x = x > 0.0 ? x : 0.0;
    return make_node(std::move(v), {a}, [a](Node& n) {
        Mat g = n.grad;
        for (size_t i = 0; i < g.data.size(); ++i)
            if (a->val.data[i] <= 0.0) g.data[i] = 0.0;
        a->accumulate(g);
    });
}

Var elu(const Var& a) {
    Mat v = a->val;
    for (double& x : v.data) x = x > 0.0 ? x : std::expm1(x);
    return make_node(std::move(v), {a}, [a](Node& n) {
        Mat g = n.grad;
        for (size_t i = 0; i < g.data.size(); ++i) {
            const double x = a->val.data[i];
            if (x <= 0.0) g.data[i] *= std::exp(x);
        }
        a->accumulate(g);
    });
}

Var gelu(const Var& a) {
    // Exact erf form; derivative Phi(x) + x*phi(x).
    Mat v = a->val;
    for (double& x : v.data) x = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    return make_node(std::move(v), {a}, [a](Node& n) {
        Mat g = n.grad;
        for (size_t i = 0; i < g.data.size(); ++i) {
            const double x = a->val.data[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
            g.data[i] *= cdf + x * pdf;
        }
        a->accumulate(g);
    });
}

namespace {
void softmax_row_inplace(double* row, int n) {
    double mx = kNegInf;
    for (int j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= sum;
}
}  // namespace

Var softmax_rows(const Var& a) {
    Mat v = a->val;
    for (int i = 0; i < v.rows; ++i) softmax_row_inplace(v.row_ptr(i), v.cols);
    Mat saved = v;
    return make_node(std::move(v), {a}, [a, saved](Node& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j) dot += n.grad.at(i, j) * saved.at(i, j);
            for (int j = 0; j < g.cols; ++j)
                g.at(i, j) = saved.at(i, j) * (n.grad.at(i, j) - dot);
        }
        a->accumulate(g);
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int cols = parts[0]->val.cols;
    int rows = 0;
    for (const auto& p : parts) {
        if (p->val.cols != cols) throw std::invalid_argument("concat_rows: col mismatch");
        rows += p->val.rows;
    }
    Mat v(rows, cols);
    int r = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p->val.rows; ++i)
            for (int j = 0; j < cols; ++j) v.at(r + i, j) = p->val.at(i, j);
        r += p->val.rows;
    }
    return make_node(std::move(v), parts, [parts](Node& n) {
        int r = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                Mat g(p->val.rows, p->val.cols);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) g.at(i, j) = n.grad.at(r + i, j);
                p->accumulate(g);
            }
            r += p->val.rows;
        }
    });
}

Var slice_rows(const Var& a, int r0, int nrows) {
    if (r0 < 0 || nrows < 1 || r0 + nrows > a->val.rows)
        throw std::invalid_argument("slice_rows: out of range");
    Mat v(nrows, a->val.cols);
    for (int i = 0; i < nrows; ++i)
        for (int j = 0; j < v.cols; ++j) v.at(i, j) = a->val.at(r0 + i, j);
    return make_node(std::move(v), {a}, [a, r0](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < n.grad.rows; ++i)
            for (int j = 0; j < n.grad.cols; ++j) g.at(r0 + i, j) = n.grad.at(i, j);
        a->accumulate(g);
    });
}

Var slice_cols(const Var& a, int c0, int ncols) {
    if (c0 < 0 || ncols < 1 || c0 + ncols > a->val.cols)
        throw std::invalid_argument("slice_cols: out of range");
    Mat v(a->val.rows, ncols);
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < ncols; ++j) v.at(i, j) = a->val.at(i, c0 + j);
    return make_node(std::move(v), {a}, [a, c0](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < n.grad.rows; ++i)
            for (int j = 0; j < n.grad.cols; ++j) g.at(i, c0 + j) = n.grad.at(i, j);
        a->accumulate(g);
    });
}

Var reshape(const Var& a, int rows, int cols) {
    if (static_cast<size_t>(rows) * cols != a->val.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Mat v(rows, cols);
    v.data = a->val.data;
    return make_node(std::move(v), {a}, [a, rows, cols](Node& n) {
        (void)rows;
        (void)cols;
        Mat g(a->val.rows, a->val.cols);
        g.data = n.grad.data;
        a->accumulate(g);
    });
}

Var pad_cols(const Var& a, int total_cols) {
    if (total_cols < a->val.cols) throw std::invalid_argument("pad_cols: shrinking");
    Mat v(a->val.rows, total_cols);
    for (int i = 0; i < a->val.rows; ++i)
        for (int j = 0; j < a->val.cols; ++j) v.at(i, j) = a->val.at(i, j);
    return make_node(std::move(v), {a}, [a](Node& n) {
        Mat g(a->val.rows, a->val.cols);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) g.at(i, j) = n.grad.at(i, j);
        a->accumulate(g);
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const int d = x->val.cols;
    if (gamma->val.cols != d || beta->val.cols != d)
        throw std::invalid_argument("layer_norm_rows: gamma/beta width mismatch");
    Mat xhat(x->val.rows, d);
    std::vector<double> inv_std(x->val.rows);
    for (int i = 0; i < x->val.rows; ++i) {
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x->val.at(i, j);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x->val.at(i, j) - mu;
            var += c * c;
        }
        var /= d;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) xhat.at(i, j) = (x->val.at(i, j) - mu) * inv_std[i];
    }
    Mat v(x->val.rows, d);
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < d; ++j)
            v.at(i, j) = xhat.at(i, j) * gamma->val.at(0, j) + beta->val.at(0, j);

    return make_node(std::move(v), {x, gamma, beta},
                     [x, gamma, beta, xhat, inv_std, d](Node& n) {
        if (gamma->requires_grad) {
            Mat gg(1, d);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < d; ++j) gg.at(0, j) += n.grad.at(i, j) * xhat.at(i, j);
            gamma->accumulate(gg);
        }
        if (beta->requires_grad) {
            Mat gb(1, d);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < d; ++j) gb.at(0, j) += n.grad.at(i, j);
            beta->accumulate(gb);
        }
        if (x->requires_grad) {
            Mat gx(n.grad.rows, d);
            for (int i = 0; i < n.grad.rows; ++i) {
                // dxhat = g * gamma; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dxh = n.grad.at(i, j) * gamma->val.at(0, j);
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * xhat.at(i, j);
                }
                mean_dxh /= d;
                mean_dxh_xh /= d;
                for (int j = 0; j < d; ++j) {
                    const double dxh = n.grad.at(i, j) * gamma->val.at(0, j);
                    gx.at(i, j) = (dxh - mean_dxh - xhat.at(i, j) * mean_dxh_xh) * inv_std[i];
                }
            }
            x->accumulate(gx);
        }
    });
}

Var l2_normalize_rows(const Var& x) {
    Mat v = x->val;
    std::vector<double> inv_norm(v.rows);
    for (int i = 0; i < v.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < v.cols; ++j) s += v.at(i, j) * v.at(i, j);
        const double norm = std::sqrt(s);
        if (norm == 0.0) throw std::invalid_argument("l2_normalize_rows: zero row");
        inv_norm[i] = 1.0 / norm;
        for (int j = 0; j < v.cols; ++j) v.at(i, j) *= inv_norm[i];
    }
    Mat y = v;
    return make_node(std::move(v), {x}, [x, y, inv_norm](Node& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j) dot += n.grad.at(i, j) * y.at(i, j);
            for (int j = 0; j < g.cols; ++j)
                g.at(i, j) = (n.grad.at(i, j) - y.at(i, j) * dot) * inv_norm[i];
        }
        x->accumulate(g);
    });
}

Var dropout(const Var& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate out of [0,1)");
    if (!training || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    Mat mask(x->val.rows, x->val.cols);
    for (double& m : mask.data) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Mat v = x->val;
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] *= mask.data[i];
    return make_node(std::move(v), {x}, [x, mask](Node& n) {
        Mat g = n.grad;
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] *= mask.data[i];
        x->accumulate(g);
    });
}

Var embedding_rows(const Var& table, const std::vector<int>& ids) {
    const int vocab = table->val.rows;
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::out_of_range("embedding_rows: token id outside vocabulary");
    Mat v(static_cast<int>(ids.size()), table->val.cols);
    for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < v.cols; ++j) v.at(static_cast<int>(i), j) = table->val.at(ids[i], j);
    return make_node(std::move(v), {table}, [table, ids](Node& n) {
        Mat g(table->val.rows, table->val.cols);
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < g.cols; ++j) g.at(ids[i], j) += n.grad.at(static_cast<int>(i), j);
        table->accumulate(g);
    });
}

AttentionResult multi_head_attention(const Var& q, const Var& k, const Var& v, int heads,
                                     const std::vector<bool>& key_mask, bool causal) {
    const int d = q->val.cols;
    if (d != k->val.cols || d != v->val.cols)
        throw std::invalid_argument("attention: stream width mismatch");
    if (heads < 1 || d % heads != 0)
        throw std::invalid_argument("attention: width not divisible by head count");
    if (k->val.rows != v->val.rows)
        throw std::invalid_argument("attention: key/value length mismatch");
    if (!key_mask.empty() && static_cast<int>(key_mask.size()) != k->val.rows)
        throw std::invalid_argument("attention: key mask length mismatch");
    if (causal && q->val.rows != k->val.rows)
        throw std::invalid_argument("attention: causal mask needs equal lengths");

    const int tq = q->val.rows, tk = k->val.rows, dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Mat> probs(heads);
    Mat out(tq, d);
    for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        Mat p(tq, tk);
        for (int i = 0; i < tq; ++i) {
            const double* qi = q->val.row_ptr(i) + c0;
            double* pr = p.row_ptr(i);
            for (int j = 0; j < tk; ++j) {
                if ((!key_mask.empty() && !key_mask[j]) || (causal && j > i)) {
                    pr[j] = kNegInf;
                    continue;
                }
                const double* kj = k->val.row_ptr(j) + c0;
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += qi[t] * kj[t];
                pr[j] = s * inv_sqrt;
            }
            softmax_row_inplace(pr, tk);
        }
        for (int i = 0; i < tq; ++i) {
            double* oi = out.row_ptr(i) + c0;
            const double* pr = p.row_ptr(i);
            for (int j = 0; j < tk; ++j) {
                const double pij = pr[j];
                if (pij == 0.0) continue;
                const double* vj = v->val.row_ptr(j) + c0;
                for (int t = 0; t < dh; ++t) oi[t] += pij * vj[t];
            }
        }
        probs[h] = p;
    }

    AttentionResult res;
    res.attn = probs;
    res.out = make_node(std::move(out), {q, k, v},
                        [q, k, v, probs, heads, dh, inv_sqrt, tq, tk](Node& n) {
        Mat gq(tq, q->val.cols), gk(tk, k->val.cols), gv(tk, v->val.cols);
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            const Mat& p = probs[h];
            // dV = P^T G ; dP = G V^T ; dS = P .* (dP - rowsum(dP .* P))
            Mat ds(tq, tk);
            for (int i = 0; i < tq; ++i) {
                const double* gi = n.grad.row_ptr(i) + c0;
                const double* pr = p.row_ptr(i);
                double* dsr = ds.row_ptr(i);
                double row_dot = 0.0;
                for (int j = 0; j < tk; ++j) {
                    if (pr[j] == 0.0) continue;
                    const double* vj = v->val.row_ptr(j) + c0;
                    double dp = 0.0;
                    for (int t = 0; t < dh; ++t) dp += gi[t] * vj[t];
                    dsr[j] = dp;
                    row_dot += dp * pr[j];
                }
                for (int j = 0; j < tk; ++j) dsr[j] = pr[j] * (dsr[j] - row_dot);
            }
            for (int i = 0; i < tq; ++i) {
                const double* gi = n.grad.row_ptr(i) + c0;
                const double* pr = p.row_ptr(i);
                const double* dsr = ds.row_ptr(i);
                double* gqi = gq.row_ptr(i) + c0;
                for (int j = 0; j < tk; ++j) {
                    if (pr[j] != 0.0) {
                        double* gvj = gv.row_ptr(j) + c0;
                        for (int t = 0; t < dh; ++t) gvj[t] += pr[j] * gi[t];
                    }
                    if (dsr[j] != 0.0) {
                        const double w = dsr[j] * inv_sqrt;
                        const double* kj = k->val.row_ptr(j) + c0;
                        const double* qi = q->val.row_ptr(i) + c0;
                        double* gkj = gk.row_ptr(j) + c0;
                        for (int t = 0; t < dh; ++t) {
                            gqi[t] += w * kj[t];
                            gkj[t] += w * qi[t];
                        }
                    }
                }
            }
        }
        q->accumulate(gq);
        k->accumulate(gk);
        v->accumulate(gv);
    });
    return res;
}

Var mse_loss_rows(const Var& a, const Var& b, const std::vector<bool>& row_mask) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument("mse_loss_rows: shape mismatch");
    if (!row_mask.empty() && static_cast<int>(row_mask.size()) != a->val.rows)
        throw std::invalid_argument("mse_loss_rows: mask length mismatch");
    int valid = 0;
    double total = 0.0;
    for (int i = 0; i < a->val.rows; ++i) {
        if (!row_mask.empty() && !row_mask[i]) continue;
        ++valid;
        for (int j = 0; j < a->val.cols; ++j) {
            const double diff = a->val.at(i, j) - b->val.at(i, j);
            total += diff * diff;
        }
    }
    if (valid == 0) throw std::invalid_argument("mse_loss_rows: no valid rows");
    Mat v = Mat::full(1, 1, total / valid);
    return make_node(std::move(v), {a, b}, [a, b, row_mask, valid](Node& n) {
        const double g = n.grad.at(0, 0) * 2.0 / valid;
        Mat ga(a->val.rows, a->val.cols);
        for (int i = 0; i < ga.rows; ++i) {
            if (!row_mask.empty() && !row_mask[i]) continue;
            for (int j = 0; j < ga.cols; ++j)
                ga.at(i, j) = g * (a->val.at(i, j) - b->val.at(i, j));
        }
        if (a->requires_grad) a->accumulate(ga);
        if (b->requires_grad) {
            ga *= -1.0;
            b->accumulate(ga);
        }
    });
}

Var cross_entropy_loss(const Var& logits, const std::vector<int>& targets,
                       const std::vector<bool>& mask) {
    const int t = logits->val.rows, vsize = logits->val.cols;
    if (static_cast<int>(targets.size()) != t)
        throw std::invalid_argument("cross_entropy_loss: target length mismatch");
    if (!mask.empty() && static_cast<int>(mask.size()) != t)
        throw std::invalid_argument("cross_entropy_loss: mask length mismatch");
    for (int i = 0; i < t; ++i) {
        if (!mask.empty() && !mask[i]) continue;
        if (targets[i] < 0 || targets[i] >= vsize)
            throw std::out_of_range("cross_entropy_loss: target id out of range");
    }

    Mat soft(t, vsize);
    int valid = 0;
    double total = 0.0;
    for (int i = 0; i < t; ++i) {
        const double* row = logits->val.row_ptr(i);
        double mx = row[0];
        for (int j = 1; j < vsize; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < vsize; ++j) {
            soft.at(i, j) = std::exp(row[j] - mx);
            sum += soft.at(i, j);
        }
        for (int j = 0; j < vsize; ++j) soft.at(i, j) /= sum;
        if (mask.empty() || mask[i]) {
            ++valid;
            total -= std::log(std::max(soft.at(i, targets[i]), 1e-300));
        }
    }
    if (valid == 0) throw std::invalid_argument("cross_entropy_loss: no valid positions");
    Mat v = Mat::full(1, 1, total / valid);
    return make_node(std::move(v), {logits}, [logits, soft, targets, mask, valid](Node& n) {
        const double g = n.grad.at(0, 0) / valid;
        Mat gl(soft.rows, soft.cols);
        for (int i = 0; i < soft.rows; ++i) {
            if (!mask.empty() && !mask[i]) continue;
            for (int j = 0; j < soft.cols; ++j) gl.at(i, j) = g * soft.at(i, j);
            gl.at(i, targets[i]) -= g;
        }
        logits->accumulate(gl);
    });
}

Var pairwise_embedding_loss(const Var& z, const std::vector<int>& labels, double margin) {
    const int b = z->val.rows;
    if (static_cast<int>(labels.size()) != b)
        throw std::invalid_argument("pairwise_embedding_loss: label count mismatch");
    int n_pos = 0, n_neg = 0;
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
            if (i == j) continue;
            (labels[i] == labels[j] ? n_pos : n_neg)++;
        }
    if (n_pos == 0)
        throw std::invalid_argument("pairwise_embedding_loss: batch has no positive pair");

    Mat gram = matmul_a_bT(z->val, z->val);
    double pos = 0.0, neg = 0.0;
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
            if (i == j) continue;
            if (labels[i] == labels[j])
                pos += 1.0 - gram.at(i, j);
            else
                neg += std::max(gram.at(i, j) - margin, 0.0);
        }
    const double loss = pos / n_pos + (n_neg > 0 ? neg / n_neg : 0.0);
    Mat v = Mat::full(1, 1, loss);
    return make_node(std::move(v), {z},
                     [z, gram, labels, margin, n_pos, n_neg, b](Node& n) {
        // dL/dG[i,j] then dL/dZ = (W + W^T) Z since G = Z Z^T.
        Mat w(b, b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j) {
                if (i == j) continue;
                if (labels[i] == labels[j])
                    w.at(i, j) = -1.0 / n_pos;
                else if (gram.at(i, j) > margin)
                    w.at(i, j) = 1.0 / n_neg;
            }
        const double g = n.grad.at(0, 0);
        Mat sym(b, b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j) sym.at(i, j) = g * (w.at(i, j) + w.at(j, i));
        z->accumulate(semcom::matmul(sym, z->val));
    });
}

double grad_norm(const std::vector<Var>& params) {
    double s = 0.0;
    for (const auto& p : params)
        if (p->grad.size() > 0)
            for (double x : p->grad.data) s += x * x;
    return std::sqrt(s);
}

void zero_grads(const std::vector<Var>& params) {
    for (const auto& p : params) p->grad = Mat();
}

}  // namespace semcom::nn
