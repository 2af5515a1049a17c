#include "uatlab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace uatlab {

namespace detail {

void mm_accum(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void mm_tn_accum(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) {
                continue;
            }
            double* crow = c + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
}

void softmax_inplace(double* x, std::size_t n) {
    double max_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        max_val = std::max(max_val, x[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - max_val);
        sum += x[i];
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= inv;
    }
}

}  // namespace detail

namespace {

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got shape " +
                             shape_to_string(t.shape()));
    }
}

}  // namespace

NodeId Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::Node& Graph::node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }

const Graph::Node& Graph::node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }

const Tensor& Graph::value(NodeId id) const { return node(id).value(); }

OpKind Graph::kind(NodeId id) const { return node(id).kind; }

std::vector<double>& Graph::ensure_adjoint(NodeId id) {
    Node& n = node(id);
    if (!n.reached) {
        n.adjoint.assign(n.value().size(), 0.0);
        n.reached = true;
    }
    return n.adjoint;
}

bool Graph::parents_need_grad(const std::vector<NodeId>& parents) const {
    for (NodeId p : parents) {
        if (node(p).needs_grad) {
            return true;
        }
    }
    return false;
}

NodeId Graph::leaf(const Tensor& tensor) {
    for (const auto& [ptr, id] : leaf_index_) {
        if (ptr == &tensor) {
            return id;
        }
    }
    Node n;
    n.kind = OpKind::kLeaf;
    n.external = &tensor;
    n.needs_grad = tensor.requires_grad();
    const NodeId id = push(std::move(n));
    leaf_index_.emplace_back(&tensor, id);
    if (tensor.requires_grad()) {
        node(id).backprop = [id](Graph& g) {
            const Node& self = g.node(id);
            std::vector<double>& grad = self.external->ensure_grad();
            for (std::size_t i = 0; i < grad.size(); ++i) {
                grad[i] += self.adjoint[i];
            }
        };
    }
    return id;
}

NodeId Graph::constant(Tensor value) {
    Node n;
    n.kind = OpKind::kConstant;
    n.owned = std::move(value);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    if (ta.shape()[1] != tb.shape()[0]) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(ta.shape()) +
                             " x " + shape_to_string(tb.shape()));
    }
    const std::size_t m = ta.shape()[0];
    const std::size_t k = ta.shape()[1];
    const std::size_t n = tb.shape()[1];

    Node out;
    out.kind = OpKind::kMatmul;
    out.parents = {a, b};
    out.owned = Tensor({m, n});
    detail::mm_accum(out.owned.data(), ta.data(), tb.data(), m, k, n);
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, b, m, k, n](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            if (g.wants_grad(a)) {
                // dA += dY * B^T, materialized transpose keeps the kernel cache-friendly
                std::vector<double> bt(k * n);
                detail::transpose(g.value(b).data(), k, n, bt.data());
                detail::mm_accum(g.ensure_adjoint(a).data(), dy.data(), bt.data(), m, n, k);
            }
            if (g.wants_grad(b)) {
                // dB += A^T * dY
                detail::mm_tn_accum(g.ensure_adjoint(b).data(), g.value(a).data(), dy.data(), m, k, n);
            }
        };
    }
    return id;
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2(ta, "matmul_nt");
    require_rank2(tb, "matmul_nt");
    if (ta.shape()[1] != tb.shape()[1]) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_to_string(ta.shape()) +
                             " x " + shape_to_string(tb.shape()) + "^T");
    }
    const std::size_t m = ta.shape()[0];
    const std::size_t k = ta.shape()[1];
    const std::size_t n = tb.shape()[0];

    Node out;
    out.kind = OpKind::kMatmulNT;
    out.parents = {a, b};
    out.owned = Tensor({m, n});
    {
        std::vector<double> bt(k * n);
        detail::transpose(tb.data(), n, k, bt.data());
        detail::mm_accum(out.owned.data(), ta.data(), bt.data(), m, k, n);
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, b, m, k, n](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            if (g.wants_grad(a)) {
                // dA += dY * B
                detail::mm_accum(g.ensure_adjoint(a).data(), dy.data(), g.value(b).data(), m, n, k);
            }
            if (g.wants_grad(b)) {
                // dB += dY^T * A
                detail::mm_tn_accum(g.ensure_adjoint(b).data(), dy.data(), g.value(a).data(), m, n, k);
            }
        };
    }
    return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape() != tb.shape()) {
        throw DimensionError("add: shape mismatch, " + shape_to_string(ta.shape()) + " vs " +
                             shape_to_string(tb.shape()));
    }
    Node out;
    out.kind = OpKind::kAdd;
    out.parents = {a, b};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out.owned.data()[i] = ta.data()[i] + tb.data()[i];
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, b](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            for (NodeId p : {a, b}) {
                if (g.wants_grad(p)) {
                    std::vector<double>& pa = g.ensure_adjoint(p);
                    for (std::size_t i = 0; i < dy.size(); ++i) {
                        pa[i] += dy[i];
                    }
                }
            }
        };
    }
    return id;
}

NodeId Graph::add_row(NodeId a, NodeId row) {
    const Tensor& ta = value(a);
    const Tensor& tr = value(row);
    require_rank2(ta, "add_row");
    if (tr.rank() != 1 || tr.size() != ta.shape()[1]) {
        throw DimensionError("add_row: row shape " + shape_to_string(tr.shape()) +
                             " does not match matrix " + shape_to_string(ta.shape()));
    }
    const std::size_t rows = ta.shape()[0];
    const std::size_t cols = ta.shape()[1];

    Node out;
    out.kind = OpKind::kAddRow;
    out.parents = {a, row};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = ta.data() + i * cols;
        double* dst = out.owned.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = src[j] + tr.data()[j];
        }
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, row, rows, cols](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            if (g.wants_grad(a)) {
                std::vector<double>& pa = g.ensure_adjoint(a);
                for (std::size_t i = 0; i < dy.size(); ++i) {
                    pa[i] += dy[i];
                }
            }
            if (g.wants_grad(row)) {
                std::vector<double>& pr = g.ensure_adjoint(row);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* drow = dy.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        pr[j] += drow[j];
                    }
                }
            }
        };
    }
    return id;
}

NodeId Graph::scale(NodeId a, double factor) {
    const Tensor& ta = value(a);
    Node out;
    out.kind = OpKind::kScale;
    out.parents = {a};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out.owned.data()[i] = ta.data()[i] * factor;
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, factor](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            std::vector<double>& pa = g.ensure_adjoint(a);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                pa[i] += dy[i] * factor;
            }
        };
    }
    return id;
}

NodeId Graph::relu(NodeId a) {
    const Tensor& ta = value(a);
    Node out;
    out.kind = OpKind::kRelu;
    out.parents = {a};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out.owned.data()[i] = ta.data()[i] > 0.0 ? ta.data()[i] : 0.0;
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            const Tensor& input = g.value(a);
            std::vector<double>& pa = g.ensure_adjoint(a);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                if (input.data()[i] > 0.0) {
                    pa[i] += dy[i];
                }
            }
        };
    }
    return id;
}

NodeId Graph::softmax(NodeId a, std::size_t axis) {
    const Tensor& ta = value(a);
    if (axis >= ta.rank()) {
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                             shape_to_string(ta.shape()));
    }
    if (ta.rank() > 2) {
        throw DimensionError("softmax: rank > 2 unsupported, shape " + shape_to_string(ta.shape()));
    }
    if (!ta.all_finite()) {
        throw NumericError("softmax: non-finite input");
    }

    Node out;
    out.kind = OpKind::kSoftmax;
    out.parents = {a};
    out.owned = Tensor(ta.shape(), ta.values());

    // Contiguous rows for the last axis; columns go through strided copies.
    const bool column_wise = (ta.rank() == 2 && axis == 0);
    const std::size_t rows = ta.rank() == 2 ? ta.shape()[0] : 1;
    const std::size_t cols = ta.rank() == 2 ? ta.shape()[1] : ta.size();
    if (!column_wise) {
        for (std::size_t i = 0; i < rows; ++i) {
            detail::softmax_inplace(out.owned.data() + i * cols, cols);
        }
    } else {
        std::vector<double> column(rows);
        for (std::size_t j = 0; j < cols; ++j) {
            for (std::size_t i = 0; i < rows; ++i) {
                column[i] = out.owned.data()[i * cols + j];
            }
            detail::softmax_inplace(column.data(), rows);
            for (std::size_t i = 0; i < rows; ++i) {
                out.owned.data()[i * cols + j] = column[i];
            }
        }
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, column_wise, rows, cols](Graph& g) {
            // dx = p .* (dy - sum(p .* dy)) per normalized slice
            const std::vector<double>& dy = g.node(id).adjoint;
            const Tensor& p = g.node(id).owned;
            std::vector<double>& pa = g.ensure_adjoint(a);
            if (!column_wise) {
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* prow = p.data() + i * cols;
                    const double* drow = dy.data() + i * cols;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                        dot += prow[j] * drow[j];
                    }
                    double* grow = pa.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        grow[j] += prow[j] * (drow[j] - dot);
                    }
                }
            } else {
                for (std::size_t j = 0; j < cols; ++j) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < rows; ++i) {
                        dot += p.data()[i * cols + j] * dy[i * cols + j];
                    }
                    for (std::size_t i = 0; i < rows; ++i) {
                        const double pv = p.data()[i * cols + j];
                        pa[i * cols + j] += pv * (dy[i * cols + j] - dot);
                    }
                }
            }
        };
    }
    return id;
}

NodeId Graph::causal_softmax(NodeId a) {
    const Tensor& ta = value(a);
    require_rank2(ta, "causal_softmax");
    if (ta.shape()[0] != ta.shape()[1]) {
        throw DimensionError("causal_softmax: matrix must be square, got " +
                             shape_to_string(ta.shape()));
    }
    if (!ta.all_finite()) {
        throw NumericError("causal_softmax: non-finite input");
    }
    const std::size_t t = ta.shape()[0];

    Node out;
    out.kind = OpKind::kCausalSoftmax;
    out.parents = {a};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < t; ++i) {
        double* row = out.owned.data() + i * t;
        const double* src = ta.data() + i * t;
        std::copy(src, src + i + 1, row);
        detail::softmax_inplace(row, i + 1);
        // columns beyond the prefix stay exactly zero
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, t](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            const Tensor& p = g.node(id).owned;
            std::vector<double>& pa = g.ensure_adjoint(a);
            for (std::size_t i = 0; i < t; ++i) {
                const double* prow = p.data() + i * t;
                const double* drow = dy.data() + i * t;
                double dot = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    dot += prow[j] * drow[j];
                }
                double* grow = pa.data() + i * t;
                for (std::size_t j = 0; j <= i; ++j) {
                    grow[j] += prow[j] * (drow[j] - dot);
                }
            }
        };
    }
    return id;
}

NodeId Graph::dropout(NodeId a, double rate, RngStream& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    }
    if (rate == 0.0) {
        return a;  // exact identity, no node
    }
    const Tensor& ta = value(a);
    const double keep_scale = 1.0 / (1.0 - rate);

    std::vector<double> mask(ta.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.next_unit() < rate ? 0.0 : keep_scale;
    }

    Node out;
    out.kind = OpKind::kDropout;
    out.parents = {a};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out.owned.data()[i] = ta.data()[i] * mask[i];
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, mask = std::move(mask)](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            std::vector<double>& pa = g.ensure_adjoint(a);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                pa[i] += dy[i] * mask[i];
            }
        };
    }
    return id;
}

NodeId Graph::layer_norm(NodeId a, NodeId gain, NodeId bias, double eps) {
    const Tensor& ta = value(a);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    require_rank2(ta, "layer_norm");
    const std::size_t rows = ta.shape()[0];
    const std::size_t cols = ta.shape()[1];
    if (tg.rank() != 1 || tg.size() != cols || tb.rank() != 1 || tb.size() != cols) {
        throw DimensionError("layer_norm: gain/bias must be rank-1 of width " + std::to_string(cols));
    }

    std::vector<double> normalized(rows * cols);
    std::vector<double> inv_std(rows);

    Node out;
    out.kind = OpKind::kLayerNorm;
    out.parents = {a, gain, bias};
    out.owned = Tensor(ta.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* x = ta.data() + i * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            mean += x[j];
        }
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = x[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[i] = inv;
        double* nrow = normalized.data() + i * cols;
        double* yrow = out.owned.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            nrow[j] = (x[j] - mean) * inv;
            yrow[j] = nrow[j] * tg.data()[j] + tb.data()[j];
        }
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, gain, bias, rows, cols, normalized = std::move(normalized),
                             inv_std = std::move(inv_std)](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            const Tensor& tg = g.value(gain);
            const double inv_cols = 1.0 / static_cast<double>(cols);
            if (g.wants_grad(a)) {
                std::vector<double>& pa = g.ensure_adjoint(a);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* drow = dy.data() + i * cols;
                    const double* nrow = normalized.data() + i * cols;
                    double mean_u = 0.0;
                    double mean_un = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double u = drow[j] * tg.data()[j];
                        mean_u += u;
                        mean_un += u * nrow[j];
                    }
                    mean_u *= inv_cols;
                    mean_un *= inv_cols;
                    double* grow = pa.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double u = drow[j] * tg.data()[j];
                        grow[j] += inv_std[i] * (u - mean_u - nrow[j] * mean_un);
                    }
                }
            }
            if (g.wants_grad(gain)) {
                std::vector<double>& pg = g.ensure_adjoint(gain);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* drow = dy.data() + i * cols;
                    const double* nrow = normalized.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        pg[j] += drow[j] * nrow[j];
                    }
                }
            }
            if (g.wants_grad(bias)) {
                std::vector<double>& pb = g.ensure_adjoint(bias);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* drow = dy.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) {
                        pb[j] += drow[j];
                    }
                }
            }
        };
    }
    return id;
}

NodeId Graph::rows_select(NodeId table, const std::vector<int>& rows) {
    const Tensor& tt = value(table);
    require_rank2(tt, "rows_select");
    if (rows.empty()) {
        throw ContractError("rows_select: empty row list");
    }
    const std::size_t vocab = tt.shape()[0];
    const std::size_t width = tt.shape()[1];
    for (int r : rows) {
        if (r < 0 || static_cast<std::size_t>(r) >= vocab) {
            throw IndexError("rows_select: row " + std::to_string(r) + " out of range [0," +
                             std::to_string(vocab) + ")");
        }
    }

    Node out;
    out.kind = OpKind::kRowsSelect;
    out.parents = {table};
    out.owned = Tensor({rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = tt.data() + static_cast<std::size_t>(rows[i]) * width;
        std::copy(src, src + width, out.owned.data() + i * width);
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, table, width, rows](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            std::vector<double>& pt = g.ensure_adjoint(table);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                double* dst = pt.data() + static_cast<std::size_t>(rows[i]) * width;
                const double* src = dy.data() + i * width;
                for (std::size_t j = 0; j < width; ++j) {
                    dst[j] += src[j];
                }
            }
        };
    }
    return id;
}

NodeId Graph::slice_cols(NodeId a, std::size_t col_begin, std::size_t col_end) {
    const Tensor& ta = value(a);
    require_rank2(ta, "slice_cols");
    const std::size_t rows = ta.shape()[0];
    const std::size_t cols = ta.shape()[1];
    if (col_begin >= col_end || col_end > cols) {
        throw DimensionError("slice_cols: invalid range [" + std::to_string(col_begin) + "," +
                             std::to_string(col_end) + ") for " + shape_to_string(ta.shape()));
    }
    const std::size_t width = col_end - col_begin;

    Node out;
    out.kind = OpKind::kSliceCols;
    out.parents = {a};
    out.owned = Tensor({rows, width});
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = ta.data() + i * cols + col_begin;
        std::copy(src, src + width, out.owned.data() + i * width);
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, a, rows, cols, col_begin, width](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            std::vector<double>& pa = g.ensure_adjoint(a);
            for (std::size_t i = 0; i < rows; ++i) {
                double* dst = pa.data() + i * cols + col_begin;
                const double* src = dy.data() + i * width;
                for (std::size_t j = 0; j < width; ++j) {
                    dst[j] += src[j];
                }
            }
        };
    }
    return id;
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols: no inputs");
    }
    const std::size_t rows = value(parts[0]).shape().at(0);
    std::size_t total = 0;
    for (NodeId p : parts) {
        const Tensor& tp = value(p);
        require_rank2(tp, "concat_cols");
        if (tp.shape()[0] != rows) {
            throw DimensionError("concat_cols: row count mismatch");
        }
        total += tp.shape()[1];
    }

    Node out;
    out.kind = OpKind::kConcatCols;
    out.parents = parts;
    out.owned = Tensor({rows, total});
    std::size_t offset = 0;
    for (NodeId p : parts) {
        const Tensor& tp = value(p);
        const std::size_t width = tp.shape()[1];
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(tp.data() + i * width, tp.data() + (i + 1) * width,
                      out.owned.data() + i * total + offset);
        }
        offset += width;
    }
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, parts, rows, total](Graph& g) {
            const std::vector<double>& dy = g.node(id).adjoint;
            std::size_t offset = 0;
            for (NodeId p : parts) {
                const std::size_t width = g.value(p).shape()[1];
                if (g.wants_grad(p)) {
                    std::vector<double>& pa = g.ensure_adjoint(p);
                    for (std::size_t i = 0; i < rows; ++i) {
                        const double* src = dy.data() + i * total + offset;
                        double* dst = pa.data() + i * width;
                        for (std::size_t j = 0; j < width; ++j) {
                            dst[j] += src[j];
                        }
                    }
                }
                offset += width;
            }
        };
    }
    return id;
}

NodeId Graph::cross_entropy(NodeId logits, std::size_t target) {
    const Tensor& tl = value(logits);
    if (tl.rank() != 1) {
        throw DimensionError("cross_entropy: expected rank-1 logits, got " +
                             shape_to_string(tl.shape()));
    }
    if (target >= tl.size()) {
        throw IndexError("cross_entropy: target " + std::to_string(target) +
                         " out of range [0," + std::to_string(tl.size()) + ")");
    }
    // Shares the row-sum code path so both variants use one backward rule.
    std::vector<int> one_target = {static_cast<int>(target)};
    return cross_entropy_rows_impl(logits, one_target, 1, tl.size(), OpKind::kCrossEntropy);
}

NodeId Graph::cross_entropy_rows(NodeId logits, const std::vector<int>& targets) {
    const Tensor& tl = value(logits);
    require_rank2(tl, "cross_entropy_rows");
    const std::size_t rows = tl.shape()[0];
    const std::size_t v = tl.shape()[1];
    if (targets.size() != rows) {
        throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(rows) + " rows");
    }
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= v) {
            throw IndexError("cross_entropy_rows: target " + std::to_string(t) +
                             " out of range [0," + std::to_string(v) + ")");
        }
    }
    return cross_entropy_rows_impl(logits, targets, rows, v, OpKind::kCrossEntropyRows);
}

NodeId Graph::cross_entropy_rows_impl(NodeId logits, const std::vector<int>& targets,
                                      std::size_t rows, std::size_t v, OpKind kind) {
    const Tensor& tl = value(logits);

    // loss = sum_t [logsumexp(row_t) - row_t[target_t]]; probabilities saved for backward
    std::vector<double> probs(rows * v);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = tl.data() + i * v;
        double max_val = row[0];
        for (std::size_t j = 1; j < v; ++j) {
            max_val = std::max(max_val, row[j]);
        }
        double sum = 0.0;
        double* prow = probs.data() + i * v;
        for (std::size_t j = 0; j < v; ++j) {
            prow[j] = std::exp(row[j] - max_val);
            sum += prow[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < v; ++j) {
            prow[j] *= inv;
        }
        loss += max_val + std::log(sum) - row[static_cast<std::size_t>(targets[i])];
    }

    Node out;
    out.kind = kind;
    out.parents = {logits};
    out.owned = Tensor::scalar(loss);
    out.needs_grad = parents_need_grad(out.parents);

    const NodeId id = push(std::move(out));
    if (node(id).needs_grad) {
        node(id).backprop = [id, logits, rows, v, targets, probs = std::move(probs)](Graph& g) {
            const double upstream = g.node(id).adjoint[0];
            std::vector<double>& pa = g.ensure_adjoint(logits);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* prow = probs.data() + i * v;
                double* grow = pa.data() + i * v;
                for (std::size_t j = 0; j < v; ++j) {
                    grow[j] += upstream * prow[j];
                }
                grow[static_cast<std::size_t>(targets[i])] -= upstream;
            }
        };
    }
    return id;
}

void Graph::backward(NodeId output) {
    if (backward_done_) {
        throw ContractError("Graph::backward: graphs support a single backward pass");
    }
    const Tensor& out = value(output);
    if (out.size() != 1) {
        throw ContractError("Graph::backward: output must be scalar, got shape " +
                            shape_to_string(out.shape()));
    }
    backward_done_ = true;
    ensure_adjoint(output)[0] = 1.0;
    for (NodeId id = output; id >= 0; --id) {
        Node& n = node(id);
        if (n.reached && n.needs_grad && n.backprop) {
            n.backprop(*this);
        }
    }
}

}  // namespace uatlab
