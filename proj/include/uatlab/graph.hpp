#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "uatlab/rng.hpp"
#include "uatlab/tensor.hpp"

namespace uatlab {

using NodeId = int;

enum class OpKind {
    kLeaf,
    kConstant,
    kMatmul,
    kMatmulNT,
    kAdd,
    kAddRow,
    kScale,
    kRelu,
    kSoftmax,
    kCausalSoftmax,
    kDropout,
    kLayerNorm,
    kRowsSelect,
    kSliceCols,
    kConcatCols,
    kCrossEntropy,
    kCrossEntropyRows,
};

// Reverse-mode tape for one forward pass. Operations execute eagerly and
// append a node whose parents always precede it, so the reverse sweep in
// creation order is a valid reverse-topological traversal that visits each
// node exactly once. Graphs are built per forward pass and discarded after
// backward; leaves bound to parameter tensors accumulate into Tensor::grad.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    // Binds an external tensor without copying. Repeated calls with the same
    // tensor return the same node. Gradients accumulate into the tensor iff
    // it requires grad.
    NodeId leaf(const Tensor& tensor);

    // Owns a grad-less value (positional tables, masks, literals).
    NodeId constant(Tensor value);

    // Stable for the lifetime of the graph (node storage never reallocates).
    const Tensor& value(NodeId id) const;
    std::size_t node_count() const noexcept { return nodes_.size(); }
    OpKind kind(NodeId id) const;

    NodeId matmul(NodeId a, NodeId b);
    NodeId matmul_nt(NodeId a, NodeId b);  // A * B^T
    NodeId add(NodeId a, NodeId b);
    NodeId add_row(NodeId a, NodeId row);  // broadcast a rank-1 row over a matrix
    NodeId scale(NodeId a, double factor);
    NodeId relu(NodeId a);
    NodeId softmax(NodeId a, std::size_t axis);
    NodeId causal_softmax(NodeId a);  // square matrix, row t normalized over columns <= t
    NodeId dropout(NodeId a, double rate, RngStream& rng);
    NodeId layer_norm(NodeId a, NodeId gain, NodeId bias, double eps = 1e-5);
    NodeId rows_select(NodeId table, const std::vector<int>& rows);
    NodeId slice_cols(NodeId a, std::size_t col_begin, std::size_t col_end);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId cross_entropy(NodeId logits, std::size_t target);                       // rank-1 [V]
    NodeId cross_entropy_rows(NodeId logits, const std::vector<int>& targets);     // [T x V], summed

    // Reverse sweep from a scalar output. May run once per graph.
    void backward(NodeId output);

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> parents;
        Tensor owned;
        const Tensor* external = nullptr;
        std::vector<double> adjoint;
        // Takes the graph as a parameter so the closure survives graph moves.
        std::function<void(Graph&)> backprop;
        bool needs_grad = false;
        bool reached = false;

        const Tensor& value() const noexcept { return external != nullptr ? *external : owned; }
    };

    NodeId push(Node node);
    NodeId cross_entropy_rows_impl(NodeId logits, const std::vector<int>& targets,
                                   std::size_t rows, std::size_t v, OpKind kind);
    Node& node(NodeId id);
    const Node& node(NodeId id) const;
    bool wants_grad(NodeId id) const { return node(id).needs_grad; }
    std::vector<double>& ensure_adjoint(NodeId id);
    bool parents_need_grad(const std::vector<NodeId>& parents) const;

    std::deque<Node> nodes_;
    std::vector<std::pair<const Tensor*, NodeId>> leaf_index_;
    bool backward_done_ = false;
};

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
void mm_accum(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n);
// C[k x n] += A^T[k x m] * B[m x n]  (A stored as [m x k])
void mm_tn_accum(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n);
void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst);

// In-place stable softmax over a contiguous slice.
void softmax_inplace(double* x, std::size_t n);

}  // namespace detail

}  // namespace uatlab
