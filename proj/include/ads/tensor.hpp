#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ads/error.hpp"

namespace ads::tensor {

// Dense row-major tensor of 64-bit floats. Rank 1..3 is all the projection
// stack needs; rank-1 values are treated as a single row by the row-wise ops.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double value) { return from({1}, {value}); }

    int rank() const { return static_cast<int>(shape.size()); }
    size_t size() const { return data.size(); }

    // Row/column view of a rank-1 or rank-2 tensor.
    int rows() const { return rank() == 1 ? 1 : shape[0]; }
    int cols() const { return rank() == 1 ? shape[0] : shape[1]; }

    double& at(int i) { return data[static_cast<size_t>(i)]; }
    double at(int i) const { return data[static_cast<size_t>(i)]; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_string(const Tensor& t);

// Handle to a node in a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Tape of primitive applications for one forward pass. Ops execute eagerly
// and record a backward closure; creation order is a topological order, so
// backward() is a single reverse sweep with additive gradient accumulation
// on fan-out.
class Graph {
public:
    // Leaf without gradient.
    Var constant(Tensor value);
    // Leaf with gradient (trainable parameter or input under test).
    Var param(Tensor value);

    const Tensor& value(Var v) const { return node(v).value; }
    const Tensor& grad(Var v) const;

    // -- primitive set -------------------------------------------------
    // add/mul accept equal shapes, or a rank-1 / [1,n] second operand
    // broadcast across the rows of the first.
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var concat(const std::vector<Var>& parts, int axis);
    Var slice(Var a, int row_begin, int row_end, int col_begin, int col_end);
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var a);  // normalize only (no affine), eps 1e-5
    Var gelu(Var a);
    Var l2_normalize_rows(Var a);
    Var mean(Var a);  // scalar mean over all entries
    // Per-row cross entropy of logits against integer targets; returns the
    // [rows] vector of losses. Stable log-sum-exp with max subtraction.
    Var cross_entropy_rows(Var logits, std::vector<int> targets);
    // 1D convolution across the layer axis of a [L,F,D] stack with a [C,L]
    // kernel and [C] bias; output [F, C*D]. Kernel length must equal L.
    Var layer_conv(Var stack, Var kernel, Var bias);
    // v[k] = dot(a[rows[k], :], b[k, :]) for a [n,d], b [m,d].
    Var row_pair_dot(Var a, Var b, std::vector<int> rows);
    // Copy of m with m[i,j] replaced by values[k] for each coordinate pair.
    // Coordinates must be unique.
    Var scatter_replace(Var m, std::vector<std::pair<int, int>> coords, Var values);
    // Composite: pairwise cosine similarities between the rows of a and b.
    Var cosine_similarity_matrix(Var a, Var b);

    // Reverse-mode sweep from a scalar loss. Gradients of all grad-tracking
    // leaves are available through grad() afterwards.
    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&)> backprop;
    };

    std::vector<Node> nodes_;

    Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
    const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }
    Var emit(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop);
    friend struct GraphOps;
};

// Central-difference gradient verification. `build` reconstructs the scalar
// loss from leaf vars made of `points`; returns the max over coordinates of
//   |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& build,
                  const std::vector<Tensor>& points, double eps = 1e-5);

}  // namespace ads::tensor
