#ifndef DIMCL_GRAPH_HPP
#define DIMCL_GRAPH_HPP

#include "dimcl/matrix.hpp"

#include <cstdint>
#include <vector>

namespace dimcl {

// Compute precision for the heavy GEMMs inside a graph. Verification
// paths stay in Float64; image training may opt into Float32.
enum class MathMode { Float64, Float32 };

using NodeId = std::int32_t;

struct Conv2dSpec {
    int in_channels = 0;
    int in_h = 0;
    int in_w = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

// Tape-based reverse-mode differentiation over a fixed primitive set.
// Nodes are recorded in construction order, which is already a valid
// topological order for the backward sweep.
class Graph {
public:
    explicit Graph(MathMode mode = MathMode::Float64) : mode_(mode) {}

    NodeId leaf(const Matrix& value);      // parameter; receives a gradient
    NodeId constant(const Matrix& value);  // input data; no gradient

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);        // elementwise
    NodeId scale(NodeId a, double s);
    NodeId add_scalar(NodeId a, double s);
    NodeId relu(NodeId a);
    NodeId abs(NodeId a);
    NodeId transpose(NodeId a);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId add_row_broadcast(NodeId a, NodeId bias); // bias is 1 x C
    NodeId l2_normalize(NodeId a, Axis axis, double eps = 1e-12);
    NodeId log_sum_exp_rows(NodeId a);     // N x C -> N x 1
    NodeId diag_part(NodeId a);            // N x N -> N x 1
    NodeId sum_all(NodeId a);              // -> 1 x 1
    NodeId mean_all(NodeId a);             // -> 1 x 1
    NodeId detach(NodeId a);               // value passes, gradient stops

    // Batch mean/variance normalization per feature group. gamma/beta are
    // 1 x C; `spatial` is the number of consecutive columns sharing one
    // channel (1 for MLP features, H*W for conv activations).
    NodeId batch_norm(NodeId a, NodeId gamma, NodeId beta, int spatial, double eps = 1e-5);

    // x: N x (C*H*W) channel-major; weight: outC x (C*k*k); bias: 1 x outC.
    NodeId conv2d(NodeId x, NodeId weight, NodeId bias, const Conv2dSpec& spec);
    NodeId global_avg_pool(NodeId a, int channels); // N x (C*S) -> N x C

    // Mean softmax cross-entropy of logits (N x C) against integer labels.
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels);

    const Matrix& value(NodeId id) const;
    const Matrix& grad(NodeId id) const;

    // Reverse sweep from a 1x1 output node.
    void backward(NodeId output);

    MathMode mode() const { return mode_; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        int op = 0;
        NodeId a = -1;
        NodeId b = -1;
        NodeId c = -1;
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        double scalar = 0.0;
        int ispatial = 1;
        Conv2dSpec conv;
        Matrix aux;              // saved forward state (softmax, stats, ...)
        std::vector<int> labels; // cross-entropy targets
    };

    NodeId push(Node&& n);
    Matrix mm(const Matrix& a, const Matrix& b) const;
    void backward_node(NodeId id);
    void accumulate(NodeId id, const Matrix& g);

    MathMode mode_;
    std::vector<Node> nodes_;
};

} // namespace dimcl

#endif
