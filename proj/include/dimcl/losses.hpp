#ifndef DIMCL_LOSSES_HPP
#define DIMCL_LOSSES_HPP

#include "dimcl/graph.hpp"
#include "dimcl/matrix.hpp"

#include <vector>

namespace dimcl {

// Two augmented views' representations, N examples x D features.
struct EmbeddingPair {
    Matrix za; // online / query view
    Matrix zb; // key / target view
    std::size_t n() const { return za.rows(); }
    std::size_t d() const { return za.cols(); }
    void validate() const;
};

// Scalar loss plus per-query diagnostics. For the batch-direction losses
// the query index runs over rows (length N); for the dimensional losses
// over columns (length D).
struct LossReport {
    double value = 0.0;
    std::vector<double> per_query_pos_sim;
    std::vector<double> alpha_pos;              // alpha'_i per query
    std::vector<std::vector<double>> alpha_neg; // alpha_j per query
};

struct LossMixConfig {
    double lambda = 0.1;
    double tau = 0.1;
};

// Mean of -q.k+ + mean over the 2N-2 negatives of q.k-. Rows are
// normalized internally.
LossReport simple_cl_loss(const EmbeddingPair& pair);

// Closed-form gradient of N * simple_cl_loss w.r.t. the normalized q_i,
// holding all keys fixed: -k_i+ + mean_j k_j-. Returns 1 x D.
Matrix simple_cl_grad(const EmbeddingPair& pair, std::size_t i);

// InfoNCE along the batch direction; queries/keys are rows.
LossReport batch_infonce(const EmbeddingPair& pair, double tau);

// InfoNCE along the feature dimension; queries/keys are columns,
// normalized along the batch direction. Equals batch_infonce on the
// transposed pair.
LossReport dimcl_loss(const EmbeddingPair& pair, double tau);

// DimCL with absolute values on the negative logits.
LossReport abscl_loss(const EmbeddingPair& pair, double tau);

// Hardness-aware analytic gradient of D * dimcl_loss w.r.t. the
// normalized column g_i, holding keys fixed:
//   -(1/tau)(1 - alpha'_i) h_i+ + (1/tau) sum_j alpha_j h_j-.
// Returns N x 1.
Matrix dimcl_grad(const EmbeddingPair& pair, double tau, std::size_t i);

// lambda * dim + (1 - lambda) * base.
double combined_loss(double base, double dim, const LossMixConfig& mix);

// Graph builders used by the training path. za/zb are N x D nodes;
// returns a scalar loss node.
NodeId infonce_node(Graph& g, NodeId za, NodeId zb, double tau);
NodeId dimcl_node(Graph& g, NodeId za, NodeId zb, double tau,
                  bool abs_negatives = false, bool center_columns = false);

} // namespace dimcl

#endif
