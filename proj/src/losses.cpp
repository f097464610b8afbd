#include "dimcl/losses.hpp"
#include "dimcl/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace dimcl {

void EmbeddingPair::validate() const {
    if (!za.same_shape(zb))
        throw std::invalid_argument("embedding pair: views have different shapes");
    if (za.rows() == 0 || za.cols() == 0)
        throw std::invalid_argument("empty matrix");
    require_finite(za, "za");
    require_finite(zb, "zb");
}

namespace {

// Shared batch-direction core: queries are rows of q, positives the
// matching rows of k, negatives the 2N-2 remaining rows of {q, k}.
// Inputs are already unit rows.
LossReport infonce_core(const Matrix& q, const Matrix& k, double tau, bool abs_neg) {
    const std::size_t n = q.rows();
    LossReport rep;
    rep.per_query_pos_sim.resize(n);
    rep.alpha_pos.resize(n);
    rep.alpha_neg.resize(n);

    auto dot_rows = [&](const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
        double s = 0.0;
        for (std::size_t t = 0; t < a.cols(); ++t) s += a(i, t) * b(j, t);
        return s;
    };

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sims;
        sims.reserve(2 * n - 1);
        double pos = dot_rows(q, i, k, i);
        sims.push_back(pos);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sims.push_back(abs_neg ? std::abs(dot_rows(q, i, q, j))
                                               : dot_rows(q, i, q, j));
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sims.push_back(abs_neg ? std::abs(dot_rows(q, i, k, j))
                                               : dot_rows(q, i, k, j));

        std::vector<double> logits(sims.size());
        for (std::size_t t = 0; t < sims.size(); ++t) logits[t] = sims[t] / tau;
        total += log_sum_exp(logits) - pos / tau;

        std::vector<double> alpha = stable_softmax(sims, tau);
        rep.per_query_pos_sim[i] = pos;
        rep.alpha_pos[i] = alpha[0];
        rep.alpha_neg[i].assign(alpha.begin() + 1, alpha.end());
    }
    rep.value = total / (double)n;
    return rep;
}

void check_tau(double tau) {
    if (tau <= 0.0) throw std::invalid_argument("nonpositive temperature");
}

} // namespace

LossReport simple_cl_loss(const EmbeddingPair& pair) {
    pair.validate();
    const std::size_t n = pair.n();
    if (n < 2) throw std::invalid_argument("needs at least one negative");
    Matrix q = l2_normalize(pair.za, Axis::Rows);
    Matrix k = l2_normalize(pair.zb, Axis::Rows);

    LossReport rep;
    rep.per_query_pos_sim.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pos = 0.0;
        for (std::size_t t = 0; t < q.cols(); ++t) pos += q(i, t) * k(i, t);
        double neg = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            for (std::size_t t = 0; t < q.cols(); ++t)
                neg += q(i, t) * (q(j, t) + k(j, t));
        }
        rep.per_query_pos_sim[i] = pos;
        total += -pos + neg / (double)(2 * n - 2);
    }
    rep.value = total / (double)n;
    return rep;
}

Matrix simple_cl_grad(const EmbeddingPair& pair, std::size_t i) {
    pair.validate();
    const std::size_t n = pair.n();
    if (n < 2) throw std::invalid_argument("needs at least one negative");
    if (i >= n) throw std::out_of_range("query index out of range");
    Matrix q = l2_normalize(pair.za, Axis::Rows);
    Matrix k = l2_normalize(pair.zb, Axis::Rows);
    Matrix grad(1, q.cols());
    const double w = 1.0 / (double)(2 * n - 2);
    for (std::size_t t = 0; t < q.cols(); ++t) {
        double v = -k(i, t);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            v += w * (q(j, t) + k(j, t));
        }
        grad(0, t) = v;
    }
    return grad;
}

LossReport batch_infonce(const EmbeddingPair& pair, double tau) {
    pair.validate();
    check_tau(tau);
    if (pair.n() < 2) throw std::invalid_argument("needs at least one negative");
    Matrix q = l2_normalize(pair.za, Axis::Rows);
    Matrix k = l2_normalize(pair.zb, Axis::Rows);
    return infonce_core(q, k, tau, false);
}

LossReport dimcl_loss(const EmbeddingPair& pair, double tau) {
    pair.validate();
    check_tau(tau);
    if (pair.d() < 2) throw std::invalid_argument("needs at least one negative column");
    Matrix g = transpose(l2_normalize(pair.za, Axis::Cols));
    Matrix h = transpose(l2_normalize(pair.zb, Axis::Cols));
    return infonce_core(g, h, tau, false);
}

LossReport abscl_loss(const EmbeddingPair& pair, double tau) {
    pair.validate();
    check_tau(tau);
    if (pair.d() < 2) throw std::invalid_argument("needs at least one negative column");
    Matrix g = transpose(l2_normalize(pair.za, Axis::Cols));
    Matrix h = transpose(l2_normalize(pair.zb, Axis::Cols));
    return infonce_core(g, h, tau, true);
}

Matrix dimcl_grad(const EmbeddingPair& pair, double tau, std::size_t i) {
    pair.validate();
    check_tau(tau);
    const std::size_t d = pair.d();
    if (d < 2) throw std::invalid_argument("needs at least one negative column");
    if (i >= d) throw std::out_of_range("query index out of range");

    // columns as rows, normalized along the batch direction
    Matrix g = transpose(l2_normalize(pair.za, Axis::Cols));
    Matrix h = transpose(l2_normalize(pair.zb, Axis::Cols));
    const std::size_t n = g.cols();

    auto dot_rows = [&](const Matrix& a, std::size_t x, const Matrix& b, std::size_t y) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += a(x, t) * b(y, t);
        return s;
    };

    std::vector<double> sims;
    std::vector<const Matrix*> owner;
    std::vector<std::size_t> idx;
    sims.push_back(dot_rows(g, i, h, i));
    owner.push_back(&h); idx.push_back(i);
    for (std::size_t j = 0; j < d; ++j)
        if (j != i) { sims.push_back(dot_rows(g, i, g, j)); owner.push_back(&g); idx.push_back(j); }
    for (std::size_t j = 0; j < d; ++j)
        if (j != i) { sims.push_back(dot_rows(g, i, h, j)); owner.push_back(&h); idx.push_back(j); }

    std::vector<double> alpha = stable_softmax(sims, tau);
    Matrix grad(n, 1);
    for (std::size_t t = 0; t < n; ++t) {
        double v = -(1.0 - alpha[0]) * h(i, t);
        for (std::size_t s = 1; s < alpha.size(); ++s)
            v += alpha[s] * (*owner[s])(idx[s], t);
        grad(t, 0) = v / tau;
    }
    return grad;
}

double combined_loss(double base, double dim, const LossMixConfig& mix) {
    if (mix.lambda < 0.0 || mix.lambda > 1.0)
        throw std::invalid_argument("lambda out of [0,1]");
    check_tau(mix.tau);
    return mix.lambda * dim + (1.0 - mix.lambda) * base;
}

namespace {

// Builds the InfoNCE scalar on a graph; q/k nodes hold unit query/key
// rows. Self-similarities are masked with a large negative constant so
// the log-sum-exp runs over the positive plus the 2N-2 negatives.
NodeId infonce_core_node(Graph& g, NodeId q, NodeId k, double tau, bool abs_neg) {
    const std::size_t n = g.value(q).rows();
    Matrix self_mask(n, n);
    Matrix eye(n, n), off(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        self_mask(i, i) = -1e30;
        eye(i, i) = 1.0;
        off(i, i) = 0.0;
    }

    NodeId s1 = g.matmul(q, g.transpose(q));
    NodeId s2 = g.matmul(q, g.transpose(k));
    if (abs_neg) {
        s1 = g.abs(s1); // diagonal gets masked anyway
        s2 = g.add(g.mul(g.abs(s2), g.constant(off)), g.mul(s2, g.constant(eye)));
    }
    NodeId logits1 = g.add(g.scale(s1, 1.0 / tau), g.constant(self_mask));
    NodeId logits2 = g.scale(s2, 1.0 / tau);
    NodeId lse = g.log_sum_exp_rows(g.concat_cols(logits1, logits2));
    NodeId pos = g.scale(g.diag_part(s2), 1.0 / tau);
    return g.mean_all(g.sub(lse, pos));
}

NodeId center_cols_node(Graph& g, NodeId x) {
    const std::size_t n = g.value(x).rows();
    Matrix avg(n, n, 1.0 / (double)n);
    return g.sub(x, g.matmul(g.constant(avg), x));
}

} // namespace

NodeId infonce_node(Graph& g, NodeId za, NodeId zb, double tau) {
    check_tau(tau);
    if (g.value(za).rows() < 2)
        throw std::invalid_argument("needs at least one negative");
    NodeId q = g.l2_normalize(za, Axis::Rows);
    NodeId k = g.l2_normalize(zb, Axis::Rows);
    return infonce_core_node(g, q, k, tau, false);
}

NodeId dimcl_node(Graph& g, NodeId za, NodeId zb, double tau,
                  bool abs_negatives, bool center_columns) {
    check_tau(tau);
    if (g.value(za).cols() < 2)
        throw std::invalid_argument("needs at least one negative column");
    NodeId a = za, b = zb;
    if (center_columns) {
        a = center_cols_node(g, a);
        b = center_cols_node(g, b);
    }
    NodeId q = g.l2_normalize(g.transpose(a), Axis::Rows);
    NodeId k = g.l2_normalize(g.transpose(b), Axis::Rows);
    return infonce_core_node(g, q, k, tau, abs_negatives);
}

} // namespace dimcl
