#ifndef DIMCL_TEST_ORACLES_HPP
#define DIMCL_TEST_ORACLES_HPP

// Naive reference implementations used to cross-check the library.
// Everything here is written as plain double loops, independent of the
// softmax/log-sum-exp helpers in the library proper.

#include "dimcl/matrix.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

using dimcl::Matrix;

std::vector<std::vector<double>> normalized_rows(const Matrix& m);
std::vector<std::vector<double>> normalized_cols(const Matrix& m);

double dot(const std::vector<double>& a, const std::vector<double>& b);

// Mean InfoNCE with rows as queries; negatives are every other row of
// both views (2N-2 of them).
double batch_infonce(const Matrix& za, const Matrix& zb, double tau);

// Mean InfoNCE with batch-normalized columns as queries.
double dimcl(const Matrix& za, const Matrix& zb, double tau);

// dimcl with absolute dot products on the negative logits.
double abscl(const Matrix& za, const Matrix& zb, double tau);

// Mean of -q.k+ plus the mean negative similarity.
double simple_cl(const Matrix& za, const Matrix& zb);

// Keys for one query: positive plus the 2N-2 (or 2D-2) negatives.
struct QueryContext {
    std::vector<double> q;
    std::vector<double> pos;
    std::vector<std::vector<double>> negs;
};
QueryContext batch_query_context(const Matrix& za, const Matrix& zb, std::size_t i);
QueryContext dim_query_context(const Matrix& za, const Matrix& zb, std::size_t i);

// Single-query losses as functions of the (already normalized) query,
// with the keys held fixed. These are what the analytic gradients in
// the library differentiate.
double per_query_infonce(const std::vector<double>& q, const std::vector<double>& pos,
                         const std::vector<std::vector<double>>& negs, double tau,
                         bool abs_negatives = false);
double per_query_simple(const std::vector<double>& q, const std::vector<double>& pos,
                        const std::vector<std::vector<double>>& negs);

// Central finite differences of an arbitrary scalar function.
std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& f,
                            const std::vector<double>& x, double eps = 1e-6);

double feature_diversity(const Matrix& za, const Matrix& zb);

} // namespace oracle

#endif
