#include "verify_suite.hpp"
#include "oracles.hpp"

#include "dimcl/graph.hpp"
#include "dimcl/losses.hpp"
#include "dimcl/metrics.hpp"
#include "dimcl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace verify {

using dimcl::EmbeddingPair;
using dimcl::Matrix;
using dimcl::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
}

EmbeddingPair random_pair(Rng& rng, std::size_t n, std::size_t d) {
    return {random_matrix(rng, n, d), random_matrix(rng, n, d)};
}

std::pair<std::size_t, std::size_t> random_shape(Rng& rng) {
    return {2 + rng.uniform_int(15), 2 + rng.uniform_int(15)};
}

double rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        diff += (got[i] - want[i]) * (got[i] - want[i]);
        norm += want[i] * want[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

std::string fmt_err(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "max err %.3g", v);
    return buf;
}

constexpr double kTaus[] = {1.0, 0.5, 0.1};

} // namespace

Outcome oracle_equivalence(int pairs) {
    Rng rng(2024);
    double worst = 0.0;
    for (int p = 0; p < pairs; ++p) {
        auto [n, d] = random_shape(rng);
        EmbeddingPair pair = random_pair(rng, n, d);
        for (double tau : kTaus) {
            worst = std::max(worst, std::fabs(dimcl::batch_infonce(pair, tau).value -
                                              oracle::batch_infonce(pair.za, pair.zb, tau)));
            worst = std::max(worst, std::fabs(dimcl::dimcl_loss(pair, tau).value -
                                              oracle::dimcl(pair.za, pair.zb, tau)));
            worst = std::max(worst, std::fabs(dimcl::abscl_loss(pair, tau).value -
                                              oracle::abscl(pair.za, pair.zb, tau)));
        }
        worst = std::max(worst, std::fabs(dimcl::simple_cl_loss(pair).value -
                                          oracle::simple_cl(pair.za, pair.zb)));
    }
    return {"oracle equivalence", worst < 1e-10, fmt_err(worst)};
}

Outcome transpose_duality(int pairs) {
    Rng rng(2025);
    double worst = 0.0;
    for (int p = 0; p < pairs; ++p) {
        auto [n, d] = random_shape(rng);
        EmbeddingPair pair = random_pair(rng, n, d);
        EmbeddingPair flipped{dimcl::transpose(pair.za), dimcl::transpose(pair.zb)};
        for (double tau : kTaus)
            worst = std::max(worst, std::fabs(dimcl::dimcl_loss(pair, tau).value -
                                              dimcl::batch_infonce(flipped, tau).value));
    }
    return {"transpose duality", worst < 1e-12, fmt_err(worst)};
}

Outcome gradient_fidelity(int instances) {
    Rng rng(2026);
    double worst = 0.0;

    for (int p = 0; p < instances; ++p) {
        auto [n, d] = random_shape(rng);
        EmbeddingPair pair = random_pair(rng, n, d);
        double tau = kTaus[rng.uniform_int(3)];

        // analytic batch-direction gradient vs finite differences
        std::size_t qi = rng.uniform_int(n);
        {
            auto ctx = oracle::batch_query_context(pair.za, pair.zb, qi);
            auto fd = oracle::fd_grad(
                [&](const std::vector<double>& q) {
                    return oracle::per_query_simple(q, ctx.pos, ctx.negs);
                },
                ctx.q);
            Matrix g = dimcl::simple_cl_grad(pair, qi);
            std::vector<double> got(g.data(), g.data() + g.cols());
            worst = std::max(worst, rel_err(got, fd));
        }

        // hardness-aware dimensional gradient vs finite differences
        std::size_t di = rng.uniform_int(d);
        {
            auto ctx = oracle::dim_query_context(pair.za, pair.zb, di);
            auto fd = oracle::fd_grad(
                [&](const std::vector<double>& q) {
                    return oracle::per_query_infonce(q, ctx.pos, ctx.negs, tau);
                },
                ctx.q);
            Matrix g = dimcl::dimcl_grad(pair, tau, di);
            std::vector<double> got(g.data(), g.data() + g.rows());
            worst = std::max(worst, rel_err(got, fd));
        }

        // autodiff through the full loss vs finite differences on raw inputs
        if (p < 10) {
            dimcl::Graph graph;
            dimcl::NodeId za = graph.leaf(pair.za);
            dimcl::NodeId zb = graph.constant(pair.zb);
            graph.backward(dimcl::dimcl_node(graph, za, zb, tau));
            const Matrix& ag = graph.grad(za);
            std::vector<double> got(ag.data(), ag.data() + n * d);

            std::vector<double> flat(pair.za.data(), pair.za.data() + n * d);
            auto fd = oracle::fd_grad(
                [&](const std::vector<double>& x) {
                    Matrix m(n, d);
                    std::copy(x.begin(), x.end(), m.raw().begin());
                    return oracle::dimcl(m, pair.zb, tau);
                },
                flat, 1e-6);
            worst = std::max(worst, rel_err(got, fd));
        }
    }
    return {"gradient fidelity", worst < 1e-5, fmt_err(worst)};
}

Outcome alpha_diagnostics(int instances) {
    Rng rng(2027);
    double worst_sum = 0.0, worst_ratio = 0.0;
    bool order_ok = true;

    for (int p = 0; p < instances; ++p) {
        auto [n, d] = random_shape(rng);
        EmbeddingPair pair = random_pair(rng, n, d);
        double tau = kTaus[rng.uniform_int(3)];
        dimcl::LossReport rep = dimcl::dimcl_loss(pair, tau);

        // negative similarities in the report's candidate order
        auto g = oracle::normalized_cols(pair.za);
        auto h = oracle::normalized_cols(pair.zb);
        for (std::size_t i = 0; i < d; ++i) {
            double sum = rep.alpha_pos[i];
            for (double a : rep.alpha_neg[i]) sum += a;
            worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));

            std::vector<double> sims;
            for (std::size_t j = 0; j < d; ++j)
                if (j != i) sims.push_back(oracle::dot(g[i], g[j]));
            for (std::size_t j = 0; j < d; ++j)
                if (j != i) sims.push_back(oracle::dot(g[i], h[j]));
            const auto& alpha = rep.alpha_neg[i];

            for (std::size_t a = 0; a < sims.size(); ++a)
                for (std::size_t b = 0; b < sims.size(); ++b)
                    if (sims[a] - sims[b] > 1e-12 && alpha[a] <= alpha[b]) order_ok = false;

            // weight ratio of the two hardest distinct negatives
            std::size_t top = 0, second = sims.size();
            for (std::size_t a = 1; a < sims.size(); ++a)
                if (sims[a] > sims[top]) top = a;
            for (std::size_t a = 0; a < sims.size(); ++a)
                if (a != top && sims[top] - sims[a] > 1e-9 &&
                    (second == sims.size() || sims[a] > sims[second]))
                    second = a;
            if (second < sims.size()) {
                double want = std::exp((sims[top] - sims[second]) / tau);
                double got = alpha[top] / alpha[second];
                worst_ratio = std::max(worst_ratio, std::fabs(got - want) / want);
            }
        }
    }
    bool pass = worst_sum < 1e-9 && order_ok && worst_ratio < 1e-6;
    char buf[128];
    std::snprintf(buf, sizeof buf, "sum err %.3g, ratio err %.3g, ordering %s",
                  worst_sum, worst_ratio, order_ok ? "ok" : "violated");
    return {"alpha diagnostics", pass, buf};
}

Outcome diversity_endpoints() {
    bool pass = true;
    std::string detail = "all checks ok";

    // identical columns, exactly normalizable entries
    {
        // power-of-two norms keep the normalization exact
        Matrix m(2, 5);
        for (std::size_t j = 0; j < 5; ++j) m(0, j) = (double)(1 << j);
        if (dimcl::feature_diversity({m, m}) != 0.0) {
            pass = false;
            detail = "identical columns not exactly 0";
        }
    }

    // orthogonal columns (scaled basis vectors)
    {
        Matrix m(4, 4);
        for (std::size_t j = 0; j < 4; ++j) m(j, j) = (double)(j + 2);
        if (dimcl::feature_diversity({m, m}) != 1.0) {
            pass = false;
            detail = "orthogonal columns not exactly 1";
        }
    }

    // invariance to joint column permutation and positive column scaling
    {
        Rng rng(2028);
        EmbeddingPair pair = random_pair(rng, 7, 9);
        double base = dimcl::feature_diversity(pair);

        std::vector<std::size_t> perm = rng.permutation(9);
        EmbeddingPair shuffled{Matrix(7, 9), Matrix(7, 9)};
        EmbeddingPair scaled{Matrix(7, 9), Matrix(7, 9)};
        for (std::size_t j = 0; j < 9; ++j) {
            double s = rng.uniform(0.1, 10.0);
            for (std::size_t i = 0; i < 7; ++i) {
                shuffled.za(i, j) = pair.za(i, perm[j]);
                shuffled.zb(i, j) = pair.zb(i, perm[j]);
                scaled.za(i, j) = s * pair.za(i, j);
                scaled.zb(i, j) = s * pair.zb(i, j);
            }
        }
        if (std::fabs(dimcl::feature_diversity(shuffled) - base) >= 1e-9 ||
            std::fabs(dimcl::feature_diversity(scaled) - base) >= 1e-9) {
            pass = false;
            detail = "permutation/scaling invariance violated";
        }
    }
    return {"diversity endpoints", pass, detail};
}

std::vector<Outcome> run_all() {
    return {oracle_equivalence(), transpose_duality(), gradient_fidelity(),
            alpha_diagnostics(), diversity_endpoints()};
}

} // namespace verify
