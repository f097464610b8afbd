#include "dimcl/metrics.hpp"
#include "dimcl/kernels.hpp"
#include "dimcl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace dimcl {

void EmbeddingSet::validate() const {
    if (labels.size() != embeddings.rows())
        throw std::invalid_argument("embedding set: label count mismatch");
    for (int l : labels)
        if (l < 0) throw std::invalid_argument("embedding set: negative class id");
}

int EmbeddingSet::num_classes() const {
    int m = -1;
    for (int l : labels) m = std::max(m, l);
    return m + 1;
}

double feature_diversity(const EmbeddingPair& pair) {
    pair.validate();
    const std::size_t d = pair.d();
    if (d < 2) throw std::invalid_argument("feature diversity needs at least two columns");
    const std::size_t n = pair.n();
    for (std::size_t j = 0; j < d; ++j) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sa += pair.za(i, j) * pair.za(i, j);
            sb += pair.zb(i, j) * pair.zb(i, j);
        }
        if (sa == 0.0 || sb == 0.0) throw std::invalid_argument("degenerate column");
    }
    Matrix g = l2_normalize(pair.za, Axis::Cols);
    Matrix h = l2_normalize(pair.zb, Axis::Cols);
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += g(t, i) * h(t, j);
            acc += std::abs(dot);
        }
    return 1.0 - acc / (double)(d * (d - 1));
}

double knn_accuracy(const EmbeddingSet& train, const EmbeddingSet& test, std::size_t k) {
    train.validate();
    test.validate();
    if (k == 0 || k > train.embeddings.rows())
        throw std::invalid_argument("k out of range for train set");
    Matrix tr = l2_normalize(train.embeddings, Axis::Rows);
    Matrix te = l2_normalize(test.embeddings, Axis::Rows);
    Matrix sims = matmul(te, transpose(tr)); // test x train cosine

    std::size_t correct = 0;
    std::vector<std::size_t> order(tr.rows());
    for (std::size_t i = 0; i < te.rows(); ++i) {
        std::iota(order.begin(), order.end(), (std::size_t)0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (sims(i, a) != sims(i, b)) return sims(i, a) > sims(i, b);
                              return a < b;
                          });
        std::map<int, std::size_t> votes;
        for (std::size_t t = 0; t < k; ++t) ++votes[train.labels[order[t]]];
        int best = -1;
        std::size_t best_count = 0;
        for (auto& [cls, cnt] : votes)
            if (cnt > best_count) { best = cls; best_count = cnt; } // map order breaks ties low
        if (best == test.labels[i]) ++correct;
    }
    return 100.0 * (double)correct / (double)te.rows();
}

double linear_probe(const EmbeddingSet& train, const EmbeddingSet& test,
                    const ProbeOptions& opt) {
    train.validate();
    test.validate();
    const int classes = std::max(train.num_classes(), test.num_classes());
    if (train.num_classes() < 2)
        throw std::invalid_argument("probe needs at least two classes");
    const std::size_t m = train.embeddings.rows();
    const std::size_t d = train.embeddings.cols();
    const Matrix& x = train.embeddings;

    Matrix w(d, classes), b(1, classes);
    Matrix vw(d, classes), vb(1, classes); // momentum buffers
    const double momentum = 0.9;
    Rng rng = Rng(opt.seed).split(0x11EA);

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        const double lr = opt.lr * 0.5 *
            (1.0 + std::cos(std::numbers::pi * (double)epoch / (double)opt.epochs));
        std::vector<std::size_t> order = rng.split(epoch).permutation(m);
        for (std::size_t start = 0; start < m; start += opt.batch_size) {
            const std::size_t bs = std::min(opt.batch_size, m - start);
            Matrix gw(d, classes), gb(1, classes);
            for (std::size_t r = 0; r < bs; ++r) {
                const std::size_t i = order[start + r];
                std::vector<double> logits(classes);
                for (int c = 0; c < classes; ++c) {
                    double s = b(0, c);
                    for (std::size_t t = 0; t < d; ++t) s += x(i, t) * w(t, c);
                    logits[c] = s;
                }
                std::vector<double> p = stable_softmax(logits, 1.0);
                p[(std::size_t)train.labels[i]] -= 1.0;
                for (int c = 0; c < classes; ++c) {
                    const double g = p[c] / (double)bs;
                    gb(0, c) += g;
                    for (std::size_t t = 0; t < d; ++t) gw(t, c) += g * x(i, t);
                }
            }
            for (std::size_t t = 0; t < w.size(); ++t) {
                vw.raw()[t] = momentum * vw.raw()[t] + gw.raw()[t];
                w.raw()[t] -= lr * vw.raw()[t];
            }
            for (std::size_t t = 0; t < b.size(); ++t) {
                vb.raw()[t] = momentum * vb.raw()[t] + gb.raw()[t];
                b.raw()[t] -= lr * vb.raw()[t];
            }
        }
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.embeddings.rows(); ++i) {
        int best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < classes; ++c) {
            double s = b(0, c);
            for (std::size_t t = 0; t < d; ++t) s += test.embeddings(i, t) * w(t, c);
            if (s > best_v) { best_v = s; best = c; }
        }
        if (best == test.labels[i]) ++correct;
    }
    return 100.0 * (double)correct / (double)test.embeddings.rows();
}

ClassDistances class_distances(const EmbeddingSet& set) {
    set.validate();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < set.labels.size(); ++i)
        by_class[set.labels[i]].push_back(i);
    if (by_class.size() < 2)
        throw std::invalid_argument("class distances need at least two classes");

    const std::size_t d = set.embeddings.cols();
    std::vector<std::vector<double>> centroids;
    double intra = 0.0;
    for (auto& [cls, members] : by_class) {
        std::vector<double> c(d, 0.0);
        for (std::size_t i : members)
            for (std::size_t t = 0; t < d; ++t) c[t] += set.embeddings(i, t);
        for (double& v : c) v /= (double)members.size();
        double mean_dist = 0.0;
        for (std::size_t i : members) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                double diff = set.embeddings(i, t) - c[t];
                s += diff * diff;
            }
            mean_dist += std::sqrt(s);
        }
        intra += mean_dist / (double)members.size();
        centroids.push_back(std::move(c));
    }
    intra /= (double)by_class.size();

    double inter = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < centroids.size(); ++a)
        for (std::size_t b2 = a + 1; b2 < centroids.size(); ++b2) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                double diff = centroids[a][t] - centroids[b2][t];
                s += diff * diff;
            }
            inter += std::sqrt(s);
            ++pairs;
        }
    inter /= (double)pairs;
    return {intra, inter};
}

} // namespace dimcl
