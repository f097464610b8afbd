#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dimcl/metrics.hpp"
#include "dimcl/rng.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace dimcl;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (auto& v : m.raw()) v = rng.normal();
    return m;
}

EmbeddingSet gaussian_clusters(Rng rng, int classes, int per_class, int dim,
                               double sigma) {
    EmbeddingSet set;
    set.embeddings = Matrix(classes * per_class, dim);
    for (int c = 0; c < classes; ++c) {
        for (int e = 0; e < per_class; ++e) {
            std::size_t row = (std::size_t)(c * per_class + e);
            for (int t = 0; t < dim; ++t)
                set.embeddings(row, t) = (t == c ? 1.0 : 0.0) + sigma * rng.normal();
            set.labels.push_back(c);
        }
    }
    return set;
}

} // namespace

TEST_CASE("feature_diversity endpoints") {
    // identical columns with exactly unit-normalizable entries
    Matrix same(2, 4);
    for (std::size_t j = 0; j < 4; ++j) same(0, j) = (double)(1 << j);
    CHECK(feature_diversity({same, same}) == 0.0);

    Matrix ortho(3, 3);
    for (std::size_t j = 0; j < 3; ++j) ortho(j, j) = (double)(j + 1);
    CHECK(feature_diversity({ortho, ortho}) == 1.0);

    Matrix zero_col(3, 2);
    zero_col(0, 0) = 1.0; // second column all zero
    CHECK_THROWS_WITH_AS((void)feature_diversity({zero_col, zero_col}),
                         doctest::Contains("degenerate column"),
                         std::invalid_argument);
}

TEST_CASE("feature_diversity invariances and range") {
    Rng rng(10);
    EmbeddingPair pair{random_matrix(rng, 6, 5), random_matrix(rng, 6, 5)};
    double base = feature_diversity(pair);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    CHECK(base == doctest::Approx(oracle::feature_diversity(pair.za, pair.zb))
                      .epsilon(1e-12));

    auto perm = rng.permutation(5);
    EmbeddingPair shuffled{Matrix(6, 5), Matrix(6, 5)};
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t i = 0; i < 6; ++i) {
            shuffled.za(i, j) = pair.za(i, perm[j]);
            shuffled.zb(i, j) = pair.zb(i, perm[j]);
        }
    CHECK(std::fabs(feature_diversity(shuffled) - base) < 1e-12);

    EmbeddingPair scaled = pair;
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t i = 0; i < 6; ++i) scaled.zb(i, j) *= (double)(j + 1);
    CHECK(std::fabs(feature_diversity(scaled) - base) < 1e-9);
}

TEST_CASE("knn_accuracy toy cases") {
    EmbeddingSet train;
    train.embeddings = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    train.labels = {0, 1};

    EmbeddingSet test;
    test.embeddings = Matrix::from_rows({{0.9, 0.1}});
    test.labels = {0};
    CHECK(knn_accuracy(train, test, 1) == 100.0);

    // exact self match
    CHECK(knn_accuracy(train, train, 1) == 100.0);

    CHECK_THROWS_AS((void)knn_accuracy(train, test, 3), std::invalid_argument);
}

TEST_CASE("knn_accuracy on separable clusters matches a brute-force vote") {
    Rng rng(11);
    EmbeddingSet train = gaussian_clusters(rng.split(0), 3, 34, 4, 0.05);
    EmbeddingSet test = gaussian_clusters(rng.split(1), 3, 17, 4, 0.05);
    double acc = knn_accuracy(train, test, 5);
    CHECK(acc >= 95.0);

    // independent exhaustive vote
    auto tr = oracle::normalized_rows(train.embeddings);
    auto te = oracle::normalized_rows(test.embeddings);
    int hits = 0;
    for (std::size_t i = 0; i < te.size(); ++i) {
        std::vector<std::pair<double, int>> sims;
        for (std::size_t j = 0; j < tr.size(); ++j)
            sims.push_back({oracle::dot(te[i], tr[j]), train.labels[j]});
        std::sort(sims.begin(), sims.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        int votes[3] = {0, 0, 0};
        for (int k = 0; k < 5; ++k) votes[sims[k].second]++;
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (votes[c] > votes[best]) best = c;
        hits += best == test.labels[i];
    }
    CHECK(acc == doctest::Approx(100.0 * hits / (double)te.size()).epsilon(1e-12));
}

TEST_CASE("linear_probe separable and chance-level behavior") {
    Rng rng(12);
    EmbeddingSet train = gaussian_clusters(rng.split(0), 2, 40, 3, 0.02);
    EmbeddingSet test = gaussian_clusters(rng.split(1), 2, 20, 3, 0.02);
    ProbeOptions opt;
    opt.epochs = 50;
    CHECK(linear_probe(train, test, opt) == 100.0);

    // shuffled labels leave only chance accuracy
    EmbeddingSet big_train = gaussian_clusters(rng.split(2), 10, 40, 12, 0.05);
    EmbeddingSet big_test = gaussian_clusters(rng.split(3), 10, 20, 12, 0.05);
    Rng shuffle = rng.split(4);
    auto perm = shuffle.permutation(big_train.labels.size());
    std::vector<int> permuted(big_train.labels.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        permuted[i] = big_train.labels[perm[i]];
    big_train.labels = permuted;
    double chance = linear_probe(big_train, big_test, opt);
    CHECK(chance < 25.0);

    EmbeddingSet single = train;
    for (auto& l : single.labels) l = 0;
    CHECK_THROWS_AS((void)linear_probe(single, test, opt), std::invalid_argument);
}

TEST_CASE("linear_probe is deterministic given a seed") {
    Rng rng(13);
    EmbeddingSet train = gaussian_clusters(rng.split(0), 3, 30, 5, 0.3);
    EmbeddingSet test = gaussian_clusters(rng.split(1), 3, 15, 5, 0.3);
    ProbeOptions opt;
    opt.epochs = 20;
    opt.seed = 99;
    CHECK(linear_probe(train, test, opt) == linear_probe(train, test, opt));
}

TEST_CASE("class_distances") {
    EmbeddingSet two;
    two.embeddings = Matrix::from_rows({{0.0, 0.0}, {3.0, 4.0}});
    two.labels = {0, 1};
    ClassDistances cd = class_distances(two);
    CHECK(cd.intra == 0.0);
    CHECK(cd.inter == doctest::Approx(5.0).epsilon(1e-15));

    EmbeddingSet same;
    same.embeddings = Matrix(4, 2, 1.0);
    same.labels = {0, 0, 1, 1};
    cd = class_distances(same);
    CHECK(cd.intra == 0.0);
    CHECK(cd.inter == 0.0);

    EmbeddingSet one = two;
    one.labels = {0, 0};
    CHECK_THROWS_AS((void)class_distances(one), std::invalid_argument);

    // translation invariance, linear scaling
    Rng rng(14);
    EmbeddingSet set = gaussian_clusters(rng, 3, 25, 4, 0.2);
    ClassDistances base = class_distances(set);
    EmbeddingSet moved = set, doubled = set;
    for (auto& v : moved.embeddings.raw()) v += 11.5;
    for (auto& v : doubled.embeddings.raw()) v *= 2.0;
    ClassDistances m = class_distances(moved);
    ClassDistances d = class_distances(doubled);
    CHECK(std::fabs(m.intra - base.intra) < 1e-9);
    CHECK(std::fabs(m.inter - base.inter) < 1e-9);
    CHECK(d.intra == doctest::Approx(2.0 * base.intra).epsilon(1e-12));
    CHECK(d.inter == doctest::Approx(2.0 * base.inter).epsilon(1e-12));
}

TEST_CASE("class_distances approaches analytic centroid separation") {
    Rng rng(15);
    EmbeddingSet set = gaussian_clusters(rng, 3, 1000, 3, 0.1);
    ClassDistances cd = class_distances(set);
    // centers are e1, e2, e3; pairwise distance sqrt(2)
    CHECK(cd.inter == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
}
