#ifndef DIMCL_METRICS_HPP
#define DIMCL_METRICS_HPP

#include "dimcl/losses.hpp"
#include "dimcl/matrix.hpp"

#include <cstdint>
#include <vector>

namespace dimcl {

struct EmbeddingSet {
    Matrix embeddings; // M x D
    std::vector<int> labels;
    void validate() const;
    int num_classes() const;
};

// 1 minus the mean absolute cosine similarity over distinct cross-view
// column pairs. 1 means fully decorrelated representation elements.
double feature_diversity(const EmbeddingPair& pair);

// Cosine-similarity KNN with majority vote; ties go to the smaller
// class id.
double knn_accuracy(const EmbeddingSet& train, const EmbeddingSet& test, std::size_t k);

struct ProbeOptions {
    std::size_t epochs = 100;
    double lr = 0.3;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
};

// Single affine layer + softmax cross-entropy on frozen embeddings,
// SGD momentum 0.9, cosine lr decay. Returns top-1 test accuracy x100.
double linear_probe(const EmbeddingSet& train, const EmbeddingSet& test,
                    const ProbeOptions& opt = {});

struct ClassDistances {
    double intra = 0.0; // mean member-to-centroid distance, averaged over classes
    double inter = 0.0; // mean pairwise centroid distance
};

ClassDistances class_distances(const EmbeddingSet& set);

} // namespace dimcl

#endif
