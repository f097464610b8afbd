#ifndef DIMCL_DATA_HPP
#define DIMCL_DATA_HPP

#include "dimcl/matrix.hpp"
#include "dimcl/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dimcl {

enum class DatasetKind { Image, Feature };

// One labeled example. Images hold channel-major pixel planes in [0,1]
// (CIFAR layout: R plane, G plane, B plane); feature examples hold a
// flat vector.
struct Example {
    std::vector<double> values;
    int label = 0;
};

struct Dataset {
    DatasetKind kind = DatasetKind::Feature;
    int height = 0, width = 0, channels = 0; // images only
    int feature_dim = 0;                     // feature data only
    int num_classes = 0;
    std::vector<Example> examples;
    std::vector<std::uint8_t> coarse_labels; // CIFAR-100 only, example order

    std::size_t size() const { return examples.size(); }
    std::size_t example_dim() const {
        return kind == DatasetKind::Image
            ? (std::size_t)height * width * channels
            : (std::size_t)feature_dim;
    }
};

enum class CifarVariant { Cifar10, Cifar100 };

// Parses the CIFAR binary record format. `path` may be a single .bin
// file or a directory holding the standard batch files.
Dataset load_cifar(const std::string& path, CifarVariant variant);

// Re-serializes a CIFAR dataset to the exact on-disk record format.
// Round-trips byte-identically with load_cifar.
std::vector<std::uint8_t> serialize_cifar(const Dataset& ds, CifarVariant variant);

// Gaussian clusters around unit-sphere centers with pairwise center
// distance >= 0.5 (rejection sampled).
Dataset synth_clusters(int classes, int dim, int per_class, double sigma,
                       std::uint64_t seed);

// Flat binary import/export for synthetic feature datasets
// ("DCLSYN1" magic, little-endian int32 header, float32 features,
// int32 labels).
void save_synth(const Dataset& ds, const std::string& path);
Dataset load_synth(const std::string& path);

} // namespace dimcl

#endif
