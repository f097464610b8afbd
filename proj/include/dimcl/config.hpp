#ifndef DIMCL_CONFIG_HPP
#define DIMCL_CONFIG_HPP

#include "dimcl/augment.hpp"
#include "dimcl/data.hpp"
#include "dimcl/frameworks.hpp"

#include <cstdint>
#include <string>

namespace dimcl {

// Full specification of one training run. Parsed from a flat
// `key = value` document ('#' starts a comment); unknown keys are
// rejected, missing keys take the defaults below.
struct ExperimentConfig {
    // dataset
    std::string dataset = "synth"; // synth | cifar10 | cifar100 | synth_file
    std::string data_path;
    int classes = 3;
    int input_dim = 32;
    int per_class = 300;
    double sigma = 0.1;
    std::size_t max_examples = 0;  // 0 = all
    double eval_holdout = 0.2;

    // framework / loss
    std::string framework = "simsiam";
    std::string loss_variant = "dimcl"; // dimcl | abscl
    std::string base_loss = "framework"; // framework | cross_entropy
    int proj_dim = 256;
    double lambda = 0.1;
    double tau = 0.1;
    double tau_base = 0.1;
    double ema_momentum = 0.99;
    bool center_columns = false;
    bool dimcl_on_predictor = false;

    // optimization
    std::size_t epochs = 30;
    std::size_t batch_size = 256;
    double lr = 0.0;               // 0 = linear scaling rule 0.1 * batch/256
    std::size_t warmup_epochs = 10;
    double weight_decay = 1e-5;
    std::string precision = "float64"; // float64 | float32
    std::uint64_t seed = 1;

    // augmentation
    AugmentPolicy augment;

    // evaluation
    std::size_t eval_every = 5;
    std::size_t probe_epochs = 100;
    double probe_lr = 0.3;
    std::size_t knn_k = 20;

    std::string out_dir = "runs/out";

    double effective_lr() const {
        return lr > 0.0 ? lr : 0.1 * (double)batch_size / 256.0;
    }
    FrameworkConfig framework_config(const Dataset& ds) const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

} // namespace dimcl

#endif
