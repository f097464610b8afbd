#ifndef DIMCL_RUNNER_HPP
#define DIMCL_RUNNER_HPP

#include "dimcl/config.hpp"
#include "dimcl/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dimcl {

struct EpochRow {
    std::size_t epoch = 0;
    std::optional<double> base_loss;
    std::optional<double> dimcl_loss;
    std::optional<double> total_loss;
    std::optional<double> feature_diversity;
    std::optional<double> probe_acc;
    std::optional<double> knn_acc;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<EpochRow> rows;
    bool diverged = false;
    std::size_t diverged_step = 0;
    double wall_seconds = 0.0;

    const EpochRow& final_row() const { return rows.back(); }
    std::optional<double> final_metric(const std::string& name) const;
};

// Deterministic train/test split and dataset resolution for a config.
struct ResolvedData {
    Dataset dataset;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};
ResolvedData resolve_dataset(const ExperimentConfig& cfg);

// Trains per the config, evaluates at the configured cadence and writes
// metrics.csv, summary.json and checkpoint.bin under cfg.out_dir.
// A diverged run returns a partial report with `diverged` set.
RunReport run_experiment(const ExperimentConfig& cfg);

std::string metrics_csv(const RunReport& report);
std::string summary_json(const RunReport& report);

enum class SweepParam { Lambda, Tau, Dim };
SweepParam sweep_param_from_string(const std::string& s);

struct SweepResult {
    SweepParam param = SweepParam::Lambda;
    std::vector<double> values;
    std::vector<RunReport> runs;
};

// One run per value (all else fixed, including the seed), up to `workers`
// in parallel. Writes each run under <out_dir>/sweep_<param>_<value>/ and
// a combined long-form CSV (param_value, metric, epoch, value).
SweepResult sweep(const ExperimentConfig& base, SweepParam param,
                  const std::vector<double>& values, std::size_t workers = 1);

std::string sweep_csv(const SweepResult& result);

// Embeddings + labels for a subset of a dataset, computed through the
// online encoder in fixed-order chunks.
EmbeddingSet embed_subset(FrameworkState& state, const Dataset& ds,
                          const std::vector<std::size_t>& idx,
                          std::size_t chunk = 512);

} // namespace dimcl

#endif
