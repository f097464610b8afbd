// Experiment driver: train / sweep / eval / verify.
//
// Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.

#include "dimcl/errors.hpp"
#include "dimcl/runner.hpp"
#include "verify_suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void apply(const CommonOpts& opts, dimcl::ExperimentConfig& cfg) {
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
}

void print_final(const dimcl::RunReport& report) {
    const dimcl::EpochRow& last = report.final_row();
    std::printf("epochs completed: %zu, wall time: %.1f s\n",
                last.epoch, report.wall_seconds);
    auto line = [&](const char* name) {
        if (auto v = report.final_metric(name)) std::printf("  %s: %.6g\n", name, *v);
    };
    line("total_loss");
    line("base_loss");
    line("dimcl_loss");
    line("feature_diversity");
    line("probe_acc");
    line("knn_acc");
}

int cmd_train(const std::string& config_path, const CommonOpts& opts) {
    dimcl::ExperimentConfig cfg = dimcl::parse_config_file(config_path);
    apply(opts, cfg);
    dimcl::RunReport report = dimcl::run_experiment(cfg);
    print_final(report);
    std::printf("outputs written to %s\n", cfg.out_dir.c_str());
    if (report.diverged) {
        std::fprintf(stderr, "run diverged at step %zu; partial report written\n",
                     report.diverged_step);
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::string& values_csv, std::size_t workers,
              const CommonOpts& opts) {
    dimcl::ExperimentConfig cfg = dimcl::parse_config_file(config_path);
    apply(opts, cfg);

    std::vector<double> values;
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("bad sweep value: " + tok);
        values.push_back(v);
    }

    dimcl::SweepResult result =
        dimcl::sweep(cfg, dimcl::sweep_param_from_string(param), values, workers);
    bool any_diverged = false;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const dimcl::RunReport& r = result.runs[i];
        std::printf("%s = %g:%s\n", param.c_str(), result.values[i],
                    r.diverged ? " (diverged)" : "");
        print_final(r);
        any_diverged = any_diverged || r.diverged;
    }
    std::printf("sweep outputs written under %s\n", cfg.out_dir.c_str());
    return any_diverged ? kExitDiverged : kExitOk;
}

std::string detect_kind(const std::string& path, const std::string& requested) {
    if (!requested.empty()) return requested;
    std::ifstream in(path, std::ios::binary);
    char magic[7] = {};
    if (in.read(magic, 7) && std::string(magic, 7) == "DCLSYN1") return "synth_file";
    return "cifar10";
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& kind, const CommonOpts& opts) {
    dimcl::FrameworkState state = dimcl::FrameworkState::load_checkpoint(checkpoint);

    dimcl::ExperimentConfig cfg;
    cfg.dataset = detect_kind(dataset, kind);
    cfg.data_path = dataset;
    apply(opts, cfg);
    dimcl::ResolvedData data = dimcl::resolve_dataset(cfg);

    dimcl::EmbeddingSet train = dimcl::embed_subset(state, data.dataset, data.train_idx);
    dimcl::EmbeddingSet test = dimcl::embed_subset(state, data.dataset, data.test_idx);

    nlohmann::json j;
    j["checkpoint"] = checkpoint;
    j["dataset"] = dataset;
    j["train_examples"] = data.train_idx.size();
    j["test_examples"] = data.test_idx.size();
    j["knn_acc"] = dimcl::knn_accuracy(train, test, std::min<std::size_t>(
                                                        cfg.knn_k, data.train_idx.size()));
    dimcl::ProbeOptions probe;
    probe.seed = cfg.seed;
    j["probe_acc"] = dimcl::linear_probe(train, test, probe);
    dimcl::ClassDistances cd = dimcl::class_distances(test);
    j["intra_class_distance"] = cd.intra;
    j["inter_class_distance"] = cd.inter;

    std::string text = j.dump(2) + "\n";
    std::fputs(text.c_str(), stdout);
    if (opts.out_dir) {
        std::filesystem::create_directories(*opts.out_dir);
        std::ofstream out(*opts.out_dir + "/eval.json", std::ios::binary);
        if (!out) throw dimcl::IoError("cannot write " + *opts.out_dir + "/eval.json");
        out << text;
    }
    return kExitOk;
}

int cmd_verify() {
    bool all_pass = true;
    for (const verify::Outcome& o : verify::run_all()) {
        std::printf("[%s] %s (%s)\n", o.pass ? "PASS" : "FAIL", o.name.c_str(),
                    o.detail.c_str());
        all_pass = all_pass && o.pass;
    }
    return all_pass ? kExitOk : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dimensional contrastive learning experiment runner"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { opts.seed = v; }, "override the config seed");
    app.add_option_function<std::string>(
        "--out-dir", [&](const std::string& v) { opts.out_dir = v; },
        "override the output directory");

    std::string config_path, param, values_csv, checkpoint, dataset, kind;
    std::size_t workers = 1;

    CLI::App* train = app.add_subcommand("train", "run one training experiment");
    train->add_option("config", config_path, "experiment config file")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
    sweep->add_option("config", config_path, "experiment config file")->required();
    sweep->add_option("--param", param, "lambda | tau | dim")->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();
    sweep->add_option("--workers", workers, "parallel runs");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("dataset", dataset, "dataset file or directory")->required();
    eval->add_option("--kind", kind, "synth_file | cifar10 | cifar100 (default: detect)");

    CLI::App* verify_cmd = app.add_subcommand("verify", "run the oracle and gradient suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, opts);
        if (sweep->parsed()) return cmd_sweep(config_path, param, values_csv, workers, opts);
        if (eval->parsed()) return cmd_eval(checkpoint, dataset, kind, opts);
        if (verify_cmd->parsed()) return cmd_verify();
    } catch (const dimcl::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
