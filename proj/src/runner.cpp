#include "dimcl/errors.hpp"
#include "dimcl/runner.hpp"
#include "dimcl/augment.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace dimcl {

namespace {

// fixed stream labels under the master seed
enum : std::uint64_t {
    kStreamData = 100,
    kStreamSubset = 101,
    kStreamSplit = 102,
    kStreamAugment = 103,
    kStreamEvalAug = 104,
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_cell(const std::optional<double>& v) {
    if (!v) return "";
    if (!std::isfinite(*v)) throw std::runtime_error("non-finite metric value");
    return fmt(*v);
}

Matrix gather_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Matrix m(idx.size(), ds.example_dim());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& v = ds.examples[idx[r]].values;
        for (std::size_t t = 0; t < v.size(); ++t) m(r, t) = v[t];
    }
    return m;
}

struct ViewBatch {
    Matrix view_a;
    Matrix view_b;
    std::vector<int> labels;
};

ViewBatch make_views(const Dataset& ds, const std::vector<std::size_t>& idx,
                     const AugmentPolicy& policy, Rng batch_rng) {
    ViewBatch batch;
    batch.view_a = Matrix(idx.size(), ds.example_dim());
    batch.view_b = Matrix(idx.size(), ds.example_dim());
    batch.labels.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        auto [a, b] = two_views(ds.examples[idx[r]], ds, policy, batch_rng.split(idx[r]));
        for (std::size_t t = 0; t < a.values.size(); ++t) {
            batch.view_a(r, t) = a.values[t];
            batch.view_b(r, t) = b.values[t];
        }
        batch.labels[r] = ds.examples[idx[r]].label;
    }
    return batch;
}

double lr_at_epoch(const ExperimentConfig& cfg, std::size_t epoch) {
    // linear warmup then cosine decay; epoch is 1-based
    const double base = cfg.effective_lr();
    const std::size_t warmup = std::min(cfg.warmup_epochs, cfg.epochs);
    if (epoch <= warmup && warmup > 0)
        return base * (double)epoch / (double)warmup;
    if (cfg.epochs == warmup) return base;
    double progress = (double)(epoch - warmup) / (double)(cfg.epochs - warmup);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace

std::optional<double> RunReport::final_metric(const std::string& name) const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        const EpochRow& r = *it;
        std::optional<double> v;
        if (name == "base_loss") v = r.base_loss;
        else if (name == "dimcl_loss") v = r.dimcl_loss;
        else if (name == "total_loss") v = r.total_loss;
        else if (name == "feature_diversity") v = r.feature_diversity;
        else if (name == "probe_acc") v = r.probe_acc;
        else if (name == "knn_acc") v = r.knn_acc;
        else throw std::invalid_argument("unknown metric: " + name);
        if (v) return v;
    }
    return std::nullopt;
}

ResolvedData resolve_dataset(const ExperimentConfig& cfg) {
    Rng rng(cfg.seed);
    ResolvedData out;
    if (cfg.dataset == "synth") {
        out.dataset = synth_clusters(cfg.classes, cfg.input_dim, cfg.per_class,
                                     cfg.sigma, rng.split(kStreamData).key());
    } else if (cfg.dataset == "synth_file") {
        out.dataset = load_synth(cfg.data_path);
    } else {
        out.dataset = load_cifar(cfg.data_path, cfg.dataset == "cifar10"
                                                    ? CifarVariant::Cifar10
                                                    : CifarVariant::Cifar100);
    }

    std::vector<std::size_t> order = rng.split(kStreamSubset).permutation(out.dataset.size());
    if (cfg.max_examples > 0 && cfg.max_examples < order.size())
        order.resize(cfg.max_examples);

    std::vector<std::size_t> shuffled(order.size());
    std::vector<std::size_t> perm = rng.split(kStreamSplit).permutation(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = order[perm[i]];

    std::size_t test_count = std::max<std::size_t>(
        1, (std::size_t)std::lround(cfg.eval_holdout * (double)shuffled.size()));
    if (test_count >= shuffled.size())
        throw std::runtime_error("dataset too small for the configured holdout");
    out.test_idx.assign(shuffled.begin(), shuffled.begin() + test_count);
    out.train_idx.assign(shuffled.begin() + test_count, shuffled.end());
    return out;
}

EmbeddingSet embed_subset(FrameworkState& state, const Dataset& ds,
                          const std::vector<std::size_t>& idx, std::size_t chunk) {
    EmbeddingSet set;
    set.labels.reserve(idx.size());
    std::vector<Matrix> parts;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        std::size_t n = std::min(chunk, idx.size() - start);
        std::vector<std::size_t> slice(idx.begin() + start, idx.begin() + start + n);
        parts.push_back(state.embed(gather_rows(ds, slice)));
        for (std::size_t i : slice) set.labels.push_back(ds.examples[i].label);
    }
    std::size_t d = parts.front().cols();
    set.embeddings = Matrix(idx.size(), d);
    std::size_t row = 0;
    for (const Matrix& p : parts)
        for (std::size_t i = 0; i < p.rows(); ++i, ++row)
            for (std::size_t j = 0; j < d; ++j) set.embeddings(row, j) = p(i, j);
    return set;
}

namespace {

EpochRow evaluate(const ExperimentConfig& cfg, FrameworkState& state,
                  const ResolvedData& data, std::size_t epoch) {
    EpochRow row;
    row.epoch = epoch;

    EmbeddingSet train = embed_subset(state, data.dataset, data.train_idx);
    EmbeddingSet test = embed_subset(state, data.dataset, data.test_idx);
    std::size_t k = std::min(cfg.knn_k, data.train_idx.size());
    row.knn_acc = knn_accuracy(train, test, k);
    ProbeOptions probe;
    probe.epochs = cfg.probe_epochs;
    probe.lr = cfg.probe_lr;
    probe.seed = cfg.seed;
    row.probe_acc = linear_probe(train, test, probe);

    // diversity on a fixed augmented batch through the loss-facing outputs
    std::size_t n = std::min(cfg.batch_size, data.train_idx.size());
    std::vector<std::size_t> subset(data.train_idx.begin(), data.train_idx.begin() + n);
    ViewBatch vb = make_views(data.dataset, subset, cfg.augment,
                              Rng(cfg.seed).split(kStreamEvalAug));
    EmbeddingPair pair = state.forward_views(vb.view_a, vb.view_b);
    row.feature_diversity = feature_diversity(pair);
    return row;
}

} // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.config = cfg;

    ResolvedData data = resolve_dataset(cfg);
    if (data.train_idx.size() < cfg.batch_size && data.train_idx.size() < 2)
        throw std::runtime_error("train split too small");

    FrameworkState state(cfg.framework_config(data.dataset), cfg.seed);
    report.rows.push_back(evaluate(cfg, state, data, 0));

    Rng shuffle_rng = Rng(cfg.seed).split(kStreamAugment);
    std::size_t global_step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng epoch_rng = shuffle_rng.split(epoch);
        std::vector<std::size_t> perm = epoch_rng.split(0).permutation(data.train_idx.size());
        const double lr = lr_at_epoch(cfg, epoch);

        double base_sum = 0.0, dim_sum = 0.0, total_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start + 1 < perm.size(); start += cfg.batch_size) {
            std::size_t n = std::min(cfg.batch_size, perm.size() - start);
            if (n < 2) break; // a batch needs at least one negative
            std::vector<std::size_t> batch_idx(n);
            for (std::size_t i = 0; i < n; ++i)
                batch_idx[i] = data.train_idx[perm[start + i]];
            ViewBatch vb = make_views(data.dataset, batch_idx, cfg.augment,
                                      epoch_rng.split(1 + start));
            ++global_step;
            try {
                StepReport step = state.training_step(vb.view_a, vb.view_b, lr, vb.labels);
                base_sum += step.base_loss;
                dim_sum += step.dimcl_loss;
                total_sum += step.total;
                ++steps;
            } catch (const std::runtime_error& e) {
                if (std::string(e.what()) != "diverged") throw;
                report.diverged = true;
                report.diverged_step = global_step;
                break;
            }
        }
        if (report.diverged) break;

        EpochRow row;
        row.epoch = epoch;
        if (steps > 0) {
            row.base_loss = base_sum / (double)steps;
            row.dimcl_loss = dim_sum / (double)steps;
            row.total_loss = total_sum / (double)steps;
        }
        bool eval_now = epoch == cfg.epochs ||
                        (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
        if (eval_now) {
            EpochRow eval_row = evaluate(cfg, state, data, epoch);
            row.feature_diversity = eval_row.feature_diversity;
            row.probe_acc = eval_row.probe_acc;
            row.knn_acc = eval_row.knn_acc;
        }
        report.rows.push_back(row);
    }

    auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    fs::create_directories(cfg.out_dir);
    {
        std::ofstream csv(cfg.out_dir + "/metrics.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write " + cfg.out_dir + "/metrics.csv");
        csv << metrics_csv(report);
    }
    {
        std::ofstream js(cfg.out_dir + "/summary.json", std::ios::binary);
        if (!js) throw IoError("cannot write " + cfg.out_dir + "/summary.json");
        js << summary_json(report);
    }
    state.save_checkpoint(cfg.out_dir + "/checkpoint.bin");
    return report;
}

std::string metrics_csv(const RunReport& report) {
    std::ostringstream out;
    out << "# schema: dimcl-metrics-v1\n";
    out << "epoch,base_loss,dimcl_loss,total_loss,feature_diversity,probe_acc,knn_acc\n";
    for (const EpochRow& r : report.rows)
        out << r.epoch << ',' << fmt_cell(r.base_loss) << ',' << fmt_cell(r.dimcl_loss)
            << ',' << fmt_cell(r.total_loss) << ',' << fmt_cell(r.feature_diversity)
            << ',' << fmt_cell(r.probe_acc) << ',' << fmt_cell(r.knn_acc) << '\n';
    return out.str();
}

std::string summary_json(const RunReport& report) {
    nlohmann::json j;
    j["schema"] = "dimcl-summary-v1";
    j["config_echo"] = serialize_config(report.config);
    j["diverged"] = report.diverged;
    if (report.diverged) j["diverged_step"] = report.diverged_step;
    j["wall_seconds"] = report.wall_seconds;
    nlohmann::json final;
    if (!report.rows.empty()) {
        const EpochRow& r = report.rows.back();
        final["epoch"] = r.epoch;
        auto set = [&](const char* name, const std::optional<double>& v) {
            if (v) final[name] = *v;
        };
        set("base_loss", r.base_loss);
        set("dimcl_loss", r.dimcl_loss);
        set("total_loss", r.total_loss);
        for (const char* m : {"feature_diversity", "probe_acc", "knn_acc"})
            if (auto v = report.final_metric(m)) final[m] = *v;
    }
    j["final"] = final;
    return j.dump(2) + "\n";
}

SweepParam sweep_param_from_string(const std::string& s) {
    if (s == "lambda") return SweepParam::Lambda;
    if (s == "tau") return SweepParam::Tau;
    if (s == "dim") return SweepParam::Dim;
    throw std::invalid_argument("unknown sweep parameter: " + s);
}

namespace {
std::string param_name(SweepParam p) {
    switch (p) {
    case SweepParam::Lambda: return "lambda";
    case SweepParam::Tau: return "tau";
    default: return "dim";
    }
}

std::string short_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}
} // namespace

SweepResult sweep(const ExperimentConfig& base, SweepParam param,
                  const std::vector<double>& values, std::size_t workers) {
    if (values.empty()) throw std::invalid_argument("empty sweep values");
    SweepResult result;
    result.param = param;
    result.values = values;
    result.runs.resize(values.size());

    std::vector<ExperimentConfig> configs;
    for (double v : values) {
        ExperimentConfig cfg = base;
        switch (param) {
        case SweepParam::Lambda:
            if (v < 0.0 || v > 1.0) throw std::invalid_argument("lambda out of [0,1]");
            cfg.lambda = v;
            break;
        case SweepParam::Tau:
            if (v <= 0.0) throw std::invalid_argument("nonpositive temperature");
            cfg.tau = v;
            break;
        case SweepParam::Dim:
            if (v < 2.0 || v != std::floor(v))
                throw std::invalid_argument("dim values must be integers >= 2");
            cfg.proj_dim = (int)v;
            break;
        }
        cfg.out_dir = base.out_dir + "/sweep_" + param_name(param) + "_" + short_value(v);
        configs.push_back(std::move(cfg));
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(values.size());
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) break;
            try {
                result.runs[i] = run_experiment(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::size_t nthreads = std::max<std::size_t>(1, std::min(workers, values.size()));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    fs::create_directories(base.out_dir);
    std::ofstream out(base.out_dir + "/sweep_" + param_name(param) + ".csv",
                      std::ios::binary);
    if (!out) throw IoError("cannot write sweep CSV");
    out << sweep_csv(result);
    return result;
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "# schema: dimcl-sweep-v1\n";
    out << "param,param_value,metric,epoch,value\n";
    const std::string name = param_name(result.param);
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        for (const EpochRow& r : result.runs[i].rows) {
            auto emit = [&](const char* metric, const std::optional<double>& v) {
                if (v)
                    out << name << ',' << fmt(result.values[i]) << ',' << metric << ','
                        << r.epoch << ',' << fmt(*v) << '\n';
            };
            emit("base_loss", r.base_loss);
            emit("dimcl_loss", r.dimcl_loss);
            emit("total_loss", r.total_loss);
            emit("feature_diversity", r.feature_diversity);
            emit("probe_acc", r.probe_acc);
            emit("knn_acc", r.knn_acc);
        }
    }
    return out.str();
}

} // namespace dimcl
