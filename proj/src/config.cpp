#include "dimcl/errors.hpp"
#include "dimcl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dimcl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("bad numeric value for key '" + key + "': " + v);
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::invalid_argument("bad integer value for key '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("bad boolean value for key '" + key + "': " + v);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void validate(const ExperimentConfig& c) {
    if (c.dataset != "synth" && c.dataset != "cifar10" && c.dataset != "cifar100" &&
        c.dataset != "synth_file")
        throw std::invalid_argument("dataset must be synth|cifar10|cifar100|synth_file");
    if (c.lambda < 0.0 || c.lambda > 1.0) throw std::invalid_argument("lambda out of [0,1]");
    if (c.tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (c.tau_base <= 0.0) throw std::invalid_argument("tau_base must be positive");
    if (c.ema_momentum < 0.0 || c.ema_momentum >= 1.0)
        throw std::invalid_argument("ema_momentum out of [0,1)");
    if (c.batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (c.proj_dim < 2) throw std::invalid_argument("proj_dim must be >= 2");
    if (c.lr < 0.0) throw std::invalid_argument("lr must be >= 0");
    if (c.sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
    if (c.eval_holdout <= 0.0 || c.eval_holdout >= 1.0)
        throw std::invalid_argument("eval_holdout out of (0,1)");
    if (c.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (c.loss_variant != "dimcl" && c.loss_variant != "abscl")
        throw std::invalid_argument("loss_variant must be dimcl|abscl");
    if (c.base_loss != "framework" && c.base_loss != "cross_entropy")
        throw std::invalid_argument("base_loss must be framework|cross_entropy");
    if (c.precision != "float64" && c.precision != "float32")
        throw std::invalid_argument("precision must be float64|float32");
    if (c.knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
    framework_from_string(c.framework);
    c.augment.validate();
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
        {"data_path", [](auto& c, auto&, auto& v) { c.data_path = v; }},
        {"classes", [](auto& c, auto& k, auto& v) { c.classes = (int)parse_int(k, v); }},
        {"input_dim", [](auto& c, auto& k, auto& v) { c.input_dim = (int)parse_int(k, v); }},
        {"per_class", [](auto& c, auto& k, auto& v) { c.per_class = (int)parse_int(k, v); }},
        {"sigma", [](auto& c, auto& k, auto& v) { c.sigma = parse_double(k, v); }},
        {"max_examples", [](auto& c, auto& k, auto& v) { c.max_examples = (std::size_t)parse_int(k, v); }},
        {"eval_holdout", [](auto& c, auto& k, auto& v) { c.eval_holdout = parse_double(k, v); }},
        {"framework", [](auto& c, auto&, auto& v) { c.framework = v; }},
        {"loss_variant", [](auto& c, auto&, auto& v) { c.loss_variant = v; }},
        {"base_loss", [](auto& c, auto&, auto& v) { c.base_loss = v; }},
        {"proj_dim", [](auto& c, auto& k, auto& v) { c.proj_dim = (int)parse_int(k, v); }},
        {"lambda", [](auto& c, auto& k, auto& v) { c.lambda = parse_double(k, v); }},
        {"tau", [](auto& c, auto& k, auto& v) { c.tau = parse_double(k, v); }},
        {"tau_base", [](auto& c, auto& k, auto& v) { c.tau_base = parse_double(k, v); }},
        {"ema_momentum", [](auto& c, auto& k, auto& v) { c.ema_momentum = parse_double(k, v); }},
        {"center_columns", [](auto& c, auto& k, auto& v) { c.center_columns = parse_bool(k, v); }},
        {"dimcl_on_predictor", [](auto& c, auto& k, auto& v) { c.dimcl_on_predictor = parse_bool(k, v); }},
        {"epochs", [](auto& c, auto& k, auto& v) { c.epochs = (std::size_t)parse_int(k, v); }},
        {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = (std::size_t)parse_int(k, v); }},
        {"lr", [](auto& c, auto& k, auto& v) { c.lr = parse_double(k, v); }},
        {"warmup_epochs", [](auto& c, auto& k, auto& v) { c.warmup_epochs = (std::size_t)parse_int(k, v); }},
        {"weight_decay", [](auto& c, auto& k, auto& v) { c.weight_decay = parse_double(k, v); }},
        {"precision", [](auto& c, auto&, auto& v) { c.precision = v; }},
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = (std::uint64_t)parse_int(k, v); }},
        {"crop_scale_min", [](auto& c, auto& k, auto& v) { c.augment.crop_scale_min = parse_double(k, v); }},
        {"crop_scale_max", [](auto& c, auto& k, auto& v) { c.augment.crop_scale_max = parse_double(k, v); }},
        {"flip_prob", [](auto& c, auto& k, auto& v) { c.augment.flip_prob = parse_double(k, v); }},
        {"brightness", [](auto& c, auto& k, auto& v) { c.augment.brightness = parse_double(k, v); }},
        {"contrast", [](auto& c, auto& k, auto& v) { c.augment.contrast = parse_double(k, v); }},
        {"saturation", [](auto& c, auto& k, auto& v) { c.augment.saturation = parse_double(k, v); }},
        {"hue", [](auto& c, auto& k, auto& v) { c.augment.hue = parse_double(k, v); }},
        {"grayscale_prob", [](auto& c, auto& k, auto& v) { c.augment.grayscale_prob = parse_double(k, v); }},
        {"blur_prob", [](auto& c, auto& k, auto& v) { c.augment.blur_prob = parse_double(k, v); }},
        {"solarize_prob", [](auto& c, auto& k, auto& v) { c.augment.solarize_prob = parse_double(k, v); }},
        {"solarize_threshold", [](auto& c, auto& k, auto& v) { c.augment.solarize_threshold = parse_double(k, v); }},
        {"feature_noise_sigma", [](auto& c, auto& k, auto& v) { c.augment.feature_noise_sigma = parse_double(k, v); }},
        {"eval_every", [](auto& c, auto& k, auto& v) { c.eval_every = (std::size_t)parse_int(k, v); }},
        {"probe_epochs", [](auto& c, auto& k, auto& v) { c.probe_epochs = (std::size_t)parse_int(k, v); }},
        {"probe_lr", [](auto& c, auto& k, auto& v) { c.probe_lr = parse_double(k, v); }},
        {"knn_k", [](auto& c, auto& k, auto& v) { c.knn_k = (std::size_t)parse_int(k, v); }},
        {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
    };
    return table;
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("malformed config line " + std::to_string(line_no) +
                                        ": missing '='");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("malformed config line " + std::to_string(line_no));
        auto it = setters().find(key);
        if (it == setters().end())
            throw std::invalid_argument("unknown config key '" + key + "' on line " +
                                        std::to_string(line_no));
        it->second(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "dataset = " << c.dataset << "\n";
    if (!c.data_path.empty()) out << "data_path = " << c.data_path << "\n";
    out << "classes = " << c.classes << "\n"
        << "input_dim = " << c.input_dim << "\n"
        << "per_class = " << c.per_class << "\n"
        << "sigma = " << fmt_double(c.sigma) << "\n"
        << "max_examples = " << c.max_examples << "\n"
        << "eval_holdout = " << fmt_double(c.eval_holdout) << "\n"
        << "framework = " << c.framework << "\n"
        << "loss_variant = " << c.loss_variant << "\n"
        << "base_loss = " << c.base_loss << "\n"
        << "proj_dim = " << c.proj_dim << "\n"
        << "lambda = " << fmt_double(c.lambda) << "\n"
        << "tau = " << fmt_double(c.tau) << "\n"
        << "tau_base = " << fmt_double(c.tau_base) << "\n"
        << "ema_momentum = " << fmt_double(c.ema_momentum) << "\n"
        << "center_columns = " << (c.center_columns ? "true" : "false") << "\n"
        << "dimcl_on_predictor = " << (c.dimcl_on_predictor ? "true" : "false") << "\n"
        << "epochs = " << c.epochs << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "lr = " << fmt_double(c.lr) << "\n"
        << "warmup_epochs = " << c.warmup_epochs << "\n"
        << "weight_decay = " << fmt_double(c.weight_decay) << "\n"
        << "precision = " << c.precision << "\n"
        << "seed = " << c.seed << "\n"
        << "crop_scale_min = " << fmt_double(c.augment.crop_scale_min) << "\n"
        << "crop_scale_max = " << fmt_double(c.augment.crop_scale_max) << "\n"
        << "flip_prob = " << fmt_double(c.augment.flip_prob) << "\n"
        << "brightness = " << fmt_double(c.augment.brightness) << "\n"
        << "contrast = " << fmt_double(c.augment.contrast) << "\n"
        << "saturation = " << fmt_double(c.augment.saturation) << "\n"
        << "hue = " << fmt_double(c.augment.hue) << "\n"
        << "grayscale_prob = " << fmt_double(c.augment.grayscale_prob) << "\n"
        << "blur_prob = " << fmt_double(c.augment.blur_prob) << "\n"
        << "solarize_prob = " << fmt_double(c.augment.solarize_prob) << "\n"
        << "solarize_threshold = " << fmt_double(c.augment.solarize_threshold) << "\n"
        << "feature_noise_sigma = " << fmt_double(c.augment.feature_noise_sigma) << "\n"
        << "eval_every = " << c.eval_every << "\n"
        << "probe_epochs = " << c.probe_epochs << "\n"
        << "probe_lr = " << fmt_double(c.probe_lr) << "\n"
        << "knn_k = " << c.knn_k << "\n"
        << "out_dir = " << c.out_dir << "\n";
    return out.str();
}

FrameworkConfig ExperimentConfig::framework_config(const Dataset& ds) const {
    FrameworkConfig fc;
    fc.kind = framework_from_string(framework);
    fc.encoder.image = ds.kind == DatasetKind::Image;
    if (fc.encoder.image) {
        fc.encoder.height = ds.height;
        fc.encoder.width = ds.width;
        fc.encoder.channels = ds.channels;
    } else {
        fc.encoder.input_dim = ds.feature_dim;
    }
    fc.encoder.proj_dim = proj_dim;
    fc.mix.lambda = lambda;
    fc.mix.tau = tau;
    fc.tau_base = tau_base;
    fc.ema_momentum = ema_momentum;
    fc.abs_negatives = loss_variant == "abscl";
    fc.center_columns = center_columns;
    fc.dimcl_on_predictor = dimcl_on_predictor;
    fc.base_loss = base_loss == "cross_entropy" ? BaseLossKind::CrossEntropy
                                                : BaseLossKind::Framework;
    fc.num_classes = ds.num_classes;
    fc.math = precision == "float32" ? MathMode::Float32 : MathMode::Float64;
    fc.weight_decay = weight_decay;
    return fc;
}

} // namespace dimcl
