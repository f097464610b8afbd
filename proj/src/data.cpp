#include "dimcl/errors.hpp"
#include "dimcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace dimcl {

namespace {
constexpr int kCifarPixels = 32 * 32 * 3;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void parse_cifar_bytes(const std::vector<std::uint8_t>& bytes, CifarVariant variant,
                       const std::string& origin, Dataset& ds) {
    const std::size_t label_bytes = variant == CifarVariant::Cifar10 ? 1 : 2;
    const std::size_t record = label_bytes + kCifarPixels;
    if (bytes.size() % record != 0)
        throw IoError("truncated CIFAR file " + origin + ": " +
                                 std::to_string(bytes.size()) + " bytes, partial record at byte offset " +
                                 std::to_string(bytes.size() - bytes.size() % record));
    const int max_label = variant == CifarVariant::Cifar10 ? 9 : 99;
    for (std::size_t off = 0; off < bytes.size(); off += record) {
        Example ex;
        if (variant == CifarVariant::Cifar100) {
            std::uint8_t coarse = bytes[off];
            if (coarse > 19)
                throw IoError("coarse label byte out of range at offset " +
                                         std::to_string(off) + " in " + origin);
            ds.coarse_labels.push_back(coarse);
            ex.label = bytes[off + 1]; // fine label
        } else {
            ex.label = bytes[off];
        }
        if (ex.label > max_label)
            throw IoError("label byte out of range at offset " +
                                     std::to_string(off) + " in " + origin);
        ex.values.resize(kCifarPixels);
        const std::uint8_t* px = bytes.data() + off + label_bytes;
        for (int t = 0; t < kCifarPixels; ++t) ex.values[t] = px[t] / 255.0;
        ds.examples.push_back(std::move(ex));
    }
}
} // namespace

Dataset load_cifar(const std::string& path, CifarVariant variant) {
    Dataset ds;
    ds.kind = DatasetKind::Image;
    ds.height = 32; ds.width = 32; ds.channels = 3;
    ds.num_classes = variant == CifarVariant::Cifar10 ? 10 : 100;

    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.path().extension() == ".bin") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no .bin files in " + path);
    } else {
        files.push_back(path);
    }
    for (const auto& f : files) parse_cifar_bytes(read_file(f), variant, f, ds);
    return ds;
}

std::vector<std::uint8_t> serialize_cifar(const Dataset& ds, CifarVariant variant) {
    if (ds.kind != DatasetKind::Image || ds.example_dim() != (std::size_t)kCifarPixels)
        throw std::invalid_argument("serialize_cifar: not a 32x32x3 image dataset");
    if (variant == CifarVariant::Cifar100 && ds.coarse_labels.size() != ds.size())
        throw std::invalid_argument("serialize_cifar: missing coarse labels");
    std::vector<std::uint8_t> out;
    out.reserve(ds.size() * (kCifarPixels + 2));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (variant == CifarVariant::Cifar100) out.push_back(ds.coarse_labels[i]);
        out.push_back((std::uint8_t)ds.examples[i].label);
        for (double v : ds.examples[i].values)
            out.push_back((std::uint8_t)std::lround(v * 255.0));
    }
    return out;
}

Dataset synth_clusters(int classes, int dim, int per_class, double sigma,
                       std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synth_clusters: classes must be >= 2");
    if (sigma <= 0.0) throw std::invalid_argument("synth_clusters: sigma must be positive");
    if (dim < 1 || per_class < 1)
        throw std::invalid_argument("synth_clusters: bad dim/per_class");

    Rng rng(seed);
    Rng center_rng = rng.split(1);
    Rng noise_rng = rng.split(2);

    std::vector<std::vector<double>> centers;
    std::size_t attempts = 0;
    while ((int)centers.size() < classes) {
        if (++attempts > 100000) throw std::runtime_error("cannot separate centers");
        std::vector<double> c(dim);
        double norm = 0.0;
        for (double& v : c) { v = center_rng.normal(); norm += v * v; }
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (double& v : c) v /= norm;
        bool ok = true;
        for (const auto& prev : centers) {
            double d2 = 0.0;
            for (int t = 0; t < dim; ++t) d2 += (c[t] - prev[t]) * (c[t] - prev[t]);
            if (std::sqrt(d2) < 0.5) { ok = false; break; }
        }
        if (ok) centers.push_back(std::move(c));
    }

    Dataset ds;
    ds.kind = DatasetKind::Feature;
    ds.feature_dim = dim;
    ds.num_classes = classes;
    for (int cls = 0; cls < classes; ++cls)
        for (int e = 0; e < per_class; ++e) {
            Example ex;
            ex.label = cls;
            ex.values.resize(dim);
            for (int t = 0; t < dim; ++t)
                ex.values[t] = centers[cls][t] + sigma * noise_rng.normal();
            ds.examples.push_back(std::move(ex));
        }
    return ds;
}

namespace {
void put_i32(std::ostream& out, std::int32_t v) {
    char b[4] = {(char)(v & 0xFF), (char)((v >> 8) & 0xFF),
                 (char)((v >> 16) & 0xFF), (char)((v >> 24) & 0xFF)};
    out.write(b, 4);
}

std::int32_t get_i32(std::istream& in) {
    unsigned char b[4];
    if (!in.read((char*)b, 4)) throw IoError("truncated synth file");
    return (std::int32_t)(b[0] | (b[1] << 8) | (b[2] << 16) | ((std::uint32_t)b[3] << 24));
}
} // namespace

void save_synth(const Dataset& ds, const std::string& path) {
    if (ds.kind != DatasetKind::Feature)
        throw std::invalid_argument("save_synth: not a feature dataset");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out.write("DCLSYN1", 7);
    put_i32(out, (std::int32_t)ds.size());
    put_i32(out, ds.feature_dim);
    for (const Example& ex : ds.examples)
        for (double v : ex.values) {
            float f = (float)v;
            char b[4];
            std::memcpy(b, &f, 4);
            out.write(b, 4);
        }
    for (const Example& ex : ds.examples) put_i32(out, ex.label);
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_synth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    char magic[7];
    if (!in.read(magic, 7) || std::memcmp(magic, "DCLSYN1", 7) != 0)
        throw IoError("bad magic in " + path);
    std::int32_t count = get_i32(in);
    std::int32_t dim = get_i32(in);
    if (count < 0 || dim <= 0) throw IoError("bad header in " + path);

    Dataset ds;
    ds.kind = DatasetKind::Feature;
    ds.feature_dim = dim;
    ds.examples.resize(count);
    for (Example& ex : ds.examples) {
        ex.values.resize(dim);
        for (int t = 0; t < dim; ++t) {
            char b[4];
            if (!in.read(b, 4)) throw IoError("truncated synth file " + path);
            float f;
            std::memcpy(&f, b, 4);
            ex.values[t] = f;
        }
    }
    int max_label = 0;
    for (Example& ex : ds.examples) {
        ex.label = get_i32(in);
        if (ex.label < 0) throw IoError("negative label in " + path);
        max_label = std::max(max_label, ex.label);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

} // namespace dimcl
