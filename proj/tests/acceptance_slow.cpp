// Slow acceptance check: the small-image directional benchmark.
// BYOL with the dimensional regularizer (lambda = 0.1) must match or beat
// the plain BYOL baseline on KNN top-1, averaged over three seeds.
//
// The image set is generated locally in CIFAR-10 binary format: ten classes
// of oriented sinusoidal gratings with class-specific color weights, random
// phase and pixel noise. Class identity survives crops and flips, so the
// self-supervised pipeline has real structure to learn. This stands in for
// a CIFAR-10 subset because the build environment has no dataset mirror.

#include "dimcl/config.hpp"
#include "dimcl/data.hpp"
#include "dimcl/rng.hpp"
#include "dimcl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace dimcl;
namespace fs = std::filesystem;

namespace {

constexpr int kExamples = 5000;
constexpr int kClasses = 10;

std::vector<std::uint8_t> grating_dataset(std::uint64_t seed) {
    // orientation/frequency pairs, one per class
    static const int freq[kClasses][2] = {{1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2},
                                          {2, 1}, {1, 2}, {2, 2}, {3, 1}, {1, 3}};
    // per-class RGB weights so color carries a secondary cue
    static const double color[kClasses][3] = {
        {1.0, 0.3, 0.3}, {0.3, 1.0, 0.3}, {0.3, 0.3, 1.0}, {1.0, 1.0, 0.3},
        {0.3, 1.0, 1.0}, {1.0, 0.3, 1.0}, {1.0, 0.7, 0.4}, {0.4, 0.7, 1.0},
        {0.8, 0.8, 0.8}, {0.6, 1.0, 0.6}};

    Rng rng(seed);
    std::vector<std::uint8_t> bytes;
    bytes.reserve((std::size_t)kExamples * 3073);
    const double tau = 2.0 * 3.14159265358979323846;
    for (int i = 0; i < kExamples; ++i) {
        int c = i % kClasses;
        bytes.push_back((std::uint8_t)c);
        double phase = tau * rng.uniform();
        double fx = freq[c][0] + 0.25 * rng.normal();
        double fy = freq[c][1] + 0.25 * rng.normal();
        double amp = 0.10 + 0.08 * rng.uniform();
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    double wave = std::sin(tau * (fx * x + fy * y) / 32.0 + phase);
                    double v = 0.5 + amp * color[c][ch] * wave + 0.10 * rng.normal();
                    v = std::min(1.0, std::max(0.0, v));
                    bytes.push_back((std::uint8_t)std::lround(v * 255.0));
                }
    }
    return bytes;
}

ExperimentConfig image_config(const std::string& data_path,
                              const std::string& out_dir, std::uint64_t seed,
                              double lambda) {
    ExperimentConfig cfg = parse_config(
        "dataset = cifar10\n"
        "framework = byol\n"
        "tau = 0.1\n"
        "epochs = 50\n"
        "batch_size = 256\n"
        "precision = float32\n"
        "eval_every = 0\n"
        "probe_epochs = 10\n"
        "knn_k = 20\n");
    cfg.data_path = data_path;
    cfg.lambda = lambda;
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

int main() {
    fs::path root = fs::temp_directory_path() / "dimcl_acceptance_slow";
    fs::remove_all(root);
    fs::create_directories(root);

    fs::path data = root / "gratings.bin";
    {
        std::vector<std::uint8_t> bytes = grating_dataset(2026);
        std::ofstream out(data, std::ios::binary);
        out.write((const char*)bytes.data(), (std::streamsize)bytes.size());
    }

    auto t0 = std::chrono::steady_clock::now();
    double delta_sum = 0.0;
    std::printf("seed  knn(lambda=0.1)  knn(lambda=0)  delta\n");
    for (std::uint64_t seed : {1, 2, 3}) {
        auto run = [&](double lambda) {
            std::string dir =
                (root / ("s" + std::to_string(seed) + "_l" +
                         (lambda > 0.0 ? std::string("01") : std::string("0"))))
                    .string();
            RunReport rep = run_experiment(image_config(data.string(), dir, seed, lambda));
            return *rep.final_metric("knn_acc");
        };
        double with = run(0.1);
        double without = run(0.0);
        delta_sum += with - without;
        std::printf("%4llu  %15.2f  %13.2f  %+.2f\n", (unsigned long long)seed,
                    with, without, with - without);
        std::fflush(stdout);
    }
    double mean_delta = delta_sum / 3.0;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();

    bool pass = mean_delta >= 0.0 && secs < 3600.0;
    std::printf("criterion  8: image benchmark knn delta            %s  -- mean %+.2f pts, %.0f s\n",
                pass ? "PASS" : "FAIL", mean_delta, secs);

    fs::remove_all(root);
    return pass ? 0 : 1;
}
