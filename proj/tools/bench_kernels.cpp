// Compares the serial reference kernels against the production (BLAS /
// OpenMP) paths: throughput plus max abs deviation on identical inputs.

#include "dimcl/kernels.hpp"
#include "dimcl/matrix.hpp"
#include "dimcl/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace dimcl;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
}

double time_of(const std::function<void()>& fn, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_s, double fast_s, double flops, double err) {
    std::printf("%-22s serial %8.3f ms   fast %8.3f ms   speedup %6.2fx", name,
                serial_s * 1e3, fast_s * 1e3, serial_s / fast_s);
    if (flops > 0) std::printf("   %7.2f GFLOP/s", flops / fast_s / 1e9);
    std::printf("   max dev %.3g\n", err);
}

} // namespace

int main() {
    Rng rng(7);

    for (std::size_t n : {256, 512, 1024}) {
        Matrix a = random_matrix(rng, n, n);
        Matrix b = random_matrix(rng, n, n);
        Matrix ref = serial::matmul(a, b);
        Matrix fast = matmul(a, b);
        double err = max_abs_diff(ref, fast);
        int reps = n >= 1024 ? 1 : 3;
        double ts = time_of([&] { serial::matmul(a, b); }, reps);
        double tf = time_of([&] { matmul(a, b); }, 10);
        char name[64];
        std::snprintf(name, sizeof name, "matmul %zux%zu", n, n);
        report(name, ts, tf, 2.0 * n * n * n, err);

        Matrix fast32 = matmul_f32(a, b);
        double tf32 = time_of([&] { matmul_f32(a, b); }, 10);
        std::snprintf(name, sizeof name, "matmul_f32 %zux%zu", n, n);
        report(name, ts, tf32, 2.0 * n * n * n, max_abs_diff(ref, fast32));
    }

    {
        Matrix m = random_matrix(rng, 4096, 256);
        Matrix ref = serial::l2_normalize(m, Axis::Rows, 1e-12);
        Matrix fast = par::l2_normalize(m, Axis::Rows, 1e-12);
        double ts = time_of([&] { serial::l2_normalize(m, Axis::Rows, 1e-12); }, 20);
        double tf = time_of([&] { par::l2_normalize(m, Axis::Rows, 1e-12); }, 20);
        report("l2_normalize rows", ts, tf, 0, max_abs_diff(ref, fast));
    }
    {
        Matrix m = random_matrix(rng, 4096, 256);
        Matrix ref = serial::l2_normalize(m, Axis::Cols, 1e-12);
        Matrix fast = par::l2_normalize(m, Axis::Cols, 1e-12);
        double ts = time_of([&] { serial::l2_normalize(m, Axis::Cols, 1e-12); }, 20);
        double tf = time_of([&] { par::l2_normalize(m, Axis::Cols, 1e-12); }, 20);
        report("l2_normalize cols", ts, tf, 0, max_abs_diff(ref, fast));
    }
    {
        Matrix a = random_matrix(rng, 4096, 512);
        Matrix b = random_matrix(rng, 4096, 512);
        Matrix s1 = a, s2 = a;
        double ts = time_of([&] {
            for (std::size_t i = 0; i < s1.rows() * s1.cols(); ++i)
                s1.raw()[i] += 0.5 * b.raw()[i];
        }, 20);
        double tf = time_of([&] { par::axpy_inplace(s2, 0.5, b); }, 20);
        report("axpy 4096x512", ts, tf, 0, 0.0);
    }
    return 0;
}
