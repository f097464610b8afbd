#include "dimcl/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <dlfcn.h>
#include <stdexcept>

namespace dimcl {

namespace {

// row-major, no transposition (cblas enum values)
constexpr int kRowMajor = 101;
constexpr int kNoTrans = 111;

using DgemmFn = void (*)(int, int, int, int, int, int, double, const double*,
                         int, const double*, int, double, double*, int);
using SgemmFn = void (*)(int, int, int, int, int, int, float, const float*,
                         int, const float*, int, float, float*, int);

// OpenBLAS picks its kernels at load time from the cpuid model table; on
// virtualized CPUs with an unlisted model it silently falls back to a
// generic SSE2 kernel, an order of magnitude slower than what the machine
// supports. Loading lazily lets us pin the core type from the feature bits
// before its initializer runs. A user-provided OPENBLAS_CORETYPE wins.
struct Blas {
    DgemmFn dgemm = nullptr;
    SgemmFn sgemm = nullptr;

    Blas() {
        if (!std::getenv("OPENBLAS_CORETYPE")) {
            const char* core = nullptr;
            if (__builtin_cpu_supports("avx512f")) core = "SKYLAKEX";
            else if (__builtin_cpu_supports("avx2")) core = "HASWELL";
            else if (__builtin_cpu_supports("avx")) core = "SANDYBRIDGE";
            if (core) setenv("OPENBLAS_CORETYPE", core, 1);
        }
        void* handle = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
        if (!handle) handle = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
        if (!handle)
            throw std::runtime_error("cannot load libopenblas");
        dgemm = (DgemmFn)dlsym(handle, "cblas_dgemm");
        sgemm = (SgemmFn)dlsym(handle, "cblas_sgemm");
        if (!dgemm || !sgemm)
            throw std::runtime_error("libopenblas is missing cblas_dgemm/cblas_sgemm");
    }
};

const Blas& blas() {
    static const Blas b;
    return b;
}

} // namespace

static void check_mm(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_mm(a, b);
    Matrix c(a.rows(), b.cols());
    if (c.size() == 0) return c;
    blas().dgemm(kRowMajor, kNoTrans, kNoTrans,
                 (int)a.rows(), (int)b.cols(), (int)a.cols(),
                 1.0, a.data(), (int)a.cols(), b.data(), (int)b.cols(),
                 0.0, c.data(), (int)c.cols());
    return c;
}

Matrix matmul_f32(const Matrix& a, const Matrix& b) {
    check_mm(a, b);
    Matrix c(a.rows(), b.cols());
    if (c.size() == 0) return c;
    std::vector<float> fa(a.size()), fb(b.size()), fc(c.size());
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)a.size(); ++i) fa[i] = (float)a.raw()[i];
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)b.size(); ++i) fb[i] = (float)b.raw()[i];
    blas().sgemm(kRowMajor, kNoTrans, kNoTrans,
                 (int)a.rows(), (int)b.cols(), (int)a.cols(),
                 1.0f, fa.data(), (int)a.cols(), fb.data(), (int)b.cols(),
                 0.0f, fc.data(), (int)c.cols());
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)c.size(); ++i) c.raw()[i] = (double)fc[i];
    return c;
}

namespace par {

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)a.size(); ++i) a.raw()[i] += b.raw()[i];
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
    if (!y.same_shape(x)) throw std::invalid_argument("axpy: shape mismatch");
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)y.size(); ++i) y.raw()[i] += alpha * x.raw()[i];
}

void relu_inplace(Matrix& a) {
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)a.size(); ++i)
        if (a.raw()[i] < 0.0) a.raw()[i] = 0.0;
}

void relu_backward_inplace(Matrix& grad, const Matrix& value) {
    #pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)grad.size(); ++i)
        if (value.raw()[i] <= 0.0) grad.raw()[i] = 0.0;
}

Matrix l2_normalize(const Matrix& m, Axis axis, double eps) {
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("empty matrix");
    Matrix r(m.rows(), m.cols());
    if (axis == Axis::Rows) {
        #pragma omp parallel for schedule(static)
        for (long i = 0; i < (long)m.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
            double norm = std::sqrt(s);
            double inv = 1.0 / (norm < eps ? eps : norm);
            for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j) * inv;
        }
    } else {
        #pragma omp parallel for schedule(static)
        for (long j = 0; j < (long)m.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
            double norm = std::sqrt(s);
            double inv = 1.0 / (norm < eps ? eps : norm);
            for (std::size_t i = 0; i < m.rows(); ++i) r(i, j) = m(i, j) * inv;
        }
    }
    return r;
}

} // namespace par

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_mm(a, b);
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double av = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += av * b(k, j);
        }
    return c;
}

Matrix l2_normalize(const Matrix& m, Axis axis, double eps) {
    return dimcl::l2_normalize(m, axis, eps);
}

std::vector<double> softmax(const std::vector<double>& v, double tau) {
    // naive, no max subtraction; only valid on small inputs
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] / tau);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

} // namespace serial
} // namespace dimcl
