#include "dimcl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dimcl {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols())
            throw std::invalid_argument("ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            t(j, i) = m(i, j);
    return t;
}

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.raw()[i] += b.raw()[i];
    return r;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.raw()[i] -= b.raw()[i];
    return r;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.raw()[i] *= b.raw()[i];
    return r;
}

Matrix scale(const Matrix& a, double s) {
    Matrix r = a;
    for (double& v : r.raw()) v *= s;
    return r;
}

double sum(const Matrix& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v;
    return s;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

bool all_finite(const Matrix& a) {
    for (double v : a.raw())
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Matrix& a, const char* what) {
    if (!all_finite(a))
        throw std::runtime_error(std::string(what) + ": non-finite entries");
}

Matrix l2_normalize(const Matrix& m, Axis axis, double eps) {
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("empty matrix");
    if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
    Matrix r = m;
    if (axis == Axis::Rows) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
            double norm = std::sqrt(s);
            double inv = 1.0 / (norm < eps ? eps : norm);
            for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j) * inv;
        }
    } else {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
            double norm = std::sqrt(s);
            double inv = 1.0 / (norm < eps ? eps : norm);
            for (std::size_t i = 0; i < m.rows(); ++i) r(i, j) = m(i, j) * inv;
        }
    }
    return r;
}

double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> stable_softmax(const std::vector<double>& v, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("nonpositive temperature");
    std::vector<double> out(v.size());
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x / tau);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] / tau - m);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

} // namespace dimcl
