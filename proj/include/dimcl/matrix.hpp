#ifndef DIMCL_MATRIX_HPP
#define DIMCL_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace dimcl {

enum class Axis { Rows, Cols };

// Dense row-major matrix of doubles. The workhorse container for
// representations, parameters and gradients.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool operator==(const Matrix& other) const {
        return same_shape(other) && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Elementwise / structural helpers (parallel kernels live in kernels.hpp).
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
double sum(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);
void require_finite(const Matrix& a, const char* what);

// Unit-normalizes every vector along the chosen axis. Vectors with norm
// below eps are scaled by 1/eps instead of erroring.
Matrix l2_normalize(const Matrix& m, Axis axis, double eps = 1e-12);

// Max-subtracted softmax of v/tau.
std::vector<double> stable_softmax(const std::vector<double>& v, double tau);

// log(sum(exp(v))) with max subtraction.
double log_sum_exp(const std::vector<double>& v);

} // namespace dimcl

#endif
