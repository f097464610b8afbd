#ifndef DIMCL_KERNELS_HPP
#define DIMCL_KERNELS_HPP

#include "dimcl/matrix.hpp"

namespace dimcl {

// Production matrix product. BLAS dgemm under the hood.
Matrix matmul(const Matrix& a, const Matrix& b);

// Single-precision compute path for the heavy convolution GEMMs.
// Operands are converted to float, multiplied with sgemm and widened back.
Matrix matmul_f32(const Matrix& a, const Matrix& b);

// OpenMP-parallel elementwise kernels used on large activation buffers.
namespace par {
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x); // y += alpha*x
void relu_inplace(Matrix& a);
void relu_backward_inplace(Matrix& grad, const Matrix& value);
Matrix l2_normalize(const Matrix& m, Axis axis, double eps);
} // namespace par

// Plain serial reference implementations. Kept for correctness tests and
// for the kernel benchmark; never called on the training path.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix l2_normalize(const Matrix& m, Axis axis, double eps);
std::vector<double> softmax(const std::vector<double>& v, double tau);
} // namespace serial

} // namespace dimcl

#endif
