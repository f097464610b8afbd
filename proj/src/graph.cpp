#include "dimcl/graph.hpp"
#include "dimcl/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dimcl {

namespace {
enum OpCode {
    OpLeaf, OpConst, OpMatMul, OpAdd, OpSub, OpMul, OpScale, OpAddScalar,
    OpRelu, OpAbs, OpTranspose, OpConcatCols, OpAddRow, OpL2Rows, OpL2Cols,
    OpLseRows, OpDiagPart, OpSumAll, OpMeanAll, OpDetach, OpBatchNorm,
    OpConv2d, OpGap, OpXent
};

// im2col for channel-major images stored one per row.
// cols is (N*oH*oW) x (C*k*k).
Matrix im2col(const Matrix& x, const Conv2dSpec& s) {
    const int n = (int)x.rows();
    const int oh = s.out_h(), ow = s.out_w();
    const int kk = s.in_channels * s.kernel * s.kernel;
    Matrix cols((std::size_t)n * oh * ow, kk);
    #pragma omp parallel for schedule(static)
    for (long img = 0; img < n; ++img) {
        const double* px = x.data() + (std::size_t)img * x.cols();
        for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
                double* row = cols.data() + (((std::size_t)img * oh + y) * ow + xo) * kk;
                int col = 0;
                for (int c = 0; c < s.in_channels; ++c)
                    for (int ky = 0; ky < s.kernel; ++ky) {
                        int iy = y * s.stride + ky - s.pad;
                        for (int kx = 0; kx < s.kernel; ++kx, ++col) {
                            int ix = xo * s.stride + kx - s.pad;
                            row[col] = (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w)
                                ? 0.0
                                : px[(c * s.in_h + iy) * s.in_w + ix];
                        }
                    }
            }
    }
    return cols;
}

// scatter-add of column gradients back onto the input image layout
void col2im_add(const Matrix& dcols, const Conv2dSpec& s, Matrix& dx) {
    const int n = (int)dx.rows();
    const int oh = s.out_h(), ow = s.out_w();
    const int kk = s.in_channels * s.kernel * s.kernel;
    #pragma omp parallel for schedule(static)
    for (long img = 0; img < n; ++img) {
        double* px = dx.data() + (std::size_t)img * dx.cols();
        for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
                const double* row = dcols.data() + (((std::size_t)img * oh + y) * ow + xo) * kk;
                int col = 0;
                for (int c = 0; c < s.in_channels; ++c)
                    for (int ky = 0; ky < s.kernel; ++ky) {
                        int iy = y * s.stride + ky - s.pad;
                        for (int kx = 0; kx < s.kernel; ++kx, ++col) {
                            int ix = xo * s.stride + kx - s.pad;
                            if (iy >= 0 && iy < s.in_h && ix >= 0 && ix < s.in_w)
                                px[(c * s.in_h + iy) * s.in_w + ix] += row[col];
                        }
                    }
            }
    }
}
} // namespace

Matrix Graph::mm(const Matrix& a, const Matrix& b) const {
    return mode_ == MathMode::Float32 ? matmul_f32(a, b) : dimcl::matmul(a, b);
}

NodeId Graph::push(Node&& n) {
    nodes_.push_back(std::move(n));
    return (NodeId)(nodes_.size() - 1);
}

const Matrix& Graph::value(NodeId id) const { return nodes_.at(id).value; }

const Matrix& Graph::grad(NodeId id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty())
        throw std::runtime_error("node has no gradient (backward not run or unreachable)");
    return n.grad;
}

NodeId Graph::leaf(const Matrix& v) {
    Node n; n.op = OpLeaf; n.value = v; n.requires_grad = true;
    return push(std::move(n));
}

NodeId Graph::constant(const Matrix& v) {
    Node n; n.op = OpConst; n.value = v;
    return push(std::move(n));
}

#define DIMCL_BINARY_PRELUDE(A, B) \
    Node n; n.a = (A); n.b = (B); \
    n.requires_grad = nodes_[A].requires_grad || nodes_[B].requires_grad;

#define DIMCL_UNARY_PRELUDE(A) \
    Node n; n.a = (A); n.requires_grad = nodes_[A].requires_grad;

NodeId Graph::matmul(NodeId a, NodeId b) {
    DIMCL_BINARY_PRELUDE(a, b)
    n.op = OpMatMul;
    n.value = mm(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    DIMCL_BINARY_PRELUDE(a, b)
    n.op = OpAdd;
    n.value = dimcl::add(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    DIMCL_BINARY_PRELUDE(a, b)
    n.op = OpSub;
    n.value = dimcl::sub(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    DIMCL_BINARY_PRELUDE(a, b)
    n.op = OpMul;
    n.value = hadamard(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double s) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpScale; n.scalar = s;
    n.value = dimcl::scale(nodes_[a].value, s);
    return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double s) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpAddScalar; n.scalar = s;
    n.value = nodes_[a].value;
    for (double& v : n.value.raw()) v += s;
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpRelu;
    n.value = nodes_[a].value;
    par::relu_inplace(n.value);
    return push(std::move(n));
}

NodeId Graph::abs(NodeId a) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpAbs;
    n.value = nodes_[a].value;
    for (double& v : n.value.raw()) v = std::abs(v);
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpTranspose;
    n.value = dimcl::transpose(nodes_[a].value);
    return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
    const Matrix& va = nodes_[a].value;
    const Matrix& vb = nodes_[b].value;
    if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    DIMCL_BINARY_PRELUDE(a, b)
    n.op = OpConcatCols;
    n.value = Matrix(va.rows(), va.cols() + vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        for (std::size_t j = 0; j < va.cols(); ++j) n.value(i, j) = va(i, j);
        for (std::size_t j = 0; j < vb.cols(); ++j) n.value(i, va.cols() + j) = vb(i, j);
    }
    return push(std::move(n));
}

NodeId Graph::add_row_broadcast(NodeId a, NodeId bias) {
    const Matrix& va = nodes_[a].value;
    const Matrix& vb = nodes_[bias].value;
    if (vb.rows() != 1 || vb.cols() != va.cols())
        throw std::invalid_argument("add_row_broadcast: bias must be 1 x cols");
    DIMCL_BINARY_PRELUDE(a, bias)
    n.op = OpAddRow;
    n.value = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j) n.value(i, j) += vb(0, j);
    return push(std::move(n));
}

NodeId Graph::l2_normalize(NodeId a, Axis axis, double eps) {
    const Matrix& v = nodes_[a].value;
    if (v.rows() == 0 || v.cols() == 0) throw std::invalid_argument("empty matrix");
    DIMCL_UNARY_PRELUDE(a)
    n.op = (axis == Axis::Rows) ? OpL2Rows : OpL2Cols;
    n.scalar = eps;
    std::size_t count = (axis == Axis::Rows) ? v.rows() : v.cols();
    n.aux = Matrix(1, count); // effective divisor per vector
    n.value = Matrix(v.rows(), v.cols());
    for (std::size_t k = 0; k < count; ++k) {
        double s = 0.0;
        std::size_t len = (axis == Axis::Rows) ? v.cols() : v.rows();
        for (std::size_t t = 0; t < len; ++t) {
            double x = (axis == Axis::Rows) ? v(k, t) : v(t, k);
            s += x * x;
        }
        double norm = std::sqrt(s);
        double div = norm < eps ? eps : norm;
        n.aux(0, k) = div;
        for (std::size_t t = 0; t < len; ++t) {
            if (axis == Axis::Rows) n.value(k, t) = v(k, t) / div;
            else n.value(t, k) = v(t, k) / div;
        }
    }
    return push(std::move(n));
}

NodeId Graph::log_sum_exp_rows(NodeId a) {
    const Matrix& v = nodes_[a].value;
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpLseRows;
    n.value = Matrix(v.rows(), 1);
    n.aux = Matrix(v.rows(), v.cols()); // row softmax, reused in backward
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < v.cols(); ++j) m = std::max(m, v(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < v.cols(); ++j) {
            n.aux(i, j) = std::exp(v(i, j) - m);
            s += n.aux(i, j);
        }
        n.value(i, 0) = m + std::log(s);
        for (std::size_t j = 0; j < v.cols(); ++j) n.aux(i, j) /= s;
    }
    return push(std::move(n));
}

NodeId Graph::diag_part(NodeId a) {
    const Matrix& v = nodes_[a].value;
    if (v.rows() != v.cols()) throw std::invalid_argument("diag_part: matrix not square");
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpDiagPart;
    n.value = Matrix(v.rows(), 1);
    for (std::size_t i = 0; i < v.rows(); ++i) n.value(i, 0) = v(i, i);
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpSumAll;
    n.value = Matrix(1, 1, dimcl::sum(nodes_[a].value));
    return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpMeanAll;
    n.value = Matrix(1, 1, dimcl::sum(nodes_[a].value) / (double)nodes_[a].value.size());
    return push(std::move(n));
}

NodeId Graph::detach(NodeId a) {
    Node n; n.a = a; n.op = OpDetach;
    n.value = nodes_[a].value;
    n.requires_grad = false;
    return push(std::move(n));
}

NodeId Graph::batch_norm(NodeId a, NodeId gamma, NodeId beta, int spatial, double eps) {
    const Matrix& x = nodes_[a].value;
    if (spatial < 1 || x.cols() % spatial != 0)
        throw std::invalid_argument("batch_norm: bad spatial factor");
    const std::size_t channels = x.cols() / spatial;
    const Matrix& g = nodes_[gamma].value;
    const Matrix& b = nodes_[beta].value;
    if (g.cols() != channels || b.cols() != channels || g.rows() != 1 || b.rows() != 1)
        throw std::invalid_argument("batch_norm: gamma/beta must be 1 x channels");

    Node n;
    n.a = a; n.b = gamma; n.c = beta;
    n.requires_grad = nodes_[a].requires_grad || nodes_[gamma].requires_grad ||
                      nodes_[beta].requires_grad;
    n.op = OpBatchNorm;
    n.scalar = eps;
    n.ispatial = spatial;
    n.aux = Matrix(2, channels); // row 0: mean, row 1: inverse std
    n.value = Matrix(x.rows(), x.cols());
    const double m = (double)(x.rows() * spatial);
    for (std::size_t c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (int t = 0; t < spatial; ++t) mean += x(i, c * spatial + t);
        mean /= m;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (int t = 0; t < spatial; ++t) {
                double d = x(i, c * spatial + t) - mean;
                var += d * d;
            }
        var /= m;
        double invstd = 1.0 / std::sqrt(var + eps);
        n.aux(0, c) = mean;
        n.aux(1, c) = invstd;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (int t = 0; t < spatial; ++t) {
                std::size_t j = c * spatial + t;
                n.value(i, j) = g(0, c) * (x(i, j) - mean) * invstd + b(0, c);
            }
    }
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId weight, NodeId bias, const Conv2dSpec& spec) {
    const Matrix& vx = nodes_[x].value;
    const Matrix& vw = nodes_[weight].value;
    const Matrix& vb = nodes_[bias].value;
    const int kk = spec.in_channels * spec.kernel * spec.kernel;
    if ((int)vx.cols() != spec.in_channels * spec.in_h * spec.in_w)
        throw std::invalid_argument("conv2d: input width mismatch");
    if ((int)vw.rows() != spec.out_channels || (int)vw.cols() != kk)
        throw std::invalid_argument("conv2d: weight shape mismatch");
    if (vb.rows() != 1 || (int)vb.cols() != spec.out_channels)
        throw std::invalid_argument("conv2d: bias shape mismatch");

    Node n;
    n.a = x; n.b = weight; n.c = bias;
    n.requires_grad = nodes_[x].requires_grad || nodes_[weight].requires_grad ||
                      nodes_[bias].requires_grad;
    n.op = OpConv2d;
    n.conv = spec;

    Matrix cols = im2col(vx, spec);
    Matrix out = mm(cols, dimcl::transpose(vw)); // (N*oH*oW) x outC
    const int oh = spec.out_h(), ow = spec.out_w();
    const std::size_t os = (std::size_t)oh * ow;
    n.value = Matrix(vx.rows(), (std::size_t)spec.out_channels * os);
    #pragma omp parallel for schedule(static)
    for (long img = 0; img < (long)vx.rows(); ++img)
        for (int c = 0; c < spec.out_channels; ++c)
            for (std::size_t p = 0; p < os; ++p)
                n.value(img, c * os + p) = out((std::size_t)img * os + p, c) + vb(0, c);
    return push(std::move(n));
}

NodeId Graph::global_avg_pool(NodeId a, int channels) {
    const Matrix& v = nodes_[a].value;
    if (channels < 1 || v.cols() % channels != 0)
        throw std::invalid_argument("global_avg_pool: bad channel count");
    const std::size_t spatial = v.cols() / channels;
    DIMCL_UNARY_PRELUDE(a)
    n.op = OpGap;
    n.ispatial = (int)spatial;
    n.value = Matrix(v.rows(), channels);
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (int c = 0; c < channels; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < spatial; ++t) s += v(i, c * spatial + t);
            n.value(i, c) = s / (double)spatial;
        }
    return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, const std::vector<int>& labels) {
    const Matrix& v = nodes_[logits].value;
    if (labels.size() != v.rows())
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    DIMCL_UNARY_PRELUDE(logits)
    n.op = OpXent;
    n.labels = labels;
    n.aux = Matrix(v.rows(), v.cols()); // probabilities
    double loss = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        if (labels[i] < 0 || (std::size_t)labels[i] >= v.cols())
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < v.cols(); ++j) m = std::max(m, v(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < v.cols(); ++j) {
            n.aux(i, j) = std::exp(v(i, j) - m);
            s += n.aux(i, j);
        }
        for (std::size_t j = 0; j < v.cols(); ++j) n.aux(i, j) /= s;
        loss -= std::log(n.aux(i, (std::size_t)labels[i]));
    }
    n.value = Matrix(1, 1, loss / (double)v.rows());
    return push(std::move(n));
}

void Graph::accumulate(NodeId id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad && n.op != OpLeaf) return;
    if (n.grad.empty()) n.grad = g;
    else par::add_inplace(n.grad, g);
}

void Graph::backward(NodeId output) {
    Node& out = nodes_.at(output);
    if (out.value.rows() != 1 || out.value.cols() != 1)
        throw std::invalid_argument("backward target is not scalar");
    for (Node& n : nodes_) n.grad = Matrix();
    out.grad = Matrix(1, 1, 1.0);
    for (NodeId id = output; id >= 0; --id) {
        if (nodes_[id].grad.empty() || !nodes_[id].requires_grad) continue;
        backward_node(id);
    }
}

void Graph::backward_node(NodeId id) {
    Node& n = nodes_[id];
    const Matrix& g = n.grad;
    auto rg = [&](NodeId x) { return x >= 0 && nodes_[x].requires_grad; };

    switch (n.op) {
    case OpLeaf:
    case OpConst:
    case OpDetach:
        break;
    case OpMatMul: {
        if (rg(n.a)) accumulate(n.a, mm(g, dimcl::transpose(nodes_[n.b].value)));
        if (rg(n.b)) accumulate(n.b, mm(dimcl::transpose(nodes_[n.a].value), g));
        break;
    }
    case OpAdd:
        if (rg(n.a)) accumulate(n.a, g);
        if (rg(n.b)) accumulate(n.b, g);
        break;
    case OpSub:
        if (rg(n.a)) accumulate(n.a, g);
        if (rg(n.b)) accumulate(n.b, dimcl::scale(g, -1.0));
        break;
    case OpMul:
        if (rg(n.a)) accumulate(n.a, hadamard(g, nodes_[n.b].value));
        if (rg(n.b)) accumulate(n.b, hadamard(g, nodes_[n.a].value));
        break;
    case OpScale:
        if (rg(n.a)) accumulate(n.a, dimcl::scale(g, n.scalar));
        break;
    case OpAddScalar:
        if (rg(n.a)) accumulate(n.a, g);
        break;
    case OpRelu: {
        if (rg(n.a)) {
            Matrix gx = g;
            par::relu_backward_inplace(gx, n.value);
            accumulate(n.a, gx);
        }
        break;
    }
    case OpAbs: {
        if (rg(n.a)) {
            Matrix gx = g;
            const Matrix& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < gx.size(); ++i) {
                double v = x.raw()[i];
                gx.raw()[i] *= (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            }
            accumulate(n.a, gx);
        }
        break;
    }
    case OpTranspose:
        if (rg(n.a)) accumulate(n.a, dimcl::transpose(g));
        break;
    case OpConcatCols: {
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        if (rg(n.a)) {
            Matrix ga(va.rows(), va.cols());
            for (std::size_t i = 0; i < va.rows(); ++i)
                for (std::size_t j = 0; j < va.cols(); ++j) ga(i, j) = g(i, j);
            accumulate(n.a, ga);
        }
        if (rg(n.b)) {
            Matrix gb(vb.rows(), vb.cols());
            for (std::size_t i = 0; i < vb.rows(); ++i)
                for (std::size_t j = 0; j < vb.cols(); ++j) gb(i, j) = g(i, va.cols() + j);
            accumulate(n.b, gb);
        }
        break;
    }
    case OpAddRow: {
        if (rg(n.a)) accumulate(n.a, g);
        if (rg(n.b)) {
            Matrix gb(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
            accumulate(n.b, gb);
        }
        break;
    }
    case OpL2Rows:
    case OpL2Cols: {
        if (!rg(n.a)) break;
        const bool rows = (n.op == OpL2Rows);
        const Matrix& y = n.value;
        Matrix gx(y.rows(), y.cols());
        std::size_t count = rows ? y.rows() : y.cols();
        std::size_t len = rows ? y.cols() : y.rows();
        for (std::size_t k = 0; k < count; ++k) {
            double div = n.aux(0, k);
            bool clipped = div <= n.scalar && div == n.scalar; // divisor hit eps
            double dot = 0.0;
            if (!clipped) {
                for (std::size_t t = 0; t < len; ++t) {
                    double yv = rows ? y(k, t) : y(t, k);
                    double gv = rows ? g(k, t) : g(t, k);
                    dot += yv * gv;
                }
            }
            for (std::size_t t = 0; t < len; ++t) {
                double yv = rows ? y(k, t) : y(t, k);
                double gv = rows ? g(k, t) : g(t, k);
                double r = clipped ? gv / div : (gv - yv * dot) / div;
                if (rows) gx(k, t) = r; else gx(t, k) = r;
            }
        }
        accumulate(n.a, gx);
        break;
    }
    case OpLseRows: {
        if (!rg(n.a)) break;
        Matrix gx = n.aux;
        for (std::size_t i = 0; i < gx.rows(); ++i)
            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) *= g(i, 0);
        accumulate(n.a, gx);
        break;
    }
    case OpDiagPart: {
        if (!rg(n.a)) break;
        const Matrix& v = nodes_[n.a].value;
        Matrix gx(v.rows(), v.cols());
        for (std::size_t i = 0; i < v.rows(); ++i) gx(i, i) = g(i, 0);
        accumulate(n.a, gx);
        break;
    }
    case OpSumAll: {
        if (!rg(n.a)) break;
        accumulate(n.a, Matrix(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
        break;
    }
    case OpMeanAll: {
        if (!rg(n.a)) break;
        const Matrix& v = nodes_[n.a].value;
        accumulate(n.a, Matrix(v.rows(), v.cols(), g(0, 0) / (double)v.size()));
        break;
    }
    case OpBatchNorm: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& gamma = nodes_[n.b].value;
        const int spatial = n.ispatial;
        const std::size_t channels = x.cols() / spatial;
        const double m = (double)(x.rows() * spatial);
        Matrix gx(x.rows(), x.cols());
        Matrix dgamma(1, channels), dbeta(1, channels);
        for (std::size_t c = 0; c < channels; ++c) {
            const double mean = n.aux(0, c), invstd = n.aux(1, c);
            double sum_g = 0.0, sum_gxh = 0.0;
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (int t = 0; t < spatial; ++t) {
                    std::size_t j = c * spatial + t;
                    double xhat = (x(i, j) - mean) * invstd;
                    sum_g += g(i, j);
                    sum_gxh += g(i, j) * xhat;
                }
            dgamma(0, c) = sum_gxh;
            dbeta(0, c) = sum_g;
            if (rg(n.a)) {
                const double gm = gamma(0, c);
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (int t = 0; t < spatial; ++t) {
                        std::size_t j = c * spatial + t;
                        double xhat = (x(i, j) - mean) * invstd;
                        gx(i, j) = gm * invstd / m * (m * g(i, j) - sum_g - xhat * sum_gxh);
                    }
            }
        }
        if (rg(n.a)) accumulate(n.a, gx);
        if (rg(n.b)) accumulate(n.b, dgamma);
        if (rg(n.c)) accumulate(n.c, dbeta);
        break;
    }
    case OpConv2d: {
        const Conv2dSpec& s = n.conv;
        const Matrix& x = nodes_[n.a].value;
        const Matrix& w = nodes_[n.b].value;
        const int oh = s.out_h(), ow = s.out_w();
        const std::size_t os = (std::size_t)oh * ow;
        // gradient in GEMM layout: (N*oH*oW) x outC
        Matrix gout((std::size_t)x.rows() * os, s.out_channels);
        #pragma omp parallel for schedule(static)
        for (long img = 0; img < (long)x.rows(); ++img)
            for (int c = 0; c < s.out_channels; ++c)
                for (std::size_t p = 0; p < os; ++p)
                    gout((std::size_t)img * os + p, c) = g(img, c * os + p);
        if (rg(n.c)) {
            Matrix gb(1, s.out_channels);
            for (std::size_t r = 0; r < gout.rows(); ++r)
                for (int c = 0; c < s.out_channels; ++c) gb(0, c) += gout(r, c);
            accumulate(n.c, gb);
        }
        if (rg(n.b)) {
            Matrix cols = im2col(x, s); // recomputed rather than stored
            accumulate(n.b, mm(dimcl::transpose(gout), cols));
        }
        if (rg(n.a)) {
            Matrix dcols = mm(gout, w);
            Matrix gx(x.rows(), x.cols());
            col2im_add(dcols, s, gx);
            accumulate(n.a, gx);
        }
        break;
    }
    case OpGap: {
        if (!rg(n.a)) break;
        const Matrix& v = nodes_[n.a].value;
        const std::size_t spatial = (std::size_t)n.ispatial;
        Matrix gx(v.rows(), v.cols());
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t c = 0; c < n.value.cols(); ++c) {
                double gv = g(i, c) / (double)spatial;
                for (std::size_t t = 0; t < spatial; ++t) gx(i, c * spatial + t) = gv;
            }
        accumulate(n.a, gx);
        break;
    }
    case OpXent: {
        if (!rg(n.a)) break;
        Matrix gx = n.aux;
        const double scale = g(0, 0) / (double)gx.rows();
        for (std::size_t i = 0; i < gx.rows(); ++i) {
            gx(i, (std::size_t)n.labels[i]) -= 1.0;
            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) *= scale;
        }
        accumulate(n.a, gx);
        break;
    }
    default:
        throw std::logic_error("unknown op in backward");
    }
}

} // namespace dimcl
