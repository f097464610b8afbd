#include "dimcl/errors.hpp"
#include "dimcl/frameworks.hpp"
#include "dimcl/kernels.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dimcl {

FrameworkKind framework_from_string(const std::string& s) {
    if (s == "simclr") return FrameworkKind::SimClr;
    if (s == "byol") return FrameworkKind::Byol;
    if (s == "simsiam") return FrameworkKind::SimSiam;
    throw std::invalid_argument("unknown framework: " + s);
}

std::string to_string(FrameworkKind k) {
    switch (k) {
    case FrameworkKind::SimClr: return "simclr";
    case FrameworkKind::Byol: return "byol";
    default: return "simsiam";
    }
}

Encoder::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    auto linear = [&](int in, int out) {
        layers_.push_back({Layer::Linear, in, out, 1, {}});
        shapes_.emplace_back(in, out);
        shapes_.emplace_back(1, out);
    };
    auto bn = [&](int channels, int spatial) {
        layers_.push_back({Layer::BatchNorm, channels, channels, spatial, {}});
        shapes_.emplace_back(1, channels);
        shapes_.emplace_back(1, channels);
    };
    auto relu = [&] { layers_.push_back({Layer::Relu, 0, 0, 1, {}}); };

    if (cfg.image) {
        int h = cfg.height, w = cfg.width;
        int in_c = cfg.channels;
        const int widths[4] = {16, 32, 64, 128};
        for (int block = 0; block < 4; ++block) {
            Conv2dSpec spec;
            spec.in_channels = in_c;
            spec.in_h = h; spec.in_w = w;
            spec.out_channels = widths[block];
            spec.kernel = 3; spec.stride = 2; spec.pad = 1;
            layers_.push_back({Layer::Conv, in_c, widths[block], 1, spec});
            shapes_.emplace_back(widths[block], in_c * 9);
            shapes_.emplace_back(1, widths[block]);
            h = spec.out_h(); w = spec.out_w();
            bn(widths[block], h * w);
            relu();
            in_c = widths[block];
        }
        layers_.push_back({Layer::Gap, in_c, in_c, h * w, {}});
        linear(in_c, cfg.proj_hidden);
        bn(cfg.proj_hidden, 1);
        relu();
        linear(cfg.proj_hidden, cfg.proj_dim);
    } else {
        if (cfg.input_dim < 1) throw std::invalid_argument("encoder: input_dim not set");
        int in = cfg.input_dim;
        for (int layer = 0; layer < 3; ++layer) {
            linear(in, cfg.mlp_hidden);
            bn(cfg.mlp_hidden, 1);
            relu();
            in = cfg.mlp_hidden;
        }
        linear(in, cfg.proj_hidden);
        bn(cfg.proj_hidden, 1);
        relu();
        linear(cfg.proj_hidden, cfg.proj_dim);
    }
}

std::vector<Matrix> Encoder::init_params(Rng rng) const {
    std::vector<Matrix> params;
    params.reserve(shapes_.size());
    for (const Layer& layer : layers_) {
        switch (layer.type) {
        case Layer::Linear: {
            Matrix w(layer.in, layer.out);
            double std = std::sqrt(2.0 / (double)layer.in);
            for (double& v : w.raw()) v = std * rng.normal();
            params.push_back(std::move(w));
            params.emplace_back(1, layer.out); // bias
            break;
        }
        case Layer::Conv: {
            int fan_in = layer.conv.in_channels * layer.conv.kernel * layer.conv.kernel;
            Matrix w(layer.out, fan_in);
            double std = std::sqrt(2.0 / (double)fan_in);
            for (double& v : w.raw()) v = std * rng.normal();
            params.push_back(std::move(w));
            params.emplace_back(1, layer.out);
            break;
        }
        case Layer::BatchNorm:
            params.emplace_back(1, layer.out, 1.0); // gamma
            params.emplace_back(1, layer.out);      // beta
            break;
        default:
            break;
        }
    }
    return params;
}

NodeId Encoder::forward(Graph& g, const std::vector<NodeId>& params, NodeId input) const {
    if (params.size() != shapes_.size())
        throw std::invalid_argument("encoder forward: parameter count mismatch");
    NodeId x = input;
    std::size_t p = 0;
    for (const Layer& layer : layers_) {
        switch (layer.type) {
        case Layer::Linear:
            x = g.add_row_broadcast(g.matmul(x, params[p]), params[p + 1]);
            p += 2;
            break;
        case Layer::Conv:
            x = g.conv2d(x, params[p], params[p + 1], layer.conv);
            p += 2;
            break;
        case Layer::BatchNorm:
            x = g.batch_norm(x, params[p], params[p + 1], layer.spatial);
            p += 2;
            break;
        case Layer::Relu:
            x = g.relu(x);
            break;
        case Layer::Gap:
            x = g.global_avg_pool(x, layer.out);
            break;
        }
    }
    return x;
}

Predictor::Predictor(int dim, int hidden) {
    Encoder net;
    EncoderConfig cfg;
    cfg.input_dim = dim;
    cfg.proj_dim = dim;
    net.cfg_ = cfg;
    auto linear = [&](int in, int out) {
        net.layers_.push_back({Encoder::Layer::Linear, in, out, 1, {}});
        net.shapes_.emplace_back(in, out);
        net.shapes_.emplace_back(1, out);
    };
    linear(dim, hidden);
    net.layers_.push_back({Encoder::Layer::BatchNorm, hidden, hidden, 1, {}});
    net.shapes_.emplace_back(1, hidden);
    net.shapes_.emplace_back(1, hidden);
    net.layers_.push_back({Encoder::Layer::Relu, 0, 0, 1, {}});
    linear(hidden, dim);
    net_ = std::move(net);
}

std::vector<Matrix> Predictor::init_params(Rng rng) const { return net_.init_params(rng); }

NodeId Predictor::forward(Graph& g, const std::vector<NodeId>& params, NodeId input) const {
    return net_.forward(g, params, input);
}

std::size_t Predictor::num_tensors() const { return net_.num_tensors(); }

void ema_update(std::vector<Matrix>& target, const std::vector<Matrix>& online, double m) {
    if (m < 0.0 || m >= 1.0) throw std::invalid_argument("ema momentum out of [0,1)");
    if (target.size() != online.size())
        throw std::invalid_argument("ema update: tensor count mismatch");
    for (std::size_t t = 0; t < target.size(); ++t) {
        if (!target[t].same_shape(online[t]))
            throw std::invalid_argument("ema update: shape mismatch");
        for (std::size_t i = 0; i < target[t].size(); ++i)
            target[t].raw()[i] = m * target[t].raw()[i] + (1.0 - m) * online[t].raw()[i];
    }
}

FrameworkState::FrameworkState(const FrameworkConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      encoder_(cfg.encoder),
      predictor_(cfg.encoder.proj_dim, cfg.encoder.proj_hidden) {
    Rng rng(seed);
    online_ = encoder_.init_params(rng.split(10));
    if (cfg.kind == FrameworkKind::Byol) target_ = online_;
    if (cfg.kind != FrameworkKind::SimClr)
        predictor_params_ = predictor_.init_params(rng.split(11));
    if (cfg.base_loss == BaseLossKind::CrossEntropy) {
        if (cfg.num_classes < 2)
            throw std::invalid_argument("cross-entropy base needs num_classes");
        Rng crng = rng.split(12);
        Matrix w(cfg.encoder.proj_dim, cfg.num_classes);
        double std = std::sqrt(2.0 / (double)cfg.encoder.proj_dim);
        for (double& v : w.raw()) v = std * crng.normal();
        classifier_.push_back(std::move(w));
        classifier_.emplace_back(1, cfg.num_classes);
    }
    auto add_velocity = [&](const std::vector<Matrix>& group) {
        for (const Matrix& t : group) velocity_.emplace_back(t.rows(), t.cols());
    };
    add_velocity(online_);
    add_velocity(predictor_params_);
    add_velocity(classifier_);
}

namespace {
// mean over rows of -cos(p_i, z_i); inputs are arbitrary, normalized here
NodeId neg_cosine_node(Graph& g, NodeId p, NodeId z) {
    NodeId pn = g.l2_normalize(p, Axis::Rows);
    NodeId zn = g.l2_normalize(z, Axis::Rows);
    double n = (double)g.value(p).rows();
    return g.scale(g.sum_all(g.mul(pn, zn)), -1.0 / n);
}
} // namespace

StepReport FrameworkState::training_step(const Matrix& view_a, const Matrix& view_b,
                                         double lr, const std::vector<int>& labels) {
    if (!view_a.same_shape(view_b))
        throw std::invalid_argument("training step: view shape mismatch");
    const double lambda = cfg_.mix.lambda;
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda out of [0,1]");

    Graph g(cfg_.math);
    std::vector<NodeId> enc_nodes, pred_nodes, cls_nodes, tgt_nodes;
    for (const Matrix& t : online_) enc_nodes.push_back(g.leaf(t));
    for (const Matrix& t : predictor_params_) pred_nodes.push_back(g.leaf(t));
    for (const Matrix& t : classifier_) cls_nodes.push_back(g.leaf(t));
    for (const Matrix& t : target_) tgt_nodes.push_back(g.constant(t));

    NodeId xa = g.constant(view_a);
    NodeId xb = g.constant(view_b);
    NodeId za = encoder_.forward(g, enc_nodes, xa);
    NodeId zb = encoder_.forward(g, enc_nodes, xb);

    // key-branch outputs, per framework
    NodeId ka, kb; // keys paired with queries za, zb respectively
    if (cfg_.kind == FrameworkKind::Byol) {
        ka = encoder_.forward(g, tgt_nodes, xb);
        kb = encoder_.forward(g, tgt_nodes, xa);
    } else if (cfg_.kind == FrameworkKind::SimSiam) {
        ka = g.detach(zb);
        kb = g.detach(za);
    } else {
        ka = zb;
        kb = za;
    }

    auto build_base = [&](NodeId qa, NodeId qb, NodeId key_a, NodeId key_b) -> NodeId {
        if (cfg_.base_loss == BaseLossKind::CrossEntropy) {
            if (labels.size() != view_a.rows())
                throw std::invalid_argument("cross-entropy base: missing labels");
            NodeId la = g.softmax_cross_entropy(
                g.add_row_broadcast(g.matmul(qa, cls_nodes[0]), cls_nodes[1]), labels);
            NodeId lb = g.softmax_cross_entropy(
                g.add_row_broadcast(g.matmul(qb, cls_nodes[0]), cls_nodes[1]), labels);
            return g.scale(g.add(la, lb), 0.5);
        }
        if (cfg_.kind == FrameworkKind::SimClr) {
            NodeId f = infonce_node(g, qa, key_a, cfg_.tau_base);
            NodeId r = infonce_node(g, qb, key_b, cfg_.tau_base);
            return g.scale(g.add(f, r), 0.5);
        }
        NodeId pa = predictor_.forward(g, pred_nodes, qa);
        NodeId pb = predictor_.forward(g, pred_nodes, qb);
        return g.scale(g.add(neg_cosine_node(g, pa, key_a),
                             neg_cosine_node(g, pb, key_b)), 0.5);
    };

    auto build_dim = [&](NodeId qa, NodeId qb, NodeId key_a, NodeId key_b) -> NodeId {
        NodeId ia = qa, ib = qb;
        if (cfg_.dimcl_on_predictor && cfg_.kind != FrameworkKind::SimClr) {
            ia = predictor_.forward(g, pred_nodes, qa);
            ib = predictor_.forward(g, pred_nodes, qb);
        }
        NodeId f = dimcl_node(g, ia, key_a, cfg_.mix.tau, cfg_.abs_negatives,
                              cfg_.center_columns);
        NodeId r = dimcl_node(g, ib, key_b, cfg_.mix.tau, cfg_.abs_negatives,
                              cfg_.center_columns);
        return g.scale(g.add(f, r), 0.5);
    };

    // When one component carries zero weight it is built on detached
    // inputs: reported, but kept out of the optimization path so a
    // lambda=0 run is bitwise identical to the plain baseline.
    NodeId base_node, dim_node, objective;
    if (lambda == 0.0) {
        base_node = build_base(za, zb, ka, kb);
        dim_node = build_dim(g.detach(za), g.detach(zb), g.detach(ka), g.detach(kb));
        objective = base_node;
    } else if (lambda == 1.0) {
        dim_node = build_dim(za, zb, ka, kb);
        base_node = build_base(g.detach(za), g.detach(zb), g.detach(ka), g.detach(kb));
        objective = dim_node;
    } else {
        base_node = build_base(za, zb, ka, kb);
        dim_node = build_dim(za, zb, ka, kb);
        objective = g.add(g.scale(dim_node, lambda), g.scale(base_node, 1.0 - lambda));
    }

    StepReport rep;
    rep.base_loss = g.value(base_node)(0, 0);
    rep.dimcl_loss = g.value(dim_node)(0, 0);
    rep.total = g.value(objective)(0, 0);
    if (!std::isfinite(rep.total))
        throw std::runtime_error("diverged");

    g.backward(objective);

    std::vector<NodeId> trainable = enc_nodes;
    trainable.insert(trainable.end(), pred_nodes.begin(), pred_nodes.end());
    trainable.insert(trainable.end(), cls_nodes.begin(), cls_nodes.end());
    std::vector<Matrix*> tensors;
    for (Matrix& t : online_) tensors.push_back(&t);
    for (Matrix& t : predictor_params_) tensors.push_back(&t);
    for (Matrix& t : classifier_) tensors.push_back(&t);

    double grad_sq = 0.0;
    for (std::size_t t = 0; t < trainable.size(); ++t) {
        Matrix& param = *tensors[t];
        Matrix& vel = velocity_[t];
        Matrix grad(param.rows(), param.cols());
        try {
            grad = g.grad(trainable[t]);
        } catch (const std::runtime_error&) {
            // unreachable from the objective (e.g. predictor under lambda=1)
        }
        for (std::size_t i = 0; i < param.size(); ++i) {
            double gv = grad.raw()[i];
            grad_sq += gv * gv;
            vel.raw()[i] = cfg_.sgd_momentum * vel.raw()[i] +
                           (gv + cfg_.weight_decay * param.raw()[i]);
            param.raw()[i] -= lr * vel.raw()[i];
        }
        if (!all_finite(param)) throw std::runtime_error("diverged");
    }
    rep.grad_norm = std::sqrt(grad_sq);

    if (cfg_.kind == FrameworkKind::Byol)
        ema_update(target_, online_, cfg_.ema_momentum);

    ++steps_;
    return rep;
}

EmbeddingPair FrameworkState::forward_views(const Matrix& view_a, const Matrix& view_b) {
    if (!view_a.same_shape(view_b))
        throw std::invalid_argument("forward_views: view shape mismatch");
    Graph g(cfg_.math);
    std::vector<NodeId> enc_nodes, tgt_nodes;
    for (const Matrix& t : online_) enc_nodes.push_back(g.constant(t));
    NodeId za = encoder_.forward(g, enc_nodes, g.constant(view_a));
    NodeId zb;
    if (cfg_.kind == FrameworkKind::Byol) {
        for (const Matrix& t : target_) tgt_nodes.push_back(g.constant(t));
        zb = encoder_.forward(g, tgt_nodes, g.constant(view_b));
    } else {
        zb = encoder_.forward(g, enc_nodes, g.constant(view_b));
    }
    return {g.value(za), g.value(zb)};
}

Matrix FrameworkState::embed(const Matrix& batch) {
    Graph g(cfg_.math);
    std::vector<NodeId> enc_nodes;
    for (const Matrix& t : online_) enc_nodes.push_back(g.constant(t));
    return g.value(encoder_.forward(g, enc_nodes, g.constant(batch)));
}

// ---------------------------------------------------------------------
// checkpoint format: "DCLCKPT1", little-endian int32/float64 config
// fields, float32 parameter blobs, trailing CRC32
// ---------------------------------------------------------------------

namespace {

std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data, std::size_t len) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct ByteSink {
    std::vector<std::uint8_t> bytes;
    void put(const void* p, std::size_t n) {
        const std::uint8_t* b = (const std::uint8_t*)p;
        bytes.insert(bytes.end(), b, b + n);
    }
    void i32(std::int32_t v) { put(&v, 4); }
    void f64(double v) { put(&v, 8); }
    void f32(float v) { put(&v, 4); }
};

struct ByteSource {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    void get(void* p, std::size_t n) {
        if (pos + n > bytes.size()) throw IoError("truncated checkpoint");
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    std::int32_t i32() { std::int32_t v; get(&v, 4); return v; }
    double f64() { double v; get(&v, 8); return v; }
    float f32() { float v; get(&v, 4); return v; }
};

void put_tensors(ByteSink& sink, const std::vector<Matrix>& group) {
    sink.i32((std::int32_t)group.size());
    for (const Matrix& t : group) {
        sink.i32((std::int32_t)t.rows());
        sink.i32((std::int32_t)t.cols());
        for (double v : t.raw()) sink.f32((float)v);
    }
}

std::vector<Matrix> get_tensors(ByteSource& src) {
    std::int32_t count = src.i32();
    if (count < 0) throw IoError("corrupt checkpoint tensor count");
    std::vector<Matrix> group;
    group.reserve(count);
    for (std::int32_t t = 0; t < count; ++t) {
        std::int32_t rows = src.i32(), cols = src.i32();
        if (rows < 0 || cols < 0) throw IoError("corrupt checkpoint shape");
        Matrix m(rows, cols);
        for (double& v : m.raw()) v = src.f32();
        group.push_back(std::move(m));
    }
    return group;
}

} // namespace

void FrameworkState::save_checkpoint(const std::string& path) const {
    ByteSink sink;
    sink.put("DCLCKPT1", 8);
    sink.i32(1); // version
    sink.i32((std::int32_t)cfg_.kind);
    sink.i32(cfg_.encoder.image ? 1 : 0);
    sink.i32(cfg_.encoder.input_dim);
    sink.i32(cfg_.encoder.height);
    sink.i32(cfg_.encoder.width);
    sink.i32(cfg_.encoder.channels);
    sink.i32(cfg_.encoder.proj_dim);
    sink.i32(cfg_.encoder.mlp_hidden);
    sink.i32(cfg_.encoder.proj_hidden);
    sink.f64(cfg_.mix.lambda);
    sink.f64(cfg_.mix.tau);
    sink.f64(cfg_.tau_base);
    sink.f64(cfg_.ema_momentum);
    sink.f64(cfg_.weight_decay);
    sink.f64(cfg_.sgd_momentum);
    sink.i32(cfg_.abs_negatives ? 1 : 0);
    sink.i32(cfg_.center_columns ? 1 : 0);
    sink.i32(cfg_.dimcl_on_predictor ? 1 : 0);
    sink.i32((std::int32_t)cfg_.base_loss);
    sink.i32(cfg_.num_classes);
    sink.i32(cfg_.math == MathMode::Float32 ? 1 : 0);
    put_tensors(sink, online_);
    put_tensors(sink, target_);
    put_tensors(sink, predictor_params_);
    put_tensors(sink, classifier_);
    std::uint32_t crc = crc32_update(0, sink.bytes.data(), sink.bytes.size());
    sink.put(&crc, 4);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write((const char*)sink.bytes.data(), (std::streamsize)sink.bytes.size());
    if (!out) throw IoError("checkpoint write failed: " + path);
}

FrameworkState FrameworkState::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "DCLCKPT1", 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (crc32_update(0, bytes.data(), bytes.size() - 4) != stored)
        throw IoError("checkpoint CRC mismatch: " + path);

    ByteSource src{bytes, 8};
    if (src.i32() != 1) throw IoError("unsupported checkpoint version");
    FrameworkConfig cfg;
    cfg.kind = (FrameworkKind)src.i32();
    cfg.encoder.image = src.i32() != 0;
    cfg.encoder.input_dim = src.i32();
    cfg.encoder.height = src.i32();
    cfg.encoder.width = src.i32();
    cfg.encoder.channels = src.i32();
    cfg.encoder.proj_dim = src.i32();
    cfg.encoder.mlp_hidden = src.i32();
    cfg.encoder.proj_hidden = src.i32();
    cfg.mix.lambda = src.f64();
    cfg.mix.tau = src.f64();
    cfg.tau_base = src.f64();
    cfg.ema_momentum = src.f64();
    cfg.weight_decay = src.f64();
    cfg.sgd_momentum = src.f64();
    cfg.abs_negatives = src.i32() != 0;
    cfg.center_columns = src.i32() != 0;
    cfg.dimcl_on_predictor = src.i32() != 0;
    cfg.base_loss = (BaseLossKind)src.i32();
    cfg.num_classes = src.i32();
    cfg.math = src.i32() != 0 ? MathMode::Float32 : MathMode::Float64;

    FrameworkState state(cfg, 0);
    state.online_ = get_tensors(src);
    state.target_ = get_tensors(src);
    state.predictor_params_ = get_tensors(src);
    state.classifier_ = get_tensors(src);
    return state;
}

} // namespace dimcl
