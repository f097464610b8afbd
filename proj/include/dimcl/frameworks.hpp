#ifndef DIMCL_FRAMEWORKS_HPP
#define DIMCL_FRAMEWORKS_HPP

#include "dimcl/graph.hpp"
#include "dimcl/losses.hpp"
#include "dimcl/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dimcl {

enum class FrameworkKind { SimClr, Byol, SimSiam };
enum class BaseLossKind { Framework, CrossEntropy };

FrameworkKind framework_from_string(const std::string& s);
std::string to_string(FrameworkKind k);

struct EncoderConfig {
    bool image = false;
    int input_dim = 0;                       // feature data
    int height = 32, width = 32, channels = 3; // image data
    int proj_dim = 256;    // D
    int mlp_hidden = 256;  // backbone width (feature encoder)
    int proj_hidden = 512; // projector hidden width
};

// Layered encoder description: MLP backbone for feature data, a four
// conv-block net (32-64-128-256, stride 2, global average pool) for
// 32x32 images, followed by a 2-layer projector to proj_dim.
class Encoder {
public:
    explicit Encoder(const EncoderConfig& cfg);

    std::vector<Matrix> init_params(Rng rng) const;
    NodeId forward(Graph& g, const std::vector<NodeId>& params, NodeId input) const;

    std::size_t num_tensors() const { return shapes_.size(); }
    const EncoderConfig& config() const { return cfg_; }

private:
    struct Layer {
        enum Type { Linear, Conv, BatchNorm, Relu, Gap } type;
        int in = 0, out = 0;    // linear dims / conv channels
        int spatial = 1;        // batchnorm group / gap spatial size
        Conv2dSpec conv;
    };
    EncoderConfig cfg_;
    std::vector<Layer> layers_;
    std::vector<std::pair<std::size_t, std::size_t>> shapes_;
    friend class Predictor;
    Encoder() = default;
};

// 2-layer MLP head, proj_dim -> hidden -> proj_dim.
class Predictor {
public:
    Predictor(int dim, int hidden);
    std::vector<Matrix> init_params(Rng rng) const;
    NodeId forward(Graph& g, const std::vector<NodeId>& params, NodeId input) const;
    std::size_t num_tensors() const;

private:
    Encoder net_;
};

struct FrameworkConfig {
    FrameworkKind kind = FrameworkKind::SimSiam;
    EncoderConfig encoder;
    LossMixConfig mix;             // lambda + DimCL temperature
    double tau_base = 0.1;         // SimCLR base temperature
    double ema_momentum = 0.99;    // BYOL target momentum
    bool abs_negatives = false;    // AbsCL regularizer variant
    bool center_columns = false;   // optional column centering before DimCL
    bool dimcl_on_predictor = false;
    BaseLossKind base_loss = BaseLossKind::Framework;
    int num_classes = 0;           // cross-entropy base loss only
    MathMode math = MathMode::Float64;
    double weight_decay = 1e-5;
    double sgd_momentum = 0.9;
};

struct StepReport {
    double base_loss = 0.0;
    double dimcl_loss = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;
};

// target <- m * target + (1 - m) * online, tensor by tensor.
void ema_update(std::vector<Matrix>& target, const std::vector<Matrix>& online, double m);

class FrameworkState {
public:
    FrameworkState(const FrameworkConfig& cfg, std::uint64_t seed);

    // One optimization step on a pair of augmented views (N x input).
    // Labels are only consulted for the cross-entropy base loss.
    StepReport training_step(const Matrix& view_a, const Matrix& view_b, double lr,
                             const std::vector<int>& labels = {});

    // Forward both views without updating anything. za always comes from
    // the online encoder; zb from the target (BYOL), stop-gradient online
    // (SimSiam) or plain online branch (SimCLR).
    EmbeddingPair forward_views(const Matrix& view_a, const Matrix& view_b);

    // Projector outputs of the online encoder (evaluation path).
    Matrix embed(const Matrix& batch);

    const FrameworkConfig& config() const { return cfg_; }
    const std::vector<Matrix>& online_params() const { return online_; }
    std::vector<Matrix>& online_params() { return online_; }
    const std::vector<Matrix>& target_params() const { return target_; }
    const std::vector<Matrix>& predictor_params() const { return predictor_params_; }
    std::size_t steps_taken() const { return steps_; }

    void save_checkpoint(const std::string& path) const;
    static FrameworkState load_checkpoint(const std::string& path);

private:
    NodeId base_loss_node(Graph& g, NodeId za, NodeId zb,
                          const std::vector<NodeId>& pred_nodes,
                          const std::vector<NodeId>& cls_nodes,
                          const std::vector<int>& labels) const;

    FrameworkConfig cfg_;
    Encoder encoder_;
    Predictor predictor_;
    std::vector<Matrix> online_;
    std::vector<Matrix> target_;           // BYOL only
    std::vector<Matrix> predictor_params_; // BYOL / SimSiam
    std::vector<Matrix> classifier_;       // cross-entropy base only
    std::vector<Matrix> velocity_;         // SGD momentum, online order then predictor then classifier
    std::size_t steps_ = 0;
};

} // namespace dimcl

#endif
