#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dimcl/frameworks.hpp"
#include "dimcl/losses.hpp"
#include "dimcl/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace dimcl;
namespace fs = std::filesystem;

namespace {

FrameworkConfig small_config(FrameworkKind kind) {
    FrameworkConfig cfg;
    cfg.kind = kind;
    cfg.encoder.image = false;
    cfg.encoder.input_dim = 12;
    cfg.encoder.proj_dim = 8;
    cfg.encoder.mlp_hidden = 16;
    cfg.encoder.proj_hidden = 16;
    cfg.mix = {0.1, 0.1};
    cfg.weight_decay = 0.0;
    return cfg;
}

Matrix random_batch(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (auto& v : m.raw()) v = rng.normal();
    return m;
}

double param_distance(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double f = frobenius_norm(sub(a[i], b[i]));
        total += f * f;
    }
    return std::sqrt(total);
}

} // namespace

TEST_CASE("ema_update basics") {
    std::vector<Matrix> online{Matrix(2, 2, 1.0), Matrix(1, 3, -2.0)};
    std::vector<Matrix> target{Matrix(2, 2, 5.0), Matrix(1, 3, 0.0)};

    auto t0 = target;
    ema_update(t0, online, 0.0);
    CHECK(t0[0] == online[0]);
    CHECK(t0[1] == online[1]);

    auto fixed = online;
    ema_update(fixed, online, 0.7);
    CHECK(fixed[0] == online[0]);

    std::vector<Matrix> wrong{Matrix(2, 3, 0.0)};
    CHECK_THROWS_AS(ema_update(wrong, online, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ema_update(t0, online, 1.0), std::invalid_argument);
}

TEST_CASE("ema converges geometrically to a constant online network") {
    std::vector<Matrix> online{Matrix(3, 3, 1.0)};
    std::vector<Matrix> target{Matrix(3, 3, 0.0)};
    double initial = param_distance(target, online);
    for (int step = 0; step < 69; ++step) ema_update(target, online, 0.99);
    double ratio = param_distance(target, online) / initial;
    CHECK(ratio == doctest::Approx(std::pow(0.99, 69)).epsilon(1e-9));
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("framework structure invariants") {
    FrameworkState simclr(small_config(FrameworkKind::SimClr), 1);
    CHECK(simclr.target_params().empty());
    CHECK(simclr.predictor_params().empty());

    FrameworkState byol(small_config(FrameworkKind::Byol), 1);
    CHECK(!byol.target_params().empty());
    CHECK(!byol.predictor_params().empty());

    FrameworkState simsiam(small_config(FrameworkKind::SimSiam), 1);
    CHECK(simsiam.target_params().empty());
    CHECK(!simsiam.predictor_params().empty());
}

TEST_CASE("a zero learning rate step changes nothing") {
    for (FrameworkKind kind :
         {FrameworkKind::SimClr, FrameworkKind::Byol, FrameworkKind::SimSiam}) {
        FrameworkState state(small_config(kind), 3);
        auto before = state.online_params();
        Rng rng(4);
        Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);
        StepReport rep = state.training_step(a, b, 0.0);
        CHECK(std::isfinite(rep.total));
        for (std::size_t i = 0; i < before.size(); ++i)
            CHECK(state.online_params()[i] == before[i]);
    }
}

TEST_CASE("reported total is the exact linear mix") {
    Rng rng(5);
    Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);

    for (double lambda : {0.0, 0.3, 1.0}) {
        FrameworkConfig cfg = small_config(FrameworkKind::SimSiam);
        cfg.mix.lambda = lambda;
        FrameworkState state(cfg, 6);
        StepReport rep = state.training_step(a, b, 0.05);
        CHECK(std::fabs(rep.total -
                        (lambda * rep.dimcl_loss + (1.0 - lambda) * rep.base_loss)) <
              1e-12);
        if (lambda == 0.0) CHECK(rep.total == rep.base_loss);
        if (lambda == 1.0) CHECK(rep.total == rep.dimcl_loss);
    }
}

TEST_CASE("simclr base loss delegates to the symmetrized batch loss") {
    FrameworkConfig cfg = small_config(FrameworkKind::SimClr);
    cfg.tau_base = 0.2;
    FrameworkState state(cfg, 7);
    Rng rng(8);
    Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);

    EmbeddingPair pair = state.forward_views(a, b);
    double expect = 0.5 * (batch_infonce(pair, 0.2).value +
                           batch_infonce({pair.zb, pair.za}, 0.2).value);
    StepReport rep = state.training_step(a, b, 0.0);
    CHECK(rep.base_loss == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("byol target only moves through the moving average") {
    FrameworkConfig cfg = small_config(FrameworkKind::Byol);
    cfg.ema_momentum = 0.99;
    FrameworkState state(cfg, 9);
    Rng rng(10);
    Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);

    auto target_before = state.target_params();
    state.training_step(a, b, 0.05);

    // expected: EMA of the updated online parameters, nothing else
    auto expect = target_before;
    ema_update(expect, state.online_params(), 0.99);
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(state.target_params()[i] == expect[i]);
}

TEST_CASE("training is deterministic and loss decreases on easy data") {
    FrameworkConfig cfg = small_config(FrameworkKind::SimSiam);
    FrameworkState s1(cfg, 11), s2(cfg, 11);
    Rng rng(12);

    double first = 0.0, last = 0.0;
    for (int step = 0; step < 20; ++step) {
        Matrix base = random_batch(rng, 16, 12);
        Matrix a = base, b = base;
        for (auto& v : a.raw()) v += 0.01 * rng.normal();
        for (auto& v : b.raw()) v += 0.01 * rng.normal();
        StepReport r1 = s1.training_step(a, b, 0.05);
        StepReport r2 = s2.training_step(a, b, 0.05);
        CHECK(r1.total == r2.total);
        CHECK(r1.grad_norm == r2.grad_norm);
        if (step == 0) first = r1.base_loss;
        last = r1.base_loss;
    }
    CHECK(last < first);
}

TEST_CASE("cross entropy base loss trains a classifier head") {
    FrameworkConfig cfg = small_config(FrameworkKind::SimClr);
    cfg.base_loss = BaseLossKind::CrossEntropy;
    cfg.num_classes = 3;
    FrameworkState state(cfg, 13);
    Rng rng(14);

    std::vector<int> labels;
    Matrix batch(9, 12);
    for (int i = 0; i < 9; ++i) {
        int c = i % 3;
        labels.push_back(c);
        for (int t = 0; t < 12; ++t)
            batch(i, t) = (t == c ? 2.0 : 0.0) + 0.05 * rng.normal();
    }

    double first = 0.0, last = 0.0;
    for (int step = 0; step < 30; ++step) {
        StepReport rep = state.training_step(batch, batch, 0.1, labels);
        if (step == 0) first = rep.base_loss;
        last = rep.base_loss;
    }
    CHECK(last < first);
}

TEST_CASE("image encoder trains end to end") {
    FrameworkConfig cfg = small_config(FrameworkKind::Byol);
    cfg.encoder.image = true;
    cfg.encoder.height = 8;
    cfg.encoder.width = 8;
    cfg.encoder.channels = 3;
    cfg.encoder.proj_dim = 8;
    FrameworkState state(cfg, 15);
    Rng rng(16);
    Matrix a = random_batch(rng, 4, 3 * 8 * 8);
    for (auto& v : a.raw()) v = std::fabs(v) / 3.0;
    StepReport rep = state.training_step(a, a, 0.05);
    CHECK(std::isfinite(rep.total));
    Matrix z = state.embed(a);
    CHECK(z.rows() == 4);
    CHECK(z.cols() == 8);
    CHECK(all_finite(z));
}

TEST_CASE("checkpoint round trip is exact") {
    FrameworkConfig cfg = small_config(FrameworkKind::Byol);
    cfg.mix = {0.25, 0.15};
    FrameworkState state(cfg, 17);
    Rng rng(18);
    Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);
    state.training_step(a, b, 0.05);

    fs::path p = fs::temp_directory_path() / "dimcl_ckpt_test.bin";
    state.save_checkpoint(p.string());
    FrameworkState loaded = FrameworkState::load_checkpoint(p.string());

    CHECK(loaded.config().kind == cfg.kind);
    CHECK(loaded.config().mix.lambda == cfg.mix.lambda);
    CHECK(loaded.config().mix.tau == cfg.mix.tau);
    // parameters are stored as float32 in the file
    for (std::size_t i = 0; i < state.online_params().size(); ++i)
        CHECK(max_abs_diff(loaded.online_params()[i], state.online_params()[i]) < 1e-5);
    for (std::size_t i = 0; i < state.target_params().size(); ++i)
        CHECK(max_abs_diff(loaded.target_params()[i], state.target_params()[i]) < 1e-5);

    // saving the loaded state reproduces the file byte for byte
    fs::path p2 = fs::temp_directory_path() / "dimcl_ckpt_test2.bin";
    loaded.save_checkpoint(p2.string());
    std::ifstream f1(p, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
    CHECK(s1.substr(0, 8) == "DCLCKPT1");

    // corrupt a payload byte: CRC must catch it
    s1[s1.size() / 2] ^= 0x01;
    fs::path p3 = fs::temp_directory_path() / "dimcl_ckpt_bad.bin";
    std::ofstream(p3, std::ios::binary).write(s1.data(), (std::streamsize)s1.size());
    CHECK_THROWS_WITH_AS((void)FrameworkState::load_checkpoint(p3.string()),
                         doctest::Contains("CRC"), std::runtime_error);

    fs::remove(p);
    fs::remove(p2);
    fs::remove(p3);
}

TEST_CASE("divergence is reported as an error") {
    // the normalized contrastive losses are self-stabilizing, so a raw-logit
    // cross entropy head is used to force the blow-up
    FrameworkConfig cfg = small_config(FrameworkKind::SimClr);
    cfg.base_loss = BaseLossKind::CrossEntropy;
    cfg.num_classes = 3;
    cfg.mix.lambda = 0.0;
    FrameworkState state(cfg, 19);
    Rng rng(20);
    Matrix a = random_batch(rng, 8, 12), b = random_batch(rng, 8, 12);
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
    bool diverged = false;
    for (int step = 0; step < 200 && !diverged; ++step) {
        try {
            state.training_step(a, b, 1e6, labels);
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "diverged");
            diverged = true;
        }
    }
    CHECK(diverged);
}
