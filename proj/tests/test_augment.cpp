#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dimcl/augment.hpp"
#include "dimcl/data.hpp"
#include "dimcl/rng.hpp"

#include <cmath>

using namespace dimcl;

namespace {

Dataset image_meta() {
    Dataset ds;
    ds.kind = DatasetKind::Image;
    ds.height = 32;
    ds.width = 32;
    ds.channels = 3;
    return ds;
}

Example random_image(Rng rng) {
    Example ex;
    ex.values.resize(3 * 32 * 32);
    for (auto& v : ex.values) v = rng.uniform();
    ex.label = 1;
    return ex;
}

Example flipped(const Example& ex) {
    Example out = ex;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                out.values[(c * 32 + y) * 32 + x] =
                    ex.values[(c * 32 + y) * 32 + (31 - x)];
    return out;
}

} // namespace

TEST_CASE("identity policy returns the input exactly") {
    Example ex = random_image(Rng(1));
    Rng rng(2);
    auto [a, b] = two_views(ex, image_meta(), AugmentPolicy::identity(), rng);
    CHECK(a.values == ex.values);
    CHECK(b.values == ex.values);
    CHECK(a.label == ex.label);
}

TEST_CASE("flip with probability one is an involution") {
    AugmentPolicy policy = AugmentPolicy::identity();
    policy.flip_prob = 1.0;
    Example ex = random_image(Rng(3));
    Rng rng(4);
    Example once = augment_image(ex, 32, 32, 3, policy, rng);
    CHECK(flipped(once).values == ex.values);
}

TEST_CASE("augmentation is deterministic under a fixed seed") {
    AugmentPolicy policy; // full default pipeline
    Example ex = random_image(Rng(5));
    auto [a1, b1] = two_views(ex, image_meta(), policy, Rng(6));
    auto [a2, b2] = two_views(ex, image_meta(), policy, Rng(6));
    CHECK(a1.values == a2.values);
    CHECK(b1.values == b2.values);

    // the two views differ from each other
    CHECK(a1.values != b1.values);
}

TEST_CASE("augmented pixels stay in range and finite") {
    AugmentPolicy policy;
    policy.brightness = 0.8;
    policy.contrast = 0.8;
    policy.saturation = 0.5;
    policy.hue = 0.1;
    policy.grayscale_prob = 0.5;
    policy.blur_prob = 0.5;
    policy.solarize_prob = 0.5;
    Rng seeds(7);
    for (int trial = 0; trial < 25; ++trial) {
        Example ex = random_image(seeds.split(trial));
        Rng rng = seeds.split(1000 + trial);
        Example out = augment_image(ex, 32, 32, 3, policy, rng);
        REQUIRE(out.values.size() == ex.values.size());
        for (double v : out.values) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("policy validation") {
    AugmentPolicy bad;
    bad.flip_prob = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = AugmentPolicy{};
    bad.crop_scale_min = 0.9;
    bad.crop_scale_max = 0.2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    AugmentPolicy ok;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("feature examples get two independent noise draws") {
    Dataset meta;
    meta.kind = DatasetKind::Feature;
    meta.feature_dim = 16;
    Example ex;
    ex.values.assign(16, 0.5);

    AugmentPolicy policy;
    policy.feature_noise_sigma = 0.1;
    auto [a, b] = two_views(ex, meta, policy, Rng(8));
    CHECK(a.values != ex.values);
    CHECK(a.values != b.values);

    // zero sigma reproduces the input
    policy.feature_noise_sigma = 0.0;
    auto [c, d] = two_views(ex, meta, policy, Rng(9));
    CHECK(c.values == ex.values);
    CHECK(d.values == ex.values);
}
