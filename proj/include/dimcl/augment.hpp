#ifndef DIMCL_AUGMENT_HPP
#define DIMCL_AUGMENT_HPP

#include "dimcl/data.hpp"
#include "dimcl/rng.hpp"

#include <utility>

namespace dimcl {

struct AugmentPolicy {
    double crop_scale_min = 0.2;
    double crop_scale_max = 1.0;
    double flip_prob = 0.5;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.2;
    double hue = 0.1;
    double grayscale_prob = 0.2;
    double blur_prob = 0.2;
    double solarize_prob = 0.1;
    double solarize_threshold = 0.5;
    double feature_noise_sigma = 0.1; // synthetic data: additive noise instead

    void validate() const;
    static AugmentPolicy identity();
};

// Single augmented image view. The example must carry 32x32x3 pixels in
// channel-major layout; output keeps the layout and stays in [0,1].
Example augment_image(const Example& ex, int h, int w, int c,
                      const AugmentPolicy& policy, Rng& rng);

// Two independent augmentations of the same example. Feature examples
// receive two independent additive-noise draws.
std::pair<Example, Example> two_views(const Example& ex, const Dataset& meta,
                                      const AugmentPolicy& policy, Rng rng);

} // namespace dimcl

#endif
