#include "dimcl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dimcl {

void AugmentPolicy::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(crop_scale_min > 0.0 && crop_scale_max <= 1.0 && crop_scale_min <= crop_scale_max))
        throw std::invalid_argument("augment policy: crop_scale out of (0,1]");
    if (!prob(flip_prob) || !prob(grayscale_prob) || !prob(blur_prob) ||
        !prob(solarize_prob) || !prob(solarize_threshold))
        throw std::invalid_argument("augment policy: probability out of [0,1]");
    if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0 ||
        feature_noise_sigma < 0)
        throw std::invalid_argument("augment policy: negative strength");
}

AugmentPolicy AugmentPolicy::identity() {
    AugmentPolicy p;
    p.crop_scale_min = 1.0; p.crop_scale_max = 1.0;
    p.flip_prob = 0.0;
    p.brightness = p.contrast = p.saturation = p.hue = 0.0;
    p.grayscale_prob = p.blur_prob = p.solarize_prob = 0.0;
    p.feature_noise_sigma = 0.0;
    return p;
}

namespace {

struct Image {
    int h, w, c;
    std::vector<double> px; // channel-major planes
    double at(int ch, int y, int x) const { return px[(ch * h + y) * w + x]; }
    double& at(int ch, int y, int x) { return px[(ch * h + y) * w + x]; }
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void random_resized_crop(Image& img, double smin, double smax, Rng& rng) {
    const int h = img.h, w = img.w;
    int ch = h, cw = w, y0 = 0, x0 = 0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        double area = rng.uniform(smin, smax) * h * w;
        double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
        double ratio = std::exp(log_ratio);
        int th = (int)std::lround(std::sqrt(area / ratio));
        int tw = (int)std::lround(std::sqrt(area * ratio));
        if (th < 1 || tw < 1) throw std::runtime_error("crop smaller than 1 pixel");
        if (th > h || tw > w) continue;
        ch = th; cw = tw;
        y0 = (int)rng.uniform_int((std::uint64_t)(h - th + 1));
        x0 = (int)rng.uniform_int((std::uint64_t)(w - tw + 1));
        break;
    }
    if (ch == h && cw == w && y0 == 0 && x0 == 0) return; // full frame, exact
    // bilinear resize of the crop back to h x w (pixel-center mapping)
    Image out{h, w, img.c, std::vector<double>(img.px.size())};
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < h; ++y) {
            double sy = y0 + ((double)y + 0.5) * ch / h - 0.5;
            sy = std::clamp(sy, (double)y0, (double)(y0 + ch - 1));
            int iy = (int)std::floor(sy);
            int iy1 = std::min(iy + 1, y0 + ch - 1);
            double fy = sy - iy;
            for (int x = 0; x < w; ++x) {
                double sx = x0 + ((double)x + 0.5) * cw / w - 0.5;
                sx = std::clamp(sx, (double)x0, (double)(x0 + cw - 1));
                int ix = (int)std::floor(sx);
                int ix1 = std::min(ix + 1, x0 + cw - 1);
                double fx = sx - ix;
                double v = (1 - fy) * ((1 - fx) * img.at(c, iy, ix) + fx * img.at(c, iy, ix1)) +
                           fy * ((1 - fx) * img.at(c, iy1, ix) + fx * img.at(c, iy1, ix1));
                out.at(c, y, x) = v;
            }
        }
    img = std::move(out);
}

void hflip(Image& img) {
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w / 2; ++x)
                std::swap(img.at(c, y, x), img.at(c, y, img.w - 1 - x));
}

double luma(const Image& img, int y, int x) {
    return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

void adjust_brightness(Image& img, double factor) {
    for (double& v : img.px) v = clamp01(v * factor);
}

void adjust_contrast(Image& img, double factor) {
    double mean = 0.0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) mean += luma(img, y, x);
    mean /= (double)(img.h * img.w);
    for (double& v : img.px) v = clamp01(mean + factor * (v - mean));
}

void adjust_saturation(Image& img, double factor) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double g = luma(img, y, x);
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = clamp01(g + factor * (img.at(c, y, x) - g));
        }
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    v = mx;
    double d = mx - mn;
    s = mx == 0.0 ? 0.0 : d / mx;
    if (d == 0.0) { h = 0.0; return; }
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    double i = std::floor(h * 6.0);
    double f = h * 6.0 - i;
    double p = v * (1.0 - s);
    double q = v * (1.0 - f * s);
    double t = v * (1.0 - (1.0 - f) * s);
    switch ((int)i % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
    }
}

void adjust_hue(Image& img, double shift) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double h, s, v, r, g, b;
            rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x), h, s, v);
            h = std::fmod(h + shift + 1.0, 1.0);
            hsv_to_rgb(h, s, v, r, g, b);
            img.at(0, y, x) = clamp01(r);
            img.at(1, y, x) = clamp01(g);
            img.at(2, y, x) = clamp01(b);
        }
}

void to_grayscale(Image& img) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double g = luma(img, y, x);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = g;
        }
}

void gaussian_blur(Image& img, double sigma) {
    int radius = std::max(1, (int)std::ceil(2.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double s = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-(double)(i * i) / (2.0 * sigma * sigma));
        s += kernel[i + radius];
    }
    for (double& k : kernel) k /= s;

    Image tmp = img;
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double v = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    v += kernel[i + radius] * img.at(c, y, std::clamp(x + i, 0, img.w - 1));
                tmp.at(c, y, x) = v;
            }
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double v = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    v += kernel[i + radius] * tmp.at(c, std::clamp(y + i, 0, img.h - 1), x);
                img.at(c, y, x) = clamp01(v);
            }
}

void solarize(Image& img, double threshold) {
    for (double& v : img.px)
        if (v > threshold) v = 1.0 - v;
}

} // namespace

Example augment_image(const Example& ex, int h, int w, int c,
                      const AugmentPolicy& policy, Rng& rng) {
    policy.validate();
    if (c != 3) throw std::invalid_argument("augment_image: expects 3 channels");
    Image img{h, w, c, ex.values};

    random_resized_crop(img, policy.crop_scale_min, policy.crop_scale_max, rng);
    if (rng.uniform() < policy.flip_prob) hflip(img);

    // color jitter in a random order
    std::vector<std::size_t> order = rng.permutation(4);
    for (std::size_t op : order) {
        switch (op) {
        case 0:
            if (policy.brightness > 0)
                adjust_brightness(img, rng.uniform(std::max(0.0, 1.0 - policy.brightness),
                                                   1.0 + policy.brightness));
            break;
        case 1:
            if (policy.contrast > 0)
                adjust_contrast(img, rng.uniform(std::max(0.0, 1.0 - policy.contrast),
                                                 1.0 + policy.contrast));
            break;
        case 2:
            if (policy.saturation > 0)
                adjust_saturation(img, rng.uniform(std::max(0.0, 1.0 - policy.saturation),
                                                   1.0 + policy.saturation));
            break;
        default:
            if (policy.hue > 0)
                adjust_hue(img, rng.uniform(-policy.hue, policy.hue));
            break;
        }
    }

    if (rng.uniform() < policy.grayscale_prob) to_grayscale(img);
    if (rng.uniform() < policy.blur_prob) gaussian_blur(img, rng.uniform(0.1, 2.0));
    if (rng.uniform() < policy.solarize_prob) solarize(img, policy.solarize_threshold);

    for (double& v : img.px) v = clamp01(v);
    Example out;
    out.label = ex.label;
    out.values = std::move(img.px);
    return out;
}

std::pair<Example, Example> two_views(const Example& ex, const Dataset& meta,
                                      const AugmentPolicy& policy, Rng rng) {
    policy.validate();
    Rng r0 = rng.split(0);
    Rng r1 = rng.split(1);
    if (meta.kind == DatasetKind::Image) {
        return {augment_image(ex, meta.height, meta.width, meta.channels, policy, r0),
                augment_image(ex, meta.height, meta.width, meta.channels, policy, r1)};
    }
    auto noisy = [&](Rng& r) {
        Example out = ex;
        for (double& v : out.values) v += policy.feature_noise_sigma * r.normal();
        return out;
    };
    return {noisy(r0), noisy(r1)};
}

} // namespace dimcl
