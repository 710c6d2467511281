#include "weakclr/augment.hpp"

#include <algorithm>
#include <cmath>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

// Bilinear sample at continuous pixel coordinates; neighbours outside the
// image contribute zero.
float sample_zero_fill(const Image& img, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    auto px = [&](int r, int c) -> double {
        if (r < 0 || c < 0 || r >= img.height || c >= img.width) return 0.0;
        return img.at(r, c);
    };
    double v = 0.0;
    if (fy == 0.0 && fx == 0.0) return static_cast<float>(px(y0, x0));
    v += (1.0 - fy) * (1.0 - fx) * px(y0, x0);
    v += (1.0 - fy) * fx * px(y0, x0 + 1);
    v += fy * (1.0 - fx) * px(y0 + 1, x0);
    v += fy * fx * px(y0 + 1, x0 + 1);
    return static_cast<float>(v);
}

} // namespace

void AugmentConfig::validate() const {
    WEAKCLR_CHECK(crop_low > 0.0 && crop_low <= crop_high && crop_high <= 1.0, "config_error",
                  "aug.crop_low/aug.crop_high must satisfy 0 < low <= high <= 1");
    WEAKCLR_CHECK(rotation_degrees >= 0.0 && rotation_degrees <= 180.0, "config_error",
                  "aug.rot_deg must lie in [0, 180]");
    WEAKCLR_CHECK(flip_prob >= 0.0 && flip_prob <= 1.0, "config_error", "aug.flip_p must lie in [0, 1]");
    WEAKCLR_CHECK(cutout_size_fraction > 0.0 && cutout_size_fraction < 1.0, "config_error",
                  "aug.cutout_frac must lie in (0, 1)");
}

Image random_resized_crop(const Image& img, Rng& rng, double scale_low, double scale_high) {
    const int H = img.height, W = img.width;
    const double area = rng.uniform(scale_low, scale_high) * H * W;
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    int cw = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    cw = std::clamp(cw, std::min(kMinCropSide, W), W);
    // the height absorbs any clamping of the width so the area fraction holds
    int ch = static_cast<int>(std::lround(area / cw));
    ch = std::clamp(ch, std::min(kMinCropSide, H), H);
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(H - ch + 1)));
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(W - cw + 1)));

    if (ch == H && cw == W) return img;

    Image out(H, W);
    const double sy = static_cast<double>(ch) / H;
    const double sx = static_cast<double>(cw) / W;
    for (int r = 0; r < H; ++r) {
        const double y = std::clamp(y0 + (r + 0.5) * sy - 0.5, static_cast<double>(y0), y0 + ch - 1.0);
        const int yi = std::min(static_cast<int>(y), y0 + ch - 1);
        const int yj = std::min(yi + 1, y0 + ch - 1);
        const double fy = y - yi;
        for (int c = 0; c < W; ++c) {
            const double x = std::clamp(x0 + (c + 0.5) * sx - 0.5, static_cast<double>(x0), x0 + cw - 1.0);
            const int xi = std::min(static_cast<int>(x), x0 + cw - 1);
            const int xj = std::min(xi + 1, x0 + cw - 1);
            const double fx = x - xi;
            const double v = (1.0 - fy) * ((1.0 - fx) * img.at(yi, xi) + fx * img.at(yi, xj)) +
                             fy * ((1.0 - fx) * img.at(yj, xi) + fx * img.at(yj, xj));
            out.at(r, c) = clamp01(static_cast<float>(v));
        }
    }
    return out;
}

Image flip_image(const Image& img, bool horizontal, bool vertical) {
    if (!horizontal && !vertical) return img;
    Image out(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
        const int sr = vertical ? img.height - 1 - r : r;
        for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(sr, horizontal ? img.width - 1 - c : c);
    }
    return out;
}

Image random_flip(const Image& img, Rng& rng, double flip_prob) {
    const bool h = rng.bernoulli(flip_prob);
    const bool v = rng.bernoulli(flip_prob);
    return flip_image(img, h, v);
}

Image rotate_image(const Image& img, double degrees) {
    if (degrees == 0.0) return img;
    const double rad = degrees * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
    Image out(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            // inverse map: rotate the output coordinate back by -angle
            const double dy = r - cy, dx = c - cx;
            const double sx = cs * dx + sn * dy + cx;
            const double sy = -sn * dx + cs * dy + cy;
            out.at(r, c) = clamp01(sample_zero_fill(img, sy, sx));
        }
    }
    return out;
}

Image random_rotate(const Image& img, Rng& rng, double max_degrees) {
    const double angle = rng.uniform(-max_degrees, max_degrees);
    return rotate_image(img, angle);
}

Image cutout(const Image& img, Rng& rng, double size_fraction) {
    const int side = std::max(1, static_cast<int>(std::lround(size_fraction * std::min(img.height, img.width))));
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(img.height - side + 1)));
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(img.width - side + 1)));
    Image out = img;
    for (int r = y0; r < y0 + side; ++r)
        for (int c = x0; c < x0 + side; ++c) out.at(r, c) = 0.0f;
    return out;
}

Image augment_once(const Image& img, Rng& rng, const AugmentConfig& config) {
    if (config.is_identity()) return img;
    Image out = (config.crop_low == 1.0 && config.crop_high == 1.0)
                    ? img
                    : random_resized_crop(img, rng, config.crop_low, config.crop_high);
    out = random_flip(out, rng, config.flip_prob);
    if (config.rotation_degrees > 0.0) out = random_rotate(out, rng, config.rotation_degrees);
    if (config.cutout_enabled) out = cutout(out, rng, config.cutout_size_fraction);
    return out;
}

ViewSet make_views(const SliceImage& slice, Rng& rng, int n_views, const AugmentConfig& config) {
    WEAKCLR_CHECK(n_views == 2 || n_views == 3 || n_views == 1, "invalid_argument", "n_views must be 1, 2 or 3");
    ViewSet vs;
    vs.origin = slice.source_patient + "#" + std::to_string(slice.slice_index);
    for (int v = 0; v < n_views; ++v) vs.views.push_back(augment_once(slice.image, rng, config));
    return vs;
}

std::uint64_t view_seed(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index,
                        std::uint64_t view_index) {
    return derive_seed(global_seed, {0xa09e, epoch, sample_index, view_index});
}

ViewSet make_views_seeded(const SliceImage& slice, std::uint64_t global_seed, std::uint64_t epoch,
                          std::uint64_t sample_index, int n_views, const AugmentConfig& config) {
    WEAKCLR_CHECK(n_views >= 1 && n_views <= 3, "invalid_argument", "n_views must be 1, 2 or 3");
    ViewSet vs;
    vs.origin = slice.source_patient + "#" + std::to_string(slice.slice_index);
    for (int v = 0; v < n_views; ++v) {
        Rng rng(view_seed(global_seed, epoch, sample_index, static_cast<std::uint64_t>(v)));
        vs.views.push_back(augment_once(slice.image, rng, config));
    }
    return vs;
}

} // namespace weakclr
