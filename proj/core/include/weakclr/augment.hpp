#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weakclr/cohort.hpp"
#include "weakclr/rng.hpp"

namespace weakclr {

struct AugmentConfig {
    double crop_low = 0.5;
    double crop_high = 1.0;
    double rotation_degrees = 30.0;
    double flip_prob = 0.5;
    bool cutout_enabled = false;
    double cutout_size_fraction = 0.25;

    static AugmentConfig identity() { return {1.0, 1.0, 0.0, 0.0, false, 0.25}; }
    bool is_identity() const {
        return crop_low == 1.0 && crop_high == 1.0 && rotation_degrees == 0.0 && flip_prob == 0.0 && !cutout_enabled;
    }
    void validate() const;
};

struct ViewSet {
    std::vector<Image> views;
    std::string origin;
};

// Crop side lengths never go below this many pixels (or the image side).
inline constexpr int kMinCropSide = 8;

// Random axis-aligned crop whose area fraction is uniform in [low, high],
// bilinearly resized back to the input shape.
Image random_resized_crop(const Image& img, Rng& rng, double scale_low, double scale_high);

Image flip_image(const Image& img, bool horizontal, bool vertical);
// Horizontal and vertical mirrors, each with probability flip_prob.
Image random_flip(const Image& img, Rng& rng, double flip_prob);

// Rotation about the image centre, bilinear, zero outside the source.
Image rotate_image(const Image& img, double degrees);
Image random_rotate(const Image& img, Rng& rng, double max_degrees);

// Zeroes one square of side size_fraction * min(H, W).
Image cutout(const Image& img, Rng& rng, double size_fraction);

// crop -> flip -> rotate -> [cutout]
Image augment_once(const Image& img, Rng& rng, const AugmentConfig& config);

// n_views independent pipeline draws, sequentially from rng.
ViewSet make_views(const SliceImage& slice, Rng& rng, int n_views, const AugmentConfig& config);

// Stream used for a given view: a pure function of its coordinates.
std::uint64_t view_seed(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t sample_index,
                        std::uint64_t view_index);

ViewSet make_views_seeded(const SliceImage& slice, std::uint64_t global_seed, std::uint64_t epoch,
                          std::uint64_t sample_index, int n_views, const AugmentConfig& config);

} // namespace weakclr
