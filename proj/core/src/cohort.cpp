#include "weakclr/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weakclr/error.hpp"

namespace weakclr {

int binarize_histo(FibrosisStage stage) noexcept {
    switch (stage) {
        case FibrosisStage::F0:
        case FibrosisStage::F1:
        case FibrosisStage::F2:
            return 0;
        case FibrosisStage::F3:
        case FibrosisStage::F4:
            return 1;
    }
    return 0;
}

int binarize_radio(RadioGrade grade) noexcept { return grade == RadioGrade::None ? 0 : 1; }

std::string_view to_string(FibrosisStage stage) noexcept {
    switch (stage) {
        case FibrosisStage::F0: return "F0";
        case FibrosisStage::F1: return "F1";
        case FibrosisStage::F2: return "F2";
        case FibrosisStage::F3: return "F3";
        case FibrosisStage::F4: return "F4";
    }
    return "F0";
}

std::string_view to_string(RadioGrade grade) noexcept {
    switch (grade) {
        case RadioGrade::None: return "none";
        case RadioGrade::Mild: return "mild";
        case RadioGrade::Moderate: return "moderate";
        case RadioGrade::Severe: return "severe";
    }
    return "none";
}

FibrosisStage parse_fibrosis_stage(std::string_view text) {
    for (auto s : {FibrosisStage::F0, FibrosisStage::F1, FibrosisStage::F2, FibrosisStage::F3, FibrosisStage::F4})
        if (to_string(s) == text) return s;
    throw Error("parse_error", "unknown histo_stage '" + std::string(text) + "' (expected F0..F4)");
}

RadioGrade parse_radio_grade(std::string_view text) {
    for (auto g : {RadioGrade::None, RadioGrade::Mild, RadioGrade::Moderate, RadioGrade::Severe})
        if (to_string(g) == text) return g;
    throw Error("parse_error",
                "unknown radio_grade '" + std::string(text) + "' (expected none|mild|moderate|severe)");
}

float normalize_hu(float hu) noexcept { return (std::clamp(hu, kHuLow, kHuHigh) - kHuLow) / (kHuHigh - kHuLow); }

float denormalize_hu(float unit) noexcept { return unit * (kHuHigh - kHuLow) + kHuLow; }

SliceImage preprocess_slice(const Image& raw_hu, std::string source_patient, int slice_index) {
    SliceImage out;
    out.source_patient = std::move(source_patient);
    out.slice_index = slice_index;
    out.image = Image(raw_hu.height, raw_hu.width);
    for (std::size_t i = 0; i < raw_hu.pixels.size(); ++i) {
        const float v = raw_hu.pixels[i];
        if (!std::isfinite(v)) {
            throw Error("non_finite_input", "non-finite intensity at pixel " + std::to_string(i) + " of slice " +
                                                std::to_string(slice_index) + " (patient '" +
                                                out.source_patient + "')");
        }
        out.image.pixels[i] = normalize_hu(v);
    }
    return out;
}

std::vector<int> select_central_slices(std::span<const std::int64_t> mask_areas, double fraction) {
    WEAKCLR_CHECK(fraction > 0.0 && fraction <= 1.0, "invalid_argument", "slice fraction must lie in (0, 1]");

    std::vector<int> bearing;
    std::int64_t total_area = 0;
    std::int64_t weighted = 0;
    for (std::size_t i = 0; i < mask_areas.size(); ++i) {
        WEAKCLR_CHECK(mask_areas[i] >= 0, "invalid_argument", "negative mask area");
        if (mask_areas[i] == 0) continue;
        bearing.push_back(static_cast<int>(i));
        total_area += mask_areas[i];
        weighted += mask_areas[i] * static_cast<std::int64_t>(i);
    }
    if (bearing.empty()) throw Error("no_liver", "no liver present: every mask is empty");

    const auto count = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(bearing.size()) - 1e-9));
    const std::size_t keep = std::clamp<std::size_t>(count, 1, bearing.size());

    // |i - c| compared exactly as |i * A - sum(i * a)| with c = sum(i * a) / A.
    auto distance = [&](int i) {
        const std::int64_t d = static_cast<std::int64_t>(i) * total_area - weighted;
        return d < 0 ? -d : d;
    };
    std::stable_sort(bearing.begin(), bearing.end(), [&](int a, int b) {
        const auto da = distance(a);
        const auto db = distance(b);
        return da != db ? da < db : a < b;
    });
    bearing.resize(keep);
    std::sort(bearing.begin(), bearing.end());
    return bearing;
}

std::vector<int> select_central_slices(std::span<const Image> masks, double fraction) {
    std::vector<std::int64_t> areas;
    areas.reserve(masks.size());
    for (const auto& m : masks)
        areas.push_back(std::count_if(m.pixels.begin(), m.pixels.end(), [](float v) { return v != 0.0f; }));
    return select_central_slices(std::span<const std::int64_t>(areas), fraction);
}

} // namespace weakclr
