#pragma once

// Cohort data model: fibrosis / radiology labels, per-slice preprocessing and
// central-slice selection.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace weakclr {

enum class FibrosisStage { F0, F1, F2, F3, F4 };
enum class RadioGrade { None, Mild, Moderate, Severe };

// F0/F1/F2 -> 0, F3/F4 -> 1 (advanced fibrosis).
int binarize_histo(FibrosisStage stage) noexcept;
// None -> 0, Mild/Moderate/Severe -> 1.
int binarize_radio(RadioGrade grade) noexcept;

std::string_view to_string(FibrosisStage stage) noexcept;
std::string_view to_string(RadioGrade grade) noexcept;
FibrosisStage parse_fibrosis_stage(std::string_view text);
RadioGrade parse_radio_grade(std::string_view text);

struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> pixels; // row-major

    Image() = default;
    Image(int h, int w, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

    bool operator==(const Image&) const = default;
};

// A preprocessed slice: every pixel in [0, 1].
struct SliceImage {
    Image image;
    std::string source_patient;
    int slice_index = 0;
};

struct PatientRecord {
    std::string patient_id;
    std::vector<std::string> slice_refs;
    std::optional<std::vector<std::string>> mask_refs;
    std::optional<FibrosisStage> histo_stage;
    std::optional<RadioGrade> radio_grade;

    std::optional<int> y_histo() const {
        if (!histo_stage) return std::nullopt;
        return binarize_histo(*histo_stage);
    }
    std::optional<int> y_radio() const {
        if (!radio_grade) return std::nullopt;
        return binarize_radio(*radio_grade);
    }
};

struct CohortManifest {
    std::string cohort_name;
    std::filesystem::path root; // slice references are relative to this
    int image_height = 0;
    int image_width = 0;
    std::vector<PatientRecord> patients;
};

inline constexpr float kHuLow = -100.0f;
inline constexpr float kHuHigh = 400.0f;

// (clamp(v, -100, 400) + 100) / 500
float normalize_hu(float hu) noexcept;
float denormalize_hu(float unit) noexcept;

// Throws Error("non_finite_input") when any pixel is NaN or infinite.
SliceImage preprocess_slice(const Image& raw_hu, std::string source_patient = {}, int slice_index = 0);

// Picks the ceil(fraction * |S|) liver-bearing slices closest to the
// area-weighted centre index, where S is the set of slices with nonzero mask
// area. Ties go to the smaller index; the result is sorted ascending.
std::vector<int> select_central_slices(std::span<const std::int64_t> mask_areas, double fraction);
std::vector<int> select_central_slices(std::span<const Image> masks, double fraction);

} // namespace weakclr
