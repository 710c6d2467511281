#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "weakclr/cohort.hpp"

namespace weakclr {

// Parameters of the synthetic phantom cohort.
struct SynthParams {
    int n_patients = 100;
    double positive_fraction = 0.3;
    int slices_per_patient = 8;
    int image_size = 64;
    double weak_noise_rate = 0.2;  // P(radiological label contradicts histology)
    double texture_strength = 3.0; // amplitude of the positive-class surface texture
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthStats {
    int n_patients = 0;
    int n_positive_histo = 0;
    int n_positive_radio = 0;
    int n_label_disagreements = 0;
};

struct SynthResult {
    CohortManifest manifest;
    SynthStats stats;
};

// Writes <out_dir>/manifest.jsonl, <out_dir>/stats.json and raw HU slices plus
// liver masks under <out_dir>/slices/. Output bytes depend only on params.
SynthResult generate_synthetic_cohort(const SynthParams& params, const std::filesystem::path& out_dir);

// Single phantom slice in Hounsfield units, exposed for tests and benchmarks.
struct PhantomSlice {
    Image hu;
    Image mask;
};
PhantomSlice render_phantom_slice(const SynthParams& params, std::uint64_t patient_seed, int slice_index,
                                  bool positive);

} // namespace weakclr
