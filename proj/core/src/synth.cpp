#include "weakclr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "weakclr/error.hpp"
#include "weakclr/image_io.hpp"
#include "weakclr/manifest.hpp"
#include "weakclr/rng.hpp"

namespace weakclr {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kLabelStream = 0x1abe1;
constexpr std::uint64_t kPermutationStream = 0x9e2a;

constexpr float kAirHu = -1000.0f;
constexpr float kSpineHu = 350.0f;
constexpr double kNoiseHu = 10.0;
constexpr double kNoduleHu = 20.0;     // per unit texture_strength
constexpr double kContourRipple = 0.08; // relative radius ripple per unit texture_strength

// Per-patient anatomy, drawn once and shared by all slices of the patient.
struct Anatomy {
    double body_cx, body_cy, body_ax, body_ay;
    double liver_cx, liver_cy, liver_a, liver_b, liver_theta;
    double z_center, z_radius;
    double liver_hu, body_hu;
    std::array<int, 3> ripple_freq;
    std::array<double, 3> ripple_phase;
};

Anatomy draw_anatomy(const SynthParams& p, std::uint64_t patient_seed) {
    Rng rng(patient_seed);
    const double s = p.image_size;
    const double n = p.slices_per_patient;
    Anatomy a{};
    a.body_cx = s * (0.5 + 0.02 * rng.normal());
    a.body_cy = s * (0.5 + 0.02 * rng.normal());
    a.body_ax = s * rng.uniform(0.40, 0.46);
    a.body_ay = s * rng.uniform(0.32, 0.38);
    a.liver_cx = s * (0.38 + rng.uniform(-0.04, 0.04));
    a.liver_cy = s * (0.45 + rng.uniform(-0.04, 0.04));
    a.liver_a = s * rng.uniform(0.17, 0.22);
    a.liver_b = s * rng.uniform(0.13, 0.17);
    a.liver_theta = rng.uniform(-0.3, 0.3);
    a.z_center = (n - 1.0) / 2.0 + rng.uniform(-0.5, 0.5);
    a.z_radius = n * rng.uniform(0.40, 0.55);
    a.liver_hu = 55.0 + 8.0 * rng.normal();
    a.body_hu = 5.0 * rng.normal();
    for (int m = 0; m < 3; ++m) {
        a.ripple_freq[m] = 6 + static_cast<int>(rng.index(7));
        a.ripple_phase[m] = rng.uniform(0.0, 2.0 * M_PI);
    }
    return a;
}

double ellipse_radius(double dx, double dy, double ax, double ay) {
    return std::sqrt((dx * dx) / (ax * ax) + (dy * dy) / (ay * ay));
}

} // namespace

void SynthParams::validate() const {
    WEAKCLR_CHECK(n_patients > 0, "config_error", "synth.n_patients must be positive");
    WEAKCLR_CHECK(positive_fraction > 0.0 && positive_fraction < 1.0, "config_error",
                  "synth.positive_fraction must lie in (0, 1)");
    WEAKCLR_CHECK(slices_per_patient > 0, "config_error", "synth.slices_per_patient must be positive");
    WEAKCLR_CHECK(image_size > 0, "config_error", "synth.image_size must be positive");
    WEAKCLR_CHECK(weak_noise_rate >= 0.0 && weak_noise_rate < 1.0, "config_error",
                  "synth.weak_noise_rate must lie in [0, 1)");
    WEAKCLR_CHECK(texture_strength > 0.0, "config_error", "synth.texture_strength must be positive");
}

PhantomSlice render_phantom_slice(const SynthParams& p, std::uint64_t patient_seed, int slice_index,
                                  bool positive) {
    const Anatomy a = draw_anatomy(p, patient_seed);
    Rng rng(derive_seed(patient_seed, {static_cast<std::uint64_t>(slice_index)}));
    const int size = p.image_size;
    const double t = positive ? p.texture_strength : 0.0;

    // Ellipsoid cross-section: the organ shrinks away from its axial centre.
    const double dz = (slice_index - a.z_center) / a.z_radius;
    double scale = dz * dz < 1.0 ? std::sqrt(1.0 - dz * dz) : 0.0;
    if (scale < 0.25) scale = 0.0;

    struct Nodule {
        double x, y, r, hu;
    };
    std::vector<Nodule> nodules;
    if (scale > 0.0 && t > 0.0) {
        const int count = 10;
        for (int k = 0; k < count; ++k) {
            const double rho = std::sqrt(rng.uniform()) * 0.85;
            const double phi = rng.uniform(0.0, 2.0 * M_PI);
            const double lx = rho * std::cos(phi) * a.liver_a * scale;
            const double ly = rho * std::sin(phi) * a.liver_b * scale;
            const double c = std::cos(a.liver_theta), s = std::sin(a.liver_theta);
            Nodule nd;
            nd.x = a.liver_cx + c * lx - s * ly;
            nd.y = a.liver_cy + s * lx + c * ly;
            nd.r = size * rng.uniform(0.03, 0.05);
            nd.hu = (rng.bernoulli(0.5) ? 1.0 : -1.0) * kNoduleHu * t;
            nodules.push_back(nd);
        }
    }
    const double slice_phase = 0.15 * slice_index;

    PhantomSlice out{Image(size, size, kAirHu), Image(size, size, 0.0f)};
    const double spine_x = a.body_cx, spine_y = a.body_cy + 0.7 * a.body_ay, spine_r = 0.06 * size;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double x = c + 0.5, y = r + 0.5;
            if (ellipse_radius(x - a.body_cx, y - a.body_cy, a.body_ax, a.body_ay) > 1.0) continue;

            double hu = a.body_hu;
            const double sx = x - spine_x, sy = y - spine_y;
            if (sx * sx + sy * sy <= spine_r * spine_r) hu = kSpineHu;

            if (scale > 0.0) {
                const double cth = std::cos(a.liver_theta), sth = std::sin(a.liver_theta);
                const double dx = x - a.liver_cx, dy = y - a.liver_cy;
                const double lx = cth * dx + sth * dy;
                const double ly = -sth * dx + cth * dy;
                const double rad = ellipse_radius(lx, ly, a.liver_a * scale, a.liver_b * scale);
                double limit = 1.0;
                if (t > 0.0) {
                    const double angle = std::atan2(ly / a.liver_b, lx / a.liver_a);
                    double ripple = 0.0;
                    for (int m = 0; m < 3; ++m)
                        ripple += std::sin(a.ripple_freq[m] * angle + a.ripple_phase[m] + slice_phase);
                    limit += kContourRipple * t * ripple / 3.0;
                }
                if (rad <= limit) {
                    hu = a.liver_hu;
                    for (const auto& nd : nodules) {
                        const double nx = x - nd.x, ny = y - nd.y;
                        const double d2 = (nx * nx + ny * ny) / (nd.r * nd.r);
                        if (d2 < 4.0) hu += nd.hu * std::exp(-d2);
                    }
                    out.mask.at(r, c) = 1.0f;
                }
            }
            out.hu.at(r, c) = static_cast<float>(hu + kNoiseHu * rng.normal());
        }
    }
    return out;
}

SynthResult generate_synthetic_cohort(const SynthParams& params, const fs::path& out_dir) {
    params.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "slices", ec);
    if (ec) throw Error("io_error", "cannot create output directory '" + out_dir.string() + "': " + ec.message());

    const int n = params.n_patients;
    const int n_pos = std::clamp(static_cast<int>(std::lround(params.positive_fraction * n)), 0, n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng perm(derive_seed(params.seed, {kPermutationStream}));
    perm.shuffle(order.begin(), order.end());
    std::vector<bool> positive(n, false);
    for (int i = 0; i < n_pos; ++i) positive[order[i]] = true;

    SynthResult result;
    auto& m = result.manifest;
    m.cohort_name = "manifest";
    m.root = out_dir;
    m.image_height = m.image_width = params.image_size;
    result.stats.n_patients = n;

    for (int i = 0; i < n; ++i) {
        const std::uint64_t pseed = derive_seed(params.seed, {static_cast<std::uint64_t>(i)});
        Rng label_rng(derive_seed(pseed, {kLabelStream}));

        PatientRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "P%04d", i);
        rec.patient_id = id;
        const int y = positive[i] ? 1 : 0;
        rec.histo_stage = y ? (label_rng.bernoulli(0.5) ? FibrosisStage::F4 : FibrosisStage::F3)
                            : static_cast<FibrosisStage>(label_rng.index(3));
        const int y_radio = label_rng.bernoulli(params.weak_noise_rate) ? 1 - y : y;
        rec.radio_grade = y_radio ? static_cast<RadioGrade>(1 + label_rng.index(3)) : RadioGrade::None;

        rec.mask_refs.emplace();
        for (int s = 0; s < params.slices_per_patient; ++s) {
            char name[64];
            std::snprintf(name, sizeof name, "slices/%s_s%02d.f32", id, s);
            char mask_name[64];
            std::snprintf(mask_name, sizeof mask_name, "slices/%s_m%02d.f32", id, s);
            const auto slice = render_phantom_slice(params, pseed, s, y == 1);
            write_image(out_dir / name, slice.hu);
            write_image(out_dir / mask_name, slice.mask);
            rec.slice_refs.emplace_back(name);
            rec.mask_refs->emplace_back(mask_name);
        }

        result.stats.n_positive_histo += y;
        result.stats.n_positive_radio += y_radio;
        result.stats.n_label_disagreements += (y != y_radio);
        m.patients.push_back(std::move(rec));
    }

    save_manifest(m, out_dir / "manifest.jsonl");
    nlohmann::ordered_json stats{{"n_patients", result.stats.n_patients},
                                 {"n_positive_histo", result.stats.n_positive_histo},
                                 {"n_positive_radio", result.stats.n_positive_radio},
                                 {"n_label_disagreements", result.stats.n_label_disagreements},
                                 {"seed", params.seed}};
    std::ofstream(out_dir / "stats.json", std::ios::trunc) << stats.dump(2) << '\n';
    return result;
}

} // namespace weakclr
