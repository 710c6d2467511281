#include <gtest/gtest.h>

#include <json.hpp>

#include "test_support.hpp"
#include "weakclr/error.hpp"
#include "weakclr/image_io.hpp"
#include "weakclr/manifest.hpp"

using namespace weakclr;
using weakclr::testing::TempDir;
using weakclr::testing::write_text;

namespace {

Image ramp(int h, int w) {
    Image img(h, w);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i) - 3.5f;
    return img;
}

// Two patients, two slices each, with masks.
void write_small_cohort(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "s");
    for (const char* id : {"A", "B"}) {
        for (int k = 0; k < 2; ++k) {
            write_image(dir / "s" / (std::string(id) + std::to_string(k) + ".f32"), ramp(4, 6));
            write_image(dir / "s" / (std::string(id) + "m" + std::to_string(k) + ".f32"), Image(4, 6, 1.0f));
        }
    }
    write_text(dir / "cohort.jsonl",
               R"({"patient_id":"A","slices":["s/A0.f32","s/A1.f32"],"masks":["s/Am0.f32","s/Am1.f32"],"histo_stage":"F1","radio_grade":"mild"})"
               "\n"
               R"({"patient_id":"B","slices":["s/B0.f32","s/B1.f32"],"histo_stage":"F4"})"
               "\n");
}

std::vector<std::string> codes(const std::vector<ValidationIssue>& issues) {
    std::vector<std::string> out;
    for (const auto& i : issues) out.push_back(i.code);
    return out;
}

} // namespace

TEST(ImageIo, RoundTripWithSidecar) {
    TempDir dir("imgio");
    const Image img = ramp(3, 5);
    write_image(dir / "x.f32", img);
    EXPECT_EQ(std::filesystem::file_size(dir / "x.f32"), 3u * 5u * 4u);
    const auto sidecar = nlohmann::json::parse(weakclr::testing::read_bytes(sidecar_path(dir / "x.f32")));
    EXPECT_EQ(sidecar["shape"], nlohmann::json({3, 5}));
    EXPECT_EQ(sidecar["dtype"], "f32le");
    EXPECT_EQ(read_image(dir / "x.f32"), img);
}

TEST(ImageIo, LittleEndianBytes) {
    TempDir dir("imgio_le");
    Image img(1, 1);
    img.pixels[0] = 1.0f; // 0x3f800000
    write_image(dir / "one.f32", img);
    const std::string bytes = weakclr::testing::read_bytes(dir / "one.f32");
    ASSERT_EQ(bytes.size(), 4u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0x3f);
}

TEST(ImageIo, ByteSizeDisagreeingWithSidecarIsShapeMismatch) {
    TempDir dir("imgio_bad");
    write_image(dir / "x.f32", ramp(2, 2));
    write_text(sidecar_path(dir / "x.f32"), R"({"shape": [3, 3], "dtype": "f32le"})");
    try {
        read_image(dir / "x.f32");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "shape_mismatch");
    }
}

TEST(Manifest, WellFormedTwoPatients) {
    TempDir dir("manifest_ok");
    write_small_cohort(dir.path());
    CohortManifest m = load_manifest(dir / "cohort.jsonl");
    ASSERT_EQ(m.patients.size(), 2u);
    EXPECT_EQ(m.cohort_name, "cohort");
    EXPECT_EQ(m.patients[0].patient_id, "A");
    EXPECT_EQ(m.patients[0].y_histo(), 0);
    EXPECT_EQ(m.patients[0].y_radio(), 1);
    EXPECT_FALSE(m.patients[1].mask_refs.has_value());
    EXPECT_FALSE(m.patients[1].radio_grade.has_value());
    EXPECT_TRUE(validate_manifest(m).empty());
    EXPECT_EQ(m.image_height, 4);
    EXPECT_EQ(m.image_width, 6);
}

TEST(Manifest, DuplicateIdReportedOnce) {
    TempDir dir("manifest_dup");
    write_small_cohort(dir.path());
    write_text(dir / "cohort.jsonl",
               R"({"patient_id":"A","slices":["s/A0.f32"],"histo_stage":"F1"})"
               "\n"
               R"({"patient_id":"A","slices":["s/B0.f32"],"histo_stage":"F4"})"
               "\n");
    CohortManifest m = load_manifest(dir / "cohort.jsonl");
    const auto issues = validate_manifest(m);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].code, "duplicate_id");
    EXPECT_EQ(issues[0].patient_id, "A");
}

TEST(Manifest, WrongDeclaredShapeReportedOnce) {
    TempDir dir("manifest_shape");
    write_small_cohort(dir.path());
    write_text(sidecar_path(dir / "s" / "B1.f32"), R"({"shape": [5, 6], "dtype": "f32le"})");
    CohortManifest m = load_manifest(dir / "cohort.jsonl");
    const auto issues = validate_manifest(m);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].code, "shape_mismatch");
    EXPECT_EQ(issues[0].patient_id, "B");
}

TEST(Manifest, ShapeDifferentFromCohortIsFlagged) {
    TempDir dir("manifest_cohort_shape");
    write_small_cohort(dir.path());
    write_image(dir / "s" / "B1.f32", ramp(8, 8));
    CohortManifest m = load_manifest(dir / "cohort.jsonl");
    const auto issues = validate_manifest(m);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].code, "shape_mismatch");
    EXPECT_EQ(issues[0].patient_id, "B");
}

TEST(Manifest, EveryViolationIsListed) {
    TempDir dir("manifest_many");
    write_small_cohort(dir.path());
    std::filesystem::remove(dir / "s" / "A1.f32");
    std::filesystem::remove(sidecar_path(dir / "s" / "B0.f32"));
    write_text(dir / "cohort.jsonl",
               R"({"patient_id":"A","slices":["s/A0.f32","s/A1.f32"],"masks":["s/Am0.f32"],"histo_stage":"F1"})"
               "\n"
               R"({"patient_id":"B","slices":["s/B0.f32"]})"
               "\n"
               R"({"patient_id":"C","slices":[],"radio_grade":"none"})"
               "\n");
    CohortManifest m = load_manifest(dir / "cohort.jsonl");
    auto got = codes(validate_manifest(m));
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<std::string>{"mask_count_mismatch", "missing_file", "missing_label", "missing_sidecar",
                                             "no_slices"}));
}

TEST(Manifest, UnknownFieldAndBadStageAreParseErrors) {
    TempDir dir("manifest_parse");
    write_text(dir / "m.jsonl", R"({"patient_id":"A","slices":["a"],"histo_stage":"F1","split":"train"})"
                                "\n");
    EXPECT_THROW(load_manifest(dir / "m.jsonl"), Error);
    write_text(dir / "m.jsonl", R"({"patient_id":"A","slices":["a"],"histo_stage":"F9"})"
                                "\n");
    EXPECT_THROW(load_manifest(dir / "m.jsonl"), Error);
    write_text(dir / "m.jsonl", "{not json\n");
    try {
        load_manifest(dir / "m.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "parse_error");
    }
    EXPECT_THROW(load_manifest(dir / "absent.jsonl"), Error);
}

TEST(Manifest, SaveLoadRoundTrip) {
    TempDir dir("manifest_rt");
    write_small_cohort(dir.path());
    const CohortManifest m = load_manifest(dir / "cohort.jsonl");
    save_manifest(m, dir / "copy.jsonl");
    const CohortManifest back = load_manifest(dir / "copy.jsonl");
    ASSERT_EQ(back.patients.size(), m.patients.size());
    for (std::size_t i = 0; i < m.patients.size(); ++i) {
        EXPECT_EQ(back.patients[i].patient_id, m.patients[i].patient_id);
        EXPECT_EQ(back.patients[i].slice_refs, m.patients[i].slice_refs);
        EXPECT_EQ(back.patients[i].mask_refs, m.patients[i].mask_refs);
        EXPECT_EQ(back.patients[i].histo_stage, m.patients[i].histo_stage);
        EXPECT_EQ(back.patients[i].radio_grade, m.patients[i].radio_grade);
    }
    EXPECT_EQ(weakclr::testing::read_bytes(dir / "copy.jsonl"), weakclr::testing::read_bytes(dir / "cohort.jsonl"));
}

TEST(Manifest, ValidatedLoadThrowsWithReport) {
    TempDir dir("manifest_validated");
    write_small_cohort(dir.path());
    std::filesystem::remove(dir / "s" / "A0.f32");
    try {
        load_validated_manifest(dir / "cohort.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "manifest_invalid");
        EXPECT_NE(std::string(e.what()).find("missing_file"), std::string::npos);
    }
}
