#include "weakclr/manifest.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "weakclr/error.hpp"
#include "weakclr/image_io.hpp"

namespace weakclr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kManifestFields = {"patient_id", "slices", "masks", "histo_stage", "radio_grade"};

PatientRecord parse_record(const json& j, std::size_t line_no) {
    auto where = [&] { return "manifest line " + std::to_string(line_no); };
    if (!j.is_object()) throw Error("parse_error", where() + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kManifestFields.count(key)) throw Error("parse_error", where() + ": unknown field '" + key + "'");

    PatientRecord rec;
    try {
        rec.patient_id = j.at("patient_id").get<std::string>();
        rec.slice_refs = j.at("slices").get<std::vector<std::string>>();
        if (j.contains("masks") && !j["masks"].is_null()) rec.mask_refs = j["masks"].get<std::vector<std::string>>();
        if (j.contains("histo_stage") && !j["histo_stage"].is_null())
            rec.histo_stage = parse_fibrosis_stage(j["histo_stage"].get<std::string>());
        if (j.contains("radio_grade") && !j["radio_grade"].is_null())
            rec.radio_grade = parse_radio_grade(j["radio_grade"].get<std::string>());
    } catch (const json::exception& e) {
        throw Error("parse_error", where() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(e.code(), where() + ": " + e.what());
    }
    return rec;
}

} // namespace

CohortManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open manifest '" + path.string() + "'");

    CohortManifest m;
    m.cohort_name = path.stem().string();
    m.root = path.parent_path();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("parse_error", "manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        m.patients.push_back(parse_record(j, line_no));
    }
    return m;
}

void save_manifest(const CohortManifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write manifest '" + path.string() + "'");
    for (const auto& rec : manifest.patients) {
        nlohmann::ordered_json j;
        j["patient_id"] = rec.patient_id;
        j["slices"] = rec.slice_refs;
        if (rec.mask_refs) j["masks"] = *rec.mask_refs;
        if (rec.histo_stage) j["histo_stage"] = std::string(to_string(*rec.histo_stage));
        if (rec.radio_grade) j["radio_grade"] = std::string(to_string(*rec.radio_grade));
        out << j.dump() << '\n';
    }
    if (!out) throw Error("io_error", "failed writing manifest '" + path.string() + "'");
}

std::vector<ValidationIssue> validate_manifest(CohortManifest& manifest) {
    std::vector<ValidationIssue> issues;
    auto add = [&](const std::string& id, std::string code, std::string msg) {
        issues.push_back({id, std::move(code), std::move(msg)});
    };

    std::set<std::string> seen;
    for (const auto& rec : manifest.patients) {
        if (rec.patient_id.empty()) add(rec.patient_id, "empty_id", "patient_id is empty");
        if (!seen.insert(rec.patient_id).second)
            add(rec.patient_id, "duplicate_id", "patient_id '" + rec.patient_id + "' appears more than once");
        if (!rec.histo_stage && !rec.radio_grade)
            add(rec.patient_id, "missing_label", "neither histo_stage nor radio_grade is present");
        if (rec.slice_refs.empty()) add(rec.patient_id, "no_slices", "slice list is empty");
        if (rec.mask_refs && rec.mask_refs->size() != rec.slice_refs.size()) {
            add(rec.patient_id, "mask_count_mismatch",
                std::to_string(rec.mask_refs->size()) + " masks for " + std::to_string(rec.slice_refs.size()) +
                    " slices");
        }
    }

    // First pass: read declared shapes, flag files whose byte size disagrees.
    struct FileCheck {
        const PatientRecord* rec;
        std::string ref;
        std::array<int, 2> shape;
    };
    std::vector<FileCheck> consistent;
    std::map<std::array<int, 2>, std::size_t> shape_votes;
    for (const auto& rec : manifest.patients) {
        std::vector<std::string> refs = rec.slice_refs;
        if (rec.mask_refs) refs.insert(refs.end(), rec.mask_refs->begin(), rec.mask_refs->end());
        for (const auto& ref : refs) {
            const fs::path file = manifest.root / ref;
            if (!fs::exists(file)) {
                add(rec.patient_id, "missing_file", "referenced file '" + ref + "' does not exist");
                continue;
            }
            std::array<int, 2> shape{};
            try {
                shape = read_declared_shape(file);
            } catch (const Error& e) {
                add(rec.patient_id, e.code() == "missing_file" ? "missing_sidecar" : "bad_sidecar", e.what());
                continue;
            }
            const auto expected = static_cast<std::uintmax_t>(shape[0]) * shape[1] * 4;
            const auto actual = fs::file_size(file);
            if (actual != expected) {
                add(rec.patient_id, "shape_mismatch",
                    "'" + ref + "' holds " + std::to_string(actual) + " bytes, declared " +
                        std::to_string(shape[0]) + "x" + std::to_string(shape[1]) + " f32 needs " +
                        std::to_string(expected));
                continue;
            }
            consistent.push_back({&rec, ref, shape});
            ++shape_votes[shape];
        }
    }

    // The cohort shape is the majority declared shape; everything else is flagged.
    if (!shape_votes.empty()) {
        auto best = shape_votes.begin();
        for (auto it = shape_votes.begin(); it != shape_votes.end(); ++it)
            if (it->second > best->second) best = it;
        manifest.image_height = best->first[0];
        manifest.image_width = best->first[1];
        for (const auto& fc : consistent) {
            if (fc.shape != best->first) {
                add(fc.rec->patient_id, "shape_mismatch",
                    "'" + fc.ref + "' is " + std::to_string(fc.shape[0]) + "x" + std::to_string(fc.shape[1]) +
                        " but the cohort is " + std::to_string(best->first[0]) + "x" +
                        std::to_string(best->first[1]));
            }
        }
    }
    return issues;
}

std::string issues_to_json(const std::vector<ValidationIssue>& issues) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& i : issues)
        arr.push_back(nlohmann::ordered_json{{"patient_id", i.patient_id}, {"code", i.code}, {"message", i.message}});
    return arr.dump(2);
}

CohortManifest load_validated_manifest(const fs::path& path) {
    auto m = load_manifest(path);
    const auto issues = validate_manifest(m);
    if (!issues.empty()) {
        throw Error("manifest_invalid",
                    "manifest '" + path.string() + "' failed validation:\n" + issues_to_json(issues));
    }
    if (m.patients.empty()) throw Error("manifest_invalid", "manifest '" + path.string() + "' has no patients");
    return m;
}

} // namespace weakclr
