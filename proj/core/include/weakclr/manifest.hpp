#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "weakclr/cohort.hpp"

namespace weakclr {

struct ValidationIssue {
    std::string patient_id;
    std::string code;
    std::string message;
};

// Parses a JSON-lines manifest. Structural errors (bad JSON, unknown stage
// strings, unknown fields) throw; content problems are left for
// validate_manifest so they can be reported together.
CohortManifest load_manifest(const std::filesystem::path& path);

void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

// Checks every CohortManifest invariant and lists each violation. On success
// the manifest's image_height/image_width are filled from the slice sidecars.
std::vector<ValidationIssue> validate_manifest(CohortManifest& manifest);

std::string issues_to_json(const std::vector<ValidationIssue>& issues);

// load + validate; throws Error("manifest_invalid") carrying the report JSON.
CohortManifest load_validated_manifest(const std::filesystem::path& path);

} // namespace weakclr
