#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "weakclr/probe.hpp"
#include "weakclr/synth.hpp"
#include "weakclr/train.hpp"

namespace weakclr {

struct ExperimentConfig {
    TrainConfig train;
    SynthParams synth;
    ProbeOptions probe;
    std::string radio_manifest;
    std::string histo_manifest;
    std::string init_checkpoint; // empty: train from scratch
    int fold = -1;               // -1: every fold
    bool save_fold_checkpoints = true;

    // Keys that were set by the file or an override, as opposed to defaults.
    std::set<std::string> explicit_keys;
};

// Every accepted key, in snapshot order.
const std::vector<std::string>& config_keys();

// Flat "key = value" text; '#' starts a comment. Unknown keys, malformed
// values and out-of-range values throw Error("config_error") naming the key.
// Overrides ("key=value") are applied after the file contents.
ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
ExperimentConfig default_config();

// Fully resolved config, every key listed; parsing it back gives the same
// config.
std::string config_to_text(const ExperimentConfig& config);
void write_config_snapshot(const ExperimentConfig& config, const std::filesystem::path& dir);

inline constexpr const char* kConfigSnapshotName = "config_snapshot.cfg";

} // namespace weakclr
