#pragma once

#include <array>
#include <filesystem>

#include "weakclr/cohort.hpp"

namespace weakclr {

// Slice/mask files are raw little-endian float32, row-major, next to a JSON
// sidecar "<file>.json" holding {"shape": [H, W], "dtype": "f32le"}.

std::filesystem::path sidecar_path(const std::filesystem::path& data_file);

void write_image(const std::filesystem::path& path, const Image& image);

// Declared shape from the sidecar, {H, W}.
std::array<int, 2> read_declared_shape(const std::filesystem::path& data_file);

// Reads and checks that the byte size agrees with the sidecar.
Image read_image(const std::filesystem::path& path);

} // namespace weakclr
