#include "weakclr/image_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "weakclr/error.hpp"

namespace weakclr {

namespace fs = std::filesystem;

fs::path sidecar_path(const fs::path& data_file) {
    fs::path p = data_file;
    p += ".json";
    return p;
}

void write_image(const fs::path& path, const Image& image) {
    std::vector<unsigned char> bytes(image.pixels.size() * 4);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(image.pixels[i]);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot open '" + path.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("io_error", "failed writing '" + path.string() + "'");
    }
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    if (!side) throw Error("io_error", "cannot write sidecar for '" + path.string() + "'");
    side << "{\"shape\": [" << image.height << ", " << image.width << "], \"dtype\": \"f32le\"}\n";
}

std::array<int, 2> read_declared_shape(const fs::path& data_file) {
    const auto side = sidecar_path(data_file);
    std::ifstream in(side);
    if (!in) throw Error("missing_file", "missing sidecar '" + side.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("parse_error", "malformed sidecar '" + side.string() + "': " + e.what());
    }
    if (!j.contains("shape") || !j["shape"].is_array() || j["shape"].size() != 2)
        throw Error("parse_error", "sidecar '" + side.string() + "' lacks a 2-element shape");
    if (j.value("dtype", std::string{}) != "f32le")
        throw Error("parse_error", "sidecar '" + side.string() + "' has unsupported dtype");
    const int h = j["shape"][0].get<int>();
    const int w = j["shape"][1].get<int>();
    if (h <= 0 || w <= 0) throw Error("parse_error", "sidecar '" + side.string() + "' has non-positive shape");
    return {h, w};
}

Image read_image(const fs::path& path) {
    const auto [h, w] = read_declared_shape(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "missing image file '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t expected = static_cast<std::size_t>(h) * w * 4;
    if (bytes.size() != expected) {
        throw Error("shape_mismatch", "'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                                          " bytes but sidecar declares " + std::to_string(h) + "x" +
                                          std::to_string(w) + " f32");
    }
    Image img(h, w);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
        img.pixels[i] = std::bit_cast<float>(bits);
    }
    return img;
}

} // namespace weakclr
