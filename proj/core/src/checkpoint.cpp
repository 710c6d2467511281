#include "weakclr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

constexpr char kMagic[8] = {'W', 'C', 'L', 'R', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <typename U>
    void put(U v) {
        for (std::size_t b = 0; b < sizeof(U); ++b) bytes.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xff));
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
    std::vector<unsigned char> bytes;
};

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(data_[pos_ + b]) << (8 * b);
        pos_ += sizeof(U);
        return v;
    }
    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == size_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw Error("format_error", "checkpoint ends before its declared content");
    }
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const ModelState<float>& state, const std::filesystem::path& path) {
    Writer w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint64_t>(architecture_hash());
    w.put<std::uint64_t>(state.meta.seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(state.meta.provenance.size()));
    w.put_bytes(state.meta.provenance.data(), state.meta.provenance.size());

    std::uint32_t count = 0;
    state.params.for_each([&](const std::string&, const std::vector<int>&, const std::vector<float>&) { ++count; });
    w.put<std::uint32_t>(count);
    state.params.for_each([&](const std::string& name, const std::vector<int>& shape, const std::vector<float>& v) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.put_bytes(name.data(), name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (float f : v) w.put<std::uint32_t>(std::bit_cast<std::uint32_t>(f));
    });
    w.put<std::uint64_t>(fnv1a(w.bytes.data(), w.bytes.size()));

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write checkpoint '" + path.string() + "'");
        out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
        if (!out) throw Error("io_error", "failed writing checkpoint '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

ModelState<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open checkpoint '" + path.string() + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    constexpr std::size_t kMinSize = sizeof kMagic + 4 + 8 + 8 + 4 + 4 + 8;
    if (bytes.size() < kMinSize) throw Error("checksum_error", "checkpoint '" + path.string() + "' is truncated");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (int b = 0; b < 8; ++b) stored |= static_cast<std::uint64_t>(bytes[body + b]) << (8 * b);
    if (stored != fnv1a(bytes.data(), body)) {
        throw Error("checksum_error", "checkpoint '" + path.string() + "' failed its checksum (truncated or corrupt)");
    }

    Reader r(bytes.data(), body);
    if (r.get_string(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        throw Error("format_error", "'" + path.string() + "' is not a weakclr checkpoint");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw Error("format_error", "unsupported checkpoint version " + std::to_string(version));
    if (r.get<std::uint64_t>() != architecture_hash())
        throw Error("arch_mismatch", "checkpoint '" + path.string() + "' was written for a different architecture");

    ModelState<float> state;
    state.params = ModelParams<float>::zeros();
    state.meta.seed = r.get<std::uint64_t>();
    state.meta.provenance = r.get_string(r.get<std::uint32_t>());

    std::uint32_t expected = 0;
    state.params.for_each([&](const std::string&, const std::vector<int>&, std::vector<float>&) { ++expected; });
    const auto count = r.get<std::uint32_t>();
    if (count != expected) throw Error("format_error", "checkpoint holds " + std::to_string(count) + " tensors");

    state.params.for_each([&](const std::string& name, const std::vector<int>& shape, std::vector<float>& v) {
        const auto stored_name = r.get_string(r.get<std::uint16_t>());
        if (stored_name != name)
            throw Error("format_error", "expected tensor '" + name + "', found '" + stored_name + "'");
        const auto rank = r.get<std::uint32_t>();
        if (rank != shape.size()) throw Error("format_error", "rank mismatch for tensor '" + name + "'");
        for (int d : shape)
            if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(d))
                throw Error("format_error", "shape mismatch for tensor '" + name + "'");
        for (auto& f : v) f = std::bit_cast<float>(r.get<std::uint32_t>());
    });
    if (!r.at_end()) throw Error("format_error", "trailing bytes in checkpoint '" + path.string() + "'");
    return state;
}

} // namespace weakclr
