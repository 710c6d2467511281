#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "weakclr/rng.hpp"
#include "weakclr/tensor.hpp"

namespace weakclr::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
        path_ = std::filesystem::temp_directory_path() / ("weakclr_" + tag + "_" + std::to_string(rng.next_u64()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

// Rows drawn from an isotropic Gaussian and scaled to unit length.
template <typename T>
Matrix<T> random_unit_rows(int rows, int dim, Rng& rng) {
    Matrix<T> z(rows, dim);
    for (int r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (auto& v : z.row(r)) {
            v = static_cast<T>(rng.normal());
            norm += static_cast<double>(v) * static_cast<double>(v);
        }
        norm = std::sqrt(norm);
        for (auto& v : z.row(r)) v = static_cast<T>(static_cast<double>(v) / norm);
    }
    return z;
}

template <typename T>
Matrix<T> random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Matrix<T> m(rows, cols);
    for (auto& v : m.data) v = static_cast<T>(scale * rng.normal());
    return m;
}

// Random orthogonal matrix (Gram-Schmidt on Gaussian columns).
inline Matrix<double> random_rotation(int dim, Rng& rng) {
    Matrix<double> q(dim, dim);
    for (auto& v : q.data) v = rng.normal();
    for (int c = 0; c < dim; ++c) {
        for (int p = 0; p < c; ++p) {
            double dot = 0.0;
            for (int r = 0; r < dim; ++r) dot += q(r, c) * q(r, p);
            for (int r = 0; r < dim; ++r) q(r, c) -= dot * q(r, p);
        }
        double norm = 0.0;
        for (int r = 0; r < dim; ++r) norm += q(r, c) * q(r, c);
        norm = std::sqrt(norm);
        for (int r = 0; r < dim; ++r) q(r, c) /= norm;
    }
    return q;
}

inline Matrix<double> matmul(const Matrix<double>& a, const Matrix<double>& b) {
    Matrix<double> out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k)
            for (int j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
}

} // namespace weakclr::testing
