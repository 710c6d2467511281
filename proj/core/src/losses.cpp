#include "weakclr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "weakclr/error.hpp"

namespace weakclr {

std::string_view to_string(LossMethod method) noexcept {
    switch (method) {
        case LossMethod::Weak: return "weak";
        case LossMethod::SimCLR: return "simclr";
        case LossMethod::SupCon: return "supcon";
        case LossMethod::WeakSimCLR: return "weak_simclr";
    }
    return "weak_simclr";
}

LossMethod parse_loss_method(std::string_view text) {
    for (auto m : {LossMethod::Weak, LossMethod::SimCLR, LossMethod::SupCon, LossMethod::WeakSimCLR})
        if (to_string(m) == text) return m;
    throw Error("config_error",
                "unknown loss method '" + std::string(text) + "' (expected weak|simclr|supcon|weak_simclr)");
}

std::string_view to_string(SupConReduction r) noexcept { return r == SupConReduction::Sum ? "sum" : "mean"; }

SupConReduction parse_supcon_reduction(std::string_view text) {
    if (text == "sum") return SupConReduction::Sum;
    if (text == "mean") return SupConReduction::Mean;
    throw Error("config_error", "unknown supcon reduction '" + std::string(text) + "' (expected sum|mean)");
}

void LossConfig::validate() const {
    WEAKCLR_CHECK(temperature > 0.0 && std::isfinite(temperature), "config_error", "loss.tau must be positive");
    WEAKCLR_CHECK(beta >= 0.0 && beta <= 1.0, "config_error", "loss.beta must lie in [0, 1]");
}

namespace {

template <typename T>
void check_contrastive(const Matrix<T>& z, double tau) {
    WEAKCLR_CHECK(tau > 0.0, "invalid_argument", "temperature must be positive");
    WEAKCLR_CHECK(z.rows >= 2 && z.rows % 2 == 0, "invalid_argument",
                  "contrastive batch needs an even number (>= 2) of rows, got " + std::to_string(z.rows));
    for (int r = 0; r < z.rows; ++r) {
        double s = 0.0;
        for (T v : z.row(r)) s += static_cast<double>(v) * v;
        if (!(std::abs(std::sqrt(s) - 1.0) <= kUnitNormTolerance)) {
            throw Error("invalid_argument", "row " + std::to_string(r) + " has norm " + std::to_string(std::sqrt(s)) +
                                                ", expected unit-normalised projections");
        }
    }
}

// a_ik = z_i . z_k / tau, materialised once so a row's largest logit cancels
// exactly against itself in row_lse (a single pair then has loss exactly 0).
std::vector<double> scaled_similarity(const auto& z, double inv_tau) {
    const int m = z.rows;
    std::vector<double> s(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int k = i; k < m; ++k) {
            double d = 0.0;
            for (int c = 0; c < z.cols; ++c) d += static_cast<double>(z(i, c)) * z(k, c);
            s[static_cast<std::size_t>(i) * m + k] = s[static_cast<std::size_t>(k) * m + i] = d * inv_tau;
        }
    return s;
}

// log sum_{k != i} exp(a_ik), stabilised.
double row_lse(const std::vector<double>& a, int m, int i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k)
        if (k != i) mx = std::max(mx, a[static_cast<std::size_t>(i) * m + k]);
    double acc = 0.0;
    for (int k = 0; k < m; ++k)
        if (k != i) acc += std::exp(a[static_cast<std::size_t>(i) * m + k] - mx);
    return mx + std::log(acc);
}

// dL/dz = (G + G^T) z for L = sum_ik G_ik-weighted similarities.
template <typename T>
void similarity_grad(const Matrix<T>& z, const std::vector<double>& g, Matrix<T>& out) {
    const int m = z.rows;
    out = Matrix<T>(m, z.cols);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            const double w = g[static_cast<std::size_t>(i) * m + k] + g[static_cast<std::size_t>(k) * m + i];
            if (w == 0.0) continue;
            for (int c = 0; c < z.cols; ++c) out(i, c) += static_cast<T>(w * z(k, c));
        }
    }
}

} // namespace

template <typename T>
LossValue ntxent(const Matrix<T>& z, double tau, Matrix<T>* grad) {
    check_contrastive(z, tau);
    const int m = z.rows;
    const double inv_tau = 1.0 / tau;
    const auto a = scaled_similarity(z, inv_tau);
    std::vector<double> g(grad ? static_cast<std::size_t>(m) * m : 0, 0.0);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        const int j = i ^ 1;
        const double lse = row_lse(a, m, i);
        total += lse - a[static_cast<std::size_t>(i) * m + j];
        if (grad) {
            for (int k = 0; k < m; ++k) {
                if (k == i) continue;
                const double p = std::exp(a[static_cast<std::size_t>(i) * m + k] - lse);
                g[static_cast<std::size_t>(i) * m + k] += p * inv_tau / m;
            }
            g[static_cast<std::size_t>(i) * m + j] -= inv_tau / m;
        }
    }
    if (grad) similarity_grad(z, g, *grad);
    return {total / m, std::nullopt, std::nullopt};
}

template <typename T>
LossValue supcon(const Matrix<T>& z, std::span<const int> labels, double tau, Matrix<T>* grad,
                 SupConReduction reduction) {
    check_contrastive(z, tau);
    const int m = z.rows;
    WEAKCLR_CHECK(static_cast<int>(labels.size()) == m, "invalid_argument",
                  "supcon needs one label per row (" + std::to_string(m) + "), got " + std::to_string(labels.size()));
    for (int r = 0; r < m; r += 2)
        WEAKCLR_CHECK(labels[r] == labels[r + 1], "invalid_argument",
                      "labels differ between the two views of source " + std::to_string(r / 2));

    const double inv_tau = 1.0 / tau;
    const double scale = reduction == SupConReduction::Mean ? 1.0 / m : 1.0;
    const auto a = scaled_similarity(z, inv_tau);
    std::vector<double> g(grad ? static_cast<std::size_t>(m) * m : 0, 0.0);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        int n_pos = 0;
        double pos_sum = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            ++n_pos;
            pos_sum += a[static_cast<std::size_t>(i) * m + j];
        }
        if (n_pos == 0) continue;
        const double lse = row_lse(a, m, i);
        total += lse - pos_sum / n_pos;
        if (grad) {
            for (int k = 0; k < m; ++k) {
                if (k == i) continue;
                double w = std::exp(a[static_cast<std::size_t>(i) * m + k] - lse);
                if (labels[k] == labels[i]) w -= 1.0 / n_pos;
                g[static_cast<std::size_t>(i) * m + k] += w * inv_tau * scale;
            }
        }
    }
    if (grad) similarity_grad(z, g, *grad);
    return {total * scale, std::nullopt, std::nullopt};
}

template <typename T>
LossValue weak_bce(const Matrix<T>& logits, std::span<const int> labels, Matrix<T>* grad) {
    WEAKCLR_CHECK(logits.cols == 2, "invalid_argument", "weak_bce expects two logits per row");
    WEAKCLR_CHECK(logits.rows > 0, "invalid_argument", "weak_bce on an empty batch");
    WEAKCLR_CHECK(static_cast<int>(labels.size()) == logits.rows, "invalid_argument",
                  "weak_bce: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows) +
                      " logit rows");
    const int b = logits.rows;
    if (grad) *grad = Matrix<T>(b, 2);
    double total = 0.0;
    for (int r = 0; r < b; ++r) {
        const int y = labels[r];
        WEAKCLR_CHECK(y == 0 || y == 1, "invalid_argument", "weak_bce labels must be 0 or 1");
        const double l0 = logits(r, 0), l1 = logits(r, 1);
        const double mx = std::max(l0, l1);
        const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
        total += lse - (y == 0 ? l0 : l1);
        if (grad) {
            const double p0 = std::exp(l0 - lse), p1 = std::exp(l1 - lse);
            (*grad)(r, 0) = static_cast<T>((p0 - (y == 0 ? 1.0 : 0.0)) / b);
            (*grad)(r, 1) = static_cast<T>((p1 - (y == 1 ? 1.0 : 0.0)) / b);
        }
    }
    return {total / b, std::nullopt, std::nullopt};
}

template <typename T>
LossValue weak_simclr(const Matrix<T>& z, const Matrix<T>& logits, std::span<const int> labels, double tau,
                      double beta, Matrix<T>* grad_z, Matrix<T>* grad_logits) {
    WEAKCLR_CHECK(beta >= 0.0 && beta <= 1.0, "invalid_argument", "beta must lie in [0, 1]");
    WEAKCLR_CHECK(z.rows == 2 * logits.rows && static_cast<int>(labels.size()) == logits.rows, "source_misalignment",
                  "weak_simclr: " + std::to_string(z.rows) + " projection rows, " + std::to_string(logits.rows) +
                      " logit rows and " + std::to_string(labels.size()) + " labels do not describe the same sources");
    const LossValue contrastive = ntxent(z, tau, grad_z);
    const LossValue weak = weak_bce(logits, labels, grad_logits);
    if (grad_z)
        for (auto& v : grad_z->data) v = static_cast<T>(v * (1.0 - beta));
    if (grad_logits)
        for (auto& v : grad_logits->data) v = static_cast<T>(v * beta);
    return {beta * weak.value + (1.0 - beta) * contrastive.value, weak.value, contrastive.value};
}

#define WEAKCLR_INSTANTIATE(T)                                                                                 \
    template LossValue ntxent<T>(const Matrix<T>&, double, Matrix<T>*);                                        \
    template LossValue supcon<T>(const Matrix<T>&, std::span<const int>, double, Matrix<T>*, SupConReduction); \
    template LossValue weak_bce<T>(const Matrix<T>&, std::span<const int>, Matrix<T>*);                        \
    template LossValue weak_simclr<T>(const Matrix<T>&, const Matrix<T>&, std::span<const int>, double, double, \
                                      Matrix<T>*, Matrix<T>*);

WEAKCLR_INSTANTIATE(float)
WEAKCLR_INSTANTIATE(double)

#undef WEAKCLR_INSTANTIATE

} // namespace weakclr
