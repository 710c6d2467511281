#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "weakclr/tensor.hpp"

namespace weakclr {

enum class LossMethod { Weak, SimCLR, SupCon, WeakSimCLR };

std::string_view to_string(LossMethod method) noexcept;
LossMethod parse_loss_method(std::string_view text);

// How SupCon combines per-anchor terms. Sum follows the displayed objective
// (no 1/2N prefactor); Mean divides by the row count like NT-Xent does.
enum class SupConReduction { Sum, Mean };

std::string_view to_string(SupConReduction r) noexcept;
SupConReduction parse_supcon_reduction(std::string_view text);

struct LossConfig {
    double temperature = 0.1;
    double beta = 0.5;
    LossMethod method = LossMethod::WeakSimCLR;
    SupConReduction supcon_reduction = SupConReduction::Sum;

    void validate() const;
};

struct LossValue {
    double value = 0.0;
    std::optional<double> weak_part;
    std::optional<double> simclr_part;
};

// Row norms of contrastive inputs may deviate from 1 by at most this much.
inline constexpr double kUnitNormTolerance = 1e-3;

// NT-Xent over 2N unit rows where rows (2k, 2k+1) are the two views of
// source k:
//   L = -(1/2N) sum_i log( exp(z_i.z_j(i)/tau) / sum_{k != i} exp(z_i.z_k/tau) )
// Log-sum-exp is stabilised by the per-row maximum. When grad is non-null it
// receives dL/dz (same shape as z).
template <typename T>
LossValue ntxent(const Matrix<T>& z, double tau, Matrix<T>* grad = nullptr);

// SupCon with P(i) = rows sharing i's label, excluding i:
//   L = sum_i (-1/|P(i)|) sum_{j in P(i)} log( exp(z_i.z_j/tau) / sum_{k != i} exp(z_i.z_k/tau) )
// labels has one entry per row and must agree within each view pair. Rows
// with empty P(i) contribute zero.
template <typename T>
LossValue supcon(const Matrix<T>& z, std::span<const int> labels, double tau, Matrix<T>* grad = nullptr,
                 SupConReduction reduction = SupConReduction::Sum);

// Mean over the batch of -log softmax(logits)[label]; logits are B x 2.
template <typename T>
LossValue weak_bce(const Matrix<T>& logits, std::span<const int> labels, Matrix<T>* grad = nullptr);

// beta * weak_bce(logits, labels) + (1 - beta) * ntxent(z, tau). z holds the
// two contrastive views of N sources (2N rows), logits the third view of the
// same N sources in the same order.
template <typename T>
LossValue weak_simclr(const Matrix<T>& z, const Matrix<T>& logits, std::span<const int> labels, double tau,
                      double beta, Matrix<T>* grad_z = nullptr, Matrix<T>* grad_logits = nullptr);

} // namespace weakclr
