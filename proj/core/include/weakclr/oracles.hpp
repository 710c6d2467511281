#pragma once

// Reference evaluations of the contrastive objectives: plain double loops
// over the displayed formulas, no log-sum-exp, no similarity caching. Meant
// for small batches (2N <= 64) in tests and audits.

#include <span>

#include "weakclr/losses.hpp"

namespace weakclr {

LossValue oracle_ntxent(const Matrix<double>& z, double tau);
LossValue oracle_supcon(const Matrix<double>& z, std::span<const int> labels, double tau);

} // namespace weakclr
