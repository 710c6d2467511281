#include "weakclr/oracles.hpp"

#include <cmath>

namespace weakclr {

namespace {

double dot(const Matrix<double>& z, int a, int b) {
    double d = 0.0;
    for (int c = 0; c < z.cols; ++c) d += z(a, c) * z(b, c);
    return d;
}

double denominator(const Matrix<double>& z, int i, double tau) {
    double den = 0.0;
    for (int k = 0; k < z.rows; ++k)
        if (k != i) den += std::exp(dot(z, i, k) / tau);
    return den;
}

} // namespace

LossValue oracle_ntxent(const Matrix<double>& z, double tau) {
    const int m = z.rows;
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
        const int j = (i % 2 == 0) ? i + 1 : i - 1;
        sum += std::log(std::exp(dot(z, i, j) / tau) / denominator(z, i, tau));
    }
    return {-sum / m, std::nullopt, std::nullopt};
}

LossValue oracle_supcon(const Matrix<double>& z, std::span<const int> labels, double tau) {
    const int m = z.rows;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        int count = 0;
        double inner = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            ++count;
            inner += std::log(std::exp(dot(z, i, j) / tau) / denominator(z, i, tau));
        }
        if (count > 0) total += -inner / count;
    }
    return {total, std::nullopt, std::nullopt};
}

} // namespace weakclr
