#pragma once

#include <functional>
#include <span>
#include <vector>

namespace weakclr {

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences, one coordinate at a time. eps must lie in [1e-6, 1e-3].
std::vector<double> finite_difference_grad(const ScalarFunction& f, std::span<const double> x, double eps);

// (f(x + eps d) - f(x - eps d)) / (2 eps): a single probe for models too large
// to difference coordinate-wise.
double directional_derivative(const ScalarFunction& f, std::span<const double> x, std::span<const double> direction,
                              double eps);

// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-12);

} // namespace weakclr
