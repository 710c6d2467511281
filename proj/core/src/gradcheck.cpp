#include "weakclr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "weakclr/error.hpp"

namespace weakclr {

namespace {

void check_eps(double eps) {
    WEAKCLR_CHECK(eps >= 1e-6 && eps <= 1e-3, "invalid_argument", "finite-difference step must lie in [1e-6, 1e-3]");
}

} // namespace

std::vector<double> finite_difference_grad(const ScalarFunction& f, std::span<const double> x, double eps) {
    check_eps(eps);
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + eps;
        const double up = f(point);
        point[i] = orig - eps;
        const double down = f(point);
        point[i] = orig;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double directional_derivative(const ScalarFunction& f, std::span<const double> x, std::span<const double> direction,
                              double eps) {
    check_eps(eps);
    WEAKCLR_CHECK(x.size() == direction.size(), "invalid_argument", "direction size differs from point size");
    std::vector<double> up(x.size()), down(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        up[i] = x[i] + eps * direction[i];
        down[i] = x[i] - eps * direction[i];
    }
    return (f(up) - f(down)) / (2.0 * eps);
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace weakclr
