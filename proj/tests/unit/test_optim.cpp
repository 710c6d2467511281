#include <gtest/gtest.h>

#include <cmath>

#include "weakclr/error.hpp"
#include "weakclr/optim.hpp"

using namespace weakclr;

TEST(Optim, CosineScheduleEndpoints) {
    EXPECT_EQ(cosine_lr(0, 100, 1e-4), 1e-4);
    EXPECT_EQ(cosine_lr(50, 100, 1e-4), 0.5e-4);
    EXPECT_EQ(cosine_lr(100, 100, 1e-4), 0.0);
    double previous = 1.0;
    for (long s = 0; s <= 37; ++s) {
        const double lr = cosine_lr(s, 37, 1.0);
        EXPECT_LE(lr, previous);
        previous = lr;
    }
    EXPECT_THROW(cosine_lr(101, 100, 1.0), Error);
    EXPECT_THROW(cosine_lr(0, 0, 1.0), Error);
}

TEST(Optim, ZeroGradientZeroDecayIsNoOp) {
    auto params = ModelParams<double>::zeros();
    params.shared.weight[3] = 0.7;
    params.cls_head.bias[1] = -1.25;
    const auto before = params;
    const auto grads = ModelParams<double>::zeros();
    AdamW<double> opt;
    for (int i = 0; i < 3; ++i) opt.step(params, grads, 1e-3, 0.0);
    EXPECT_EQ(opt.steps_taken(), 3);
    EXPECT_EQ(params, before);
}

// Scalar reference of the update rule for a few coordinates over several
// steps, including decoupled decay.
TEST(Optim, MatchesScalarReference) {
    auto params = ModelParams<double>::zeros();
    auto grads = ModelParams<double>::zeros();
    const std::vector<double> p0 = {0.5, -0.3, 2.0};
    for (int i = 0; i < 3; ++i) params.ssl_head.weight[i] = p0[i];

    AdamW<double> opt;
    std::vector<double> p = p0, m(3, 0.0), v(3, 0.0);
    const double lr = 1e-2, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 5; ++t) {
        for (int i = 0; i < 3; ++i) grads.ssl_head.weight[i] = std::sin(t + i) * (i + 1);
        opt.step(params, grads, lr, wd);
        for (int i = 0; i < 3; ++i) {
            const double g = std::sin(t + i) * (i + 1);
            p[i] -= lr * wd * p[i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            const double mhat = m[i] / (1 - std::pow(b1, t));
            const double vhat = v[i] / (1 - std::pow(b2, t));
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(params.ssl_head.weight[i], p[i], 1e-12);
    EXPECT_EQ(params.ssl_head.weight[3], 0.0);
}

TEST(Optim, DecayShrinksWithoutGradient) {
    auto params = ModelParams<double>::zeros();
    params.conv[0].bias[0] = 1.0;
    AdamW<double> opt;
    opt.step(params, ModelParams<double>::zeros(), 0.1, 0.5);
    EXPECT_NEAR(params.conv[0].bias[0], 0.95, 1e-15);
}
