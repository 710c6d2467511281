#pragma once

#include "weakclr/network.hpp"

namespace weakclr {

// 0.5 * base_lr * (1 + cos(pi * step / total_steps)); base_lr at step 0, 0 at total_steps.
double cosine_lr(long step, long total_steps, double base_lr);

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimiser with decoupled weight decay:
//   p <- p - lr * wd * p
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWOptions options = {});

    void step(ModelParams<T>& params, const ModelParams<T>& grads, double lr, double weight_decay);
    long steps_taken() const noexcept { return t_; }

private:
    AdamWOptions opt_;
    ModelParams<T> m_;
    ModelParams<T> v_;
    long t_ = 0;
};

} // namespace weakclr
