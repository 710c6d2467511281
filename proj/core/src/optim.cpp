#include "weakclr/optim.hpp"

#include <cmath>

#include "weakclr/error.hpp"

namespace weakclr {

double cosine_lr(long step, long total_steps, double base_lr) {
    WEAKCLR_CHECK(total_steps > 0 && step >= 0 && step <= total_steps, "invalid_argument",
                  "cosine_lr needs 0 <= step <= total_steps");
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
}

template <typename T>
AdamW<T>::AdamW(AdamWOptions options)
    : opt_(options), m_(ModelParams<T>::zeros()), v_(ModelParams<T>::zeros()) {}

template <typename T>
void AdamW<T>::step(ModelParams<T>& params, const ModelParams<T>& grads, double lr, double weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const auto p = params.tensors();
    const auto g = const_cast<ModelParams<T>&>(grads).tensors();
    const auto m = m_.tensors();
    const auto v = v_.tensors();
    const T decay = static_cast<T>(1.0 - lr * weight_decay);
    const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(opt_.eps);
    for (std::size_t t = 0; t < p.size(); ++t) {
        auto& pt = *p[t];
        const auto& gt = *g[t];
        auto& mt = *m[t];
        auto& vt = *v[t];
        for (std::size_t i = 0; i < pt.size(); ++i) {
            if (weight_decay != 0.0) pt[i] *= decay;
            mt[i] = b1 * mt[i] + (T{1} - b1) * gt[i];
            vt[i] = b2 * vt[i] + (T{1} - b2) * gt[i] * gt[i];
            pt[i] -= step_size * mt[i] / (std::sqrt(vt[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

template class AdamW<float>;
template class AdamW<double>;

} // namespace weakclr
