#pragma once

// Five-stage 5x5 convolutional backbone (32 -> 512 channels, ReLU + 2x2 max
// pooling after each conv), global average pooling to a 512-d representation,
// a shared 512 -> 256 dense layer and two heads on top of it:
//   ssl head  256 -> 128, L2-normalised (contrastive objectives)
//   cls head  256 -> 2    (binary classifier logits)

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weakclr/cohort.hpp"
#include "weakclr/tensor.hpp"

namespace weakclr {

inline constexpr int kNumConvLayers = 5;
inline constexpr int kKernelSize = 5;
inline constexpr std::array<int, kNumConvLayers + 1> kConvChannels = {1, 32, 64, 128, 256, 512};
inline constexpr int kReprDim = 512;
inline constexpr int kHiddenDim = 256;
inline constexpr int kProjDim = 128;
inline constexpr int kNumClasses = 2;
inline constexpr int kMinInputSide = 32; // five 2x2 poolings must leave >= 1 pixel

// 25 * (1*32 + 32*64 + 64*128 + 128*256 + 256*512) + 992 conv biases
// + (512*256 + 256) + (256*128 + 128) + (256*2 + 2)
inline constexpr std::size_t kParameterCount = 4'518'530;

template <typename T>
struct ConvParams {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<T> weight; // [out][in][5][5]
    std::vector<T> bias;   // [out]

    bool operator==(const ConvParams&) const = default;
};

template <typename T>
struct DenseParams {
    int in_features = 0;
    int out_features = 0;
    std::vector<T> weight; // [out][in]
    std::vector<T> bias;   // [out]

    bool operator==(const DenseParams&) const = default;
};

template <typename T>
struct ModelParams {
    std::array<ConvParams<T>, kNumConvLayers> conv;
    DenseParams<T> shared;
    DenseParams<T> ssl_head;
    DenseParams<T> cls_head;

    // All tensors allocated with the fixed architecture, zero-filled.
    static ModelParams zeros();

    // f(name, shape, values) over every tensor in a fixed order.
    template <class F>
    void for_each(F&& f) {
        for (int i = 0; i < kNumConvLayers; ++i) {
            auto& c = conv[i];
            const std::string p = "conv" + std::to_string(i);
            f(p + ".weight", std::vector<int>{c.out_channels, c.in_channels, kKernelSize, kKernelSize}, c.weight);
            f(p + ".bias", std::vector<int>{c.out_channels}, c.bias);
        }
        for (auto* d : {&shared, &ssl_head, &cls_head}) {
            const std::string p = d == &shared ? "shared" : d == &ssl_head ? "ssl_head" : "cls_head";
            f(p + ".weight", std::vector<int>{d->out_features, d->in_features}, d->weight);
            f(p + ".bias", std::vector<int>{d->out_features}, d->bias);
        }
    }
    template <class F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each(
            [&](const std::string& name, const std::vector<int>& shape, std::vector<T>& v) {
                f(name, shape, static_cast<const std::vector<T>&>(v));
            });
    }

    std::vector<std::vector<T>*> tensors() {
        std::vector<std::vector<T>*> out;
        for_each([&](const std::string&, const std::vector<int>&, std::vector<T>& v) { out.push_back(&v); });
        return out;
    }

    std::size_t parameter_count() const;
    void set_zero();

    bool operator==(const ModelParams&) const = default;
};

struct ModelMetadata {
    std::uint64_t seed = 0;
    std::string provenance; // free-form, e.g. "pretrain method=weak_simclr epochs=200"
};

template <typename T>
struct ModelState {
    ModelParams<T> params;
    ModelMetadata meta;
};

std::string architecture_descriptor();
std::uint64_t architecture_hash();

// Fan-in scaled uniform initialisation: layers followed by ReLU use
// U(+-sqrt(6 / fan_in)), the two heads U(+-sqrt(3 / fan_in)); biases start at 0.
ModelState<float> init_model(std::uint64_t seed);

// Fresh classifier head, independent of the rest of the initialisation stream.
void reinit_cls_head(ModelParams<float>& params, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
    ModelParams<To> dst = ModelParams<To>::zeros();
    std::vector<const std::vector<From>*> srcs;
    src.for_each([&](const std::string&, const std::vector<int>&, const std::vector<From>& v) { srcs.push_back(&v); });
    std::size_t i = 0;
    dst.for_each([&](const std::string&, const std::vector<int>&, std::vector<To>& v) {
        const auto& s = *srcs[i++];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<To>(s[k]);
    });
    return dst;
}

// Intermediate activations are stored channels-last: data[((i * h + y) * w + x) * c + ch].
template <typename T>
struct BackboneTrace {
    std::array<Tensor4<T>, kNumConvLayers> inputs;              // input of each conv stage
    std::array<std::vector<std::int32_t>, kNumConvLayers> argmax; // pooled -> conv pixel index, -1 if ReLU-dead
    std::array<std::array<int, 2>, kNumConvLayers> conv_hw{};
    int final_h = 0;
    int final_w = 0;
};

// Builds an N x 1 x H x W batch. Throws Error("shape_error") on empty or
// non-uniform input.
template <typename T>
Tensor4<T> stack_images(std::span<const Image> images);
template <typename T>
Tensor4<T> stack_images(std::span<const Image* const> images);

// x: B x 1 x H x W with H, W >= 32. Returns B x 512.
template <typename T>
Matrix<T> backbone_forward(const ModelParams<T>& params, const Tensor4<T>& x, BackboneTrace<T>* trace = nullptr);

// Accumulates parameter gradients into grads.
template <typename T>
void backbone_backward(const ModelParams<T>& params, const BackboneTrace<T>& trace, const Matrix<T>& d_repr,
                       ModelParams<T>& grads);

template <typename T>
struct HeadTrace {
    Matrix<T> repr;
    Matrix<T> hidden; // post-ReLU shared dense output
    Matrix<T> output; // for the ssl head: L2-normalised projections
    std::vector<T> norms;
};

template <typename T>
Matrix<T> ssl_head_forward(const ModelParams<T>& params, const Matrix<T>& repr, HeadTrace<T>* trace = nullptr);
// Returns d_repr; accumulates shared + ssl_head gradients.
template <typename T>
Matrix<T> ssl_head_backward(const ModelParams<T>& params, const HeadTrace<T>& trace, const Matrix<T>& d_proj,
                            ModelParams<T>& grads);

template <typename T>
Matrix<T> cls_head_forward(const ModelParams<T>& params, const Matrix<T>& repr, HeadTrace<T>* trace = nullptr);
template <typename T>
Matrix<T> cls_head_backward(const ModelParams<T>& params, const HeadTrace<T>& trace, const Matrix<T>& d_logits,
                            ModelParams<T>& grads);

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits);

} // namespace weakclr
