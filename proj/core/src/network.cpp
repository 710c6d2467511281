#include "weakclr/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "blas.hpp"
#include "weakclr/error.hpp"
#include "weakclr/rng.hpp"

namespace weakclr {

namespace {

constexpr int kPad = kKernelSize / 2;
constexpr int kTaps = kKernelSize * kKernelSize;
// Images are batched into one GEMM until the column count reaches this.
constexpr int kTargetColumns = 4096;

// Activations inside the backbone are channels-last (N x H x W x C) so that a
// 5x5 patch of every channel is one contiguous row of the patch matrix and the
// convolution becomes a (pixels x 25C) * (25C x Cout) product.

// Weight rows reordered from [in][ky][kx] to [ky][kx][in] to match patch rows.
template <typename T>
std::vector<T> tap_major_weights(const ConvParams<T>& p) {
    const int cin = p.in_channels;
    std::vector<T> out(p.weight.size());
    for (int co = 0; co < p.out_channels; ++co)
        for (int c = 0; c < cin; ++c)
            for (int t = 0; t < kTaps; ++t)
                out[(static_cast<std::size_t>(co) * kTaps + t) * cin + c] =
                    p.weight[(static_cast<std::size_t>(co) * cin + c) * kTaps + t];
    return out;
}

// rows[(y * W + x) * 25C + (ky * 5 + kx) * C + c] = img[y + ky - 2][x + kx - 2][c], zero outside.
template <typename T>
void im2row(const T* img, int channels, int h, int w, T* rows) {
    const std::size_t k = static_cast<std::size_t>(kTaps) * channels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T* r = rows + (static_cast<std::size_t>(y) * w + x) * k;
            const int kx_lo = std::max(0, kPad - x);
            const int kx_hi = std::min(kKernelSize, w + kPad - x);
            for (int ky = 0; ky < kKernelSize; ++ky) {
                T* d = r + static_cast<std::size_t>(ky) * kKernelSize * channels;
                const int sy = y + ky - kPad;
                if (sy < 0 || sy >= h) {
                    std::fill(d, d + static_cast<std::size_t>(kKernelSize) * channels, T{0});
                    continue;
                }
                std::fill(d, d + static_cast<std::size_t>(kx_lo) * channels, T{0});
                const T* src = img + (static_cast<std::size_t>(sy) * w + (x + kx_lo - kPad)) * channels;
                std::copy(src, src + static_cast<std::size_t>(kx_hi - kx_lo) * channels, d + kx_lo * channels);
                std::fill(d + static_cast<std::size_t>(kx_hi) * channels,
                          d + static_cast<std::size_t>(kKernelSize) * channels, T{0});
            }
        }
    }
}

// Adjoint of im2row: scatter-add patch rows back into the image gradient.
template <typename T>
void row2im_add(const T* rows, int channels, int h, int w, T* img) {
    const std::size_t k = static_cast<std::size_t>(kTaps) * channels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const T* r = rows + (static_cast<std::size_t>(y) * w + x) * k;
            const int kx_lo = std::max(0, kPad - x);
            const int kx_hi = std::min(kKernelSize, w + kPad - x);
            for (int ky = 0; ky < kKernelSize; ++ky) {
                const int sy = y + ky - kPad;
                if (sy < 0 || sy >= h) continue;
                const T* s = r + (static_cast<std::size_t>(ky) * kKernelSize + kx_lo) * channels;
                T* d = img + (static_cast<std::size_t>(sy) * w + (x + kx_lo - kPad)) * channels;
                const std::size_t len = static_cast<std::size_t>(kx_hi - kx_lo) * channels;
                for (std::size_t q = 0; q < len; ++q) d[q] += s[q];
            }
        }
    }
}

int images_per_chunk(int n, std::size_t plane) {
    return std::clamp(static_cast<int>(kTargetColumns / std::max<std::size_t>(plane, 1)), 1, n);
}

// conv(5x5, same) + bias -> ReLU -> 2x2 max pool, fused per chunk so the
// full-resolution conv output never materialises. argmax holds, per pooled
// output, the winning pixel index y * W + x of the conv plane (-1 if the
// whole window was clipped by the ReLU).
template <typename T>
Tensor4<T> conv_relu_pool(const ConvParams<T>& p, const Tensor4<T>& in, std::vector<std::int32_t>* argmax) {
    const int n = in.n, h = in.h, w = in.w;
    const std::size_t hw = in.plane();
    const int cout = p.out_channels;
    const int k = p.in_channels * kTaps;
    const int ph = h / 2, pw = w / 2;
    Tensor4<T> out(n, cout, ph, pw);
    if (argmax) argmax->assign(out.data.size(), -1);
    const std::vector<T> wt = tap_major_weights(p);

    const int chunk = images_per_chunk(n, hw);
    std::vector<T> col(static_cast<std::size_t>(k) * chunk * hw);
    std::vector<T> y(static_cast<std::size_t>(cout) * chunk * hw);
    std::vector<T> best(cout);
    std::vector<std::int32_t> best_idx(cout);
    for (int n0 = 0; n0 < n; n0 += chunk) {
        const int m = std::min(chunk, n - n0);
        const std::size_t rows = static_cast<std::size_t>(m) * hw;
        for (int i = 0; i < m; ++i) im2row(in.sample(n0 + i), in.c, h, w, col.data() + i * hw * k);
        detail::gemm(false, true, static_cast<int>(rows), cout, k, T{1}, col.data(), k, wt.data(), k, T{0}, y.data(),
                     cout);
        for (int i = 0; i < m; ++i) {
            const T* yi = y.data() + i * hw * cout;
            T* dst = out.sample(n0 + i);
            std::int32_t* am = argmax ? argmax->data() + static_cast<std::size_t>(n0 + i) * out.sample_size() : nullptr;
            for (int py = 0; py < ph; ++py) {
                for (int px = 0; px < pw; ++px) {
                    // ReLU folded into the max: a pooled value of 0 has no gradient path.
                    std::fill(best.begin(), best.end(), T{0});
                    std::fill(best_idx.begin(), best_idx.end(), -1);
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (2 * py + dy) * w + 2 * px + dx;
                            const T* v = yi + static_cast<std::size_t>(idx) * cout;
                            for (int co = 0; co < cout; ++co) {
                                const T val = v[co] + p.bias[co];
                                if (val > best[co]) {
                                    best[co] = val;
                                    best_idx[co] = idx;
                                }
                            }
                        }
                    }
                    const std::size_t o = (static_cast<std::size_t>(py) * pw + px) * cout;
                    std::copy(best.begin(), best.end(), dst + o);
                    if (am) std::copy(best_idx.begin(), best_idx.end(), am + o);
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv_relu_pool_backward(const ConvParams<T>& p, const Tensor4<T>& in, const std::vector<std::int32_t>& argmax,
                             const Tensor4<T>& d_out, ConvParams<T>& g, Tensor4<T>* d_in) {
    const int n = in.n, h = in.h, w = in.w;
    const std::size_t hw = in.plane();
    const int cin = p.in_channels;
    const int cout = p.out_channels;
    const int k = cin * kTaps;
    if (d_in) *d_in = Tensor4<T>(n, in.c, h, w);
    const std::vector<T> wt = tap_major_weights(p);
    std::vector<T> dwt(static_cast<std::size_t>(k) * cout, T{0});

    const int chunk = images_per_chunk(n, hw);
    std::vector<T> col(static_cast<std::size_t>(k) * chunk * hw);
    std::vector<T> dy(static_cast<std::size_t>(cout) * chunk * hw);
    for (int n0 = 0; n0 < n; n0 += chunk) {
        const int m = std::min(chunk, n - n0);
        const std::size_t rows = static_cast<std::size_t>(m) * hw;
        std::fill(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(rows * cout), T{0});
        for (int i = 0; i < m; ++i) {
            const std::size_t base = static_cast<std::size_t>(n0 + i) * d_out.sample_size();
            T* dyi = dy.data() + i * hw * cout;
            for (std::size_t q = 0; q < d_out.sample_size(); ++q) {
                const std::int32_t idx = argmax[base + q];
                if (idx < 0) continue;
                const int co = static_cast<int>(q % cout);
                const T gval = d_out.data[base + q];
                dyi[static_cast<std::size_t>(idx) * cout + co] = gval;
                g.bias[co] += gval;
            }
        }
        for (int i = 0; i < m; ++i) im2row(in.sample(n0 + i), in.c, h, w, col.data() + i * hw * k);
        detail::gemm(true, false, k, cout, static_cast<int>(rows), T{1}, col.data(), k, dy.data(), cout, T{1},
                     dwt.data(), cout);
        if (d_in) {
            detail::gemm(false, false, static_cast<int>(rows), k, cout, T{1}, dy.data(), cout, wt.data(), k, T{0},
                         col.data(), k);
            for (int i = 0; i < m; ++i) row2im_add(col.data() + i * hw * k, in.c, h, w, d_in->sample(n0 + i));
        }
    }
    for (int co = 0; co < cout; ++co)
        for (int c = 0; c < cin; ++c)
            for (int t = 0; t < kTaps; ++t)
                g.weight[(static_cast<std::size_t>(co) * cin + c) * kTaps + t] +=
                    dwt[(static_cast<std::size_t>(t) * cin + c) * cout + co];
}

template <typename T>
Matrix<T> dense_forward(const DenseParams<T>& p, const Matrix<T>& x) {
    Matrix<T> y(x.rows, p.out_features);
    for (int r = 0; r < y.rows; ++r) std::copy(p.bias.begin(), p.bias.end(), y.row(r).begin());
    detail::gemm(false, true, x.rows, p.out_features, p.in_features, T{1}, x.data.data(), p.in_features,
                 p.weight.data(), p.in_features, T{1}, y.data.data(), p.out_features);
    return y;
}

// Accumulates dW, db; returns dX.
template <typename T>
Matrix<T> dense_backward(const DenseParams<T>& p, const Matrix<T>& x, const Matrix<T>& dy, DenseParams<T>& g) {
    detail::gemm(true, false, p.out_features, p.in_features, x.rows, T{1}, dy.data.data(), p.out_features,
                 x.data.data(), p.in_features, T{1}, g.weight.data(), p.in_features);
    for (int r = 0; r < dy.rows; ++r)
        for (int c = 0; c < dy.cols; ++c) g.bias[c] += dy(r, c);
    Matrix<T> dx(x.rows, p.in_features);
    detail::gemm(false, false, x.rows, p.in_features, p.out_features, T{1}, dy.data.data(), p.out_features,
                 p.weight.data(), p.in_features, T{0}, dx.data.data(), p.in_features);
    return dx;
}

template <typename T>
Matrix<T> shared_hidden(const ModelParams<T>& params, const Matrix<T>& repr) {
    WEAKCLR_CHECK(repr.cols == kReprDim, "shape_error", "representation must have 512 columns");
    Matrix<T> h = dense_forward(params.shared, repr);
    for (auto& v : h.data) v = std::max(v, T{0});
    return h;
}

template <typename T>
Matrix<T> shared_backward(const ModelParams<T>& params, const HeadTrace<T>& trace, Matrix<T> d_hidden,
                          ModelParams<T>& grads) {
    for (std::size_t i = 0; i < d_hidden.data.size(); ++i)
        if (!(trace.hidden.data[i] > T{0})) d_hidden.data[i] = T{0};
    return dense_backward(params.shared, trace.repr, d_hidden, grads.shared);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void fill_uniform(std::vector<float>& v, double bound, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
}

} // namespace

template <typename T>
ModelParams<T> ModelParams<T>::zeros() {
    ModelParams p;
    for (int i = 0; i < kNumConvLayers; ++i) {
        auto& c = p.conv[i];
        c.in_channels = kConvChannels[i];
        c.out_channels = kConvChannels[i + 1];
        c.weight.assign(static_cast<std::size_t>(c.out_channels) * c.in_channels * kTaps, T{0});
        c.bias.assign(c.out_channels, T{0});
    }
    auto dense = [](DenseParams<T>& d, int in, int out) {
        d.in_features = in;
        d.out_features = out;
        d.weight.assign(static_cast<std::size_t>(in) * out, T{0});
        d.bias.assign(out, T{0});
    };
    dense(p.shared, kReprDim, kHiddenDim);
    dense(p.ssl_head, kHiddenDim, kProjDim);
    dense(p.cls_head, kHiddenDim, kNumClasses);
    return p;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const std::vector<int>&, const std::vector<T>& v) { n += v.size(); });
    return n;
}

template <typename T>
void ModelParams<T>::set_zero() {
    for_each([](const std::string&, const std::vector<int>&, std::vector<T>& v) { std::fill(v.begin(), v.end(), T{0}); });
}

std::string architecture_descriptor() {
    return "weakclr-backbone-v1;conv5x5-same+relu+maxpool2:1,32,64,128,256,512;gap;"
           "shared-dense:512-256+relu;ssl-head:256-128+l2norm;cls-head:256-2";
}

std::uint64_t architecture_hash() { return fnv1a(architecture_descriptor()); }

ModelState<float> init_model(std::uint64_t seed) {
    ModelState<float> state;
    state.params = ModelParams<float>::zeros();
    state.meta.seed = seed;
    state.meta.provenance = "init";
    std::uint64_t tensor = 0;
    for (auto& c : state.params.conv) {
        fill_uniform(c.weight, std::sqrt(6.0 / (c.in_channels * kTaps)), derive_seed(seed, {0xc0, tensor++}));
    }
    fill_uniform(state.params.shared.weight, std::sqrt(6.0 / kReprDim), derive_seed(seed, {0xd0, 0}));
    fill_uniform(state.params.ssl_head.weight, std::sqrt(3.0 / kHiddenDim), derive_seed(seed, {0xd0, 1}));
    reinit_cls_head(state.params, seed);
    return state;
}

void reinit_cls_head(ModelParams<float>& params, std::uint64_t seed) {
    fill_uniform(params.cls_head.weight, std::sqrt(3.0 / kHiddenDim), derive_seed(seed, {0xd0, 2}));
    std::fill(params.cls_head.bias.begin(), params.cls_head.bias.end(), 0.0f);
}

template <typename T>
Tensor4<T> stack_images(std::span<const Image* const> images) {
    WEAKCLR_CHECK(!images.empty(), "shape_error", "empty image batch");
    const int h = images.front()->height, w = images.front()->width;
    Tensor4<T> x(static_cast<int>(images.size()), 1, h, w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& img = *images[i];
        WEAKCLR_CHECK(img.height == h && img.width == w, "shape_error", "non-uniform image shapes in batch");
        std::transform(img.pixels.begin(), img.pixels.end(), x.sample(static_cast<int>(i)),
                       [](float v) { return static_cast<T>(v); });
    }
    return x;
}

template <typename T>
Tensor4<T> stack_images(std::span<const Image> images) {
    std::vector<const Image*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);
    return stack_images<T>(std::span<const Image* const>(ptrs));
}

template <typename T>
Matrix<T> backbone_forward(const ModelParams<T>& params, const Tensor4<T>& x, BackboneTrace<T>* trace) {
    WEAKCLR_CHECK(x.n > 0, "shape_error", "empty batch");
    WEAKCLR_CHECK(x.c == 1, "shape_error", "backbone expects single-channel input");
    if (x.h < kMinInputSide || x.w < kMinInputSide) {
        throw Error("shape_error", "input " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                                       " is smaller than the 32x32 minimum");
    }
    Tensor4<T> act = x;
    for (int l = 0; l < kNumConvLayers; ++l) {
        std::vector<std::int32_t>* am = nullptr;
        if (trace) {
            trace->conv_hw[l] = {act.h, act.w};
            trace->inputs[l] = act;
            am = &trace->argmax[l];
        }
        act = conv_relu_pool(params.conv[l], act, am);
    }
    if (trace) {
        trace->final_h = act.h;
        trace->final_w = act.w;
    }
    Matrix<T> repr(act.n, act.c);
    const std::size_t plane = act.plane();
    for (int i = 0; i < act.n; ++i) {
        const T* a = act.sample(i);
        auto r = repr.row(i);
        for (std::size_t q = 0; q < plane; ++q)
            for (int c = 0; c < act.c; ++c) r[c] += a[q * act.c + c];
        for (auto& v : r) v /= static_cast<T>(plane);
    }
    return repr;
}

template <typename T>
void backbone_backward(const ModelParams<T>& params, const BackboneTrace<T>& trace, const Matrix<T>& d_repr,
                       ModelParams<T>& grads) {
    const int n = d_repr.rows;
    const int hf = trace.final_h, wf = trace.final_w;
    Tensor4<T> d_act(n, kConvChannels.back(), hf, wf);
    const T inv = T{1} / static_cast<T>(hf * wf);
    for (int i = 0; i < n; ++i) {
        T* p = d_act.sample(i);
        for (std::size_t q = 0; q < d_act.plane(); ++q)
            for (int c = 0; c < d_act.c; ++c) p[q * d_act.c + c] = d_repr(i, c) * inv;
    }
    for (int l = kNumConvLayers - 1; l >= 0; --l) {
        Tensor4<T> d_in;
        conv_relu_pool_backward(params.conv[l], trace.inputs[l], trace.argmax[l], d_act, grads.conv[l],
                                l > 0 ? &d_in : nullptr);
        d_act = std::move(d_in);
    }
}

template <typename T>
Matrix<T> ssl_head_forward(const ModelParams<T>& params, const Matrix<T>& repr, HeadTrace<T>* trace) {
    Matrix<T> hidden = shared_hidden(params, repr);
    Matrix<T> z = dense_forward(params.ssl_head, hidden);
    std::vector<T> norms(z.rows);
    for (int r = 0; r < z.rows; ++r) {
        T s = T{0};
        for (T v : z.row(r)) s += v * v;
        norms[r] = std::max(std::sqrt(s), static_cast<T>(1e-12));
        for (T& v : z.row(r)) v /= norms[r];
    }
    if (trace) {
        trace->repr = repr;
        trace->hidden = std::move(hidden);
        trace->output = z;
        trace->norms = std::move(norms);
    }
    return z;
}

template <typename T>
Matrix<T> ssl_head_backward(const ModelParams<T>& params, const HeadTrace<T>& trace, const Matrix<T>& d_proj,
                            ModelParams<T>& grads) {
    const Matrix<T>& z = trace.output;
    Matrix<T> d_raw(z.rows, z.cols);
    for (int r = 0; r < z.rows; ++r) {
        T dot = T{0};
        for (int c = 0; c < z.cols; ++c) dot += z(r, c) * d_proj(r, c);
        for (int c = 0; c < z.cols; ++c) d_raw(r, c) = (d_proj(r, c) - z(r, c) * dot) / trace.norms[r];
    }
    Matrix<T> d_hidden = dense_backward(params.ssl_head, trace.hidden, d_raw, grads.ssl_head);
    return shared_backward(params, trace, std::move(d_hidden), grads);
}

template <typename T>
Matrix<T> cls_head_forward(const ModelParams<T>& params, const Matrix<T>& repr, HeadTrace<T>* trace) {
    Matrix<T> hidden = shared_hidden(params, repr);
    Matrix<T> logits = dense_forward(params.cls_head, hidden);
    if (trace) {
        trace->repr = repr;
        trace->hidden = std::move(hidden);
        trace->output = logits;
    }
    return logits;
}

template <typename T>
Matrix<T> cls_head_backward(const ModelParams<T>& params, const HeadTrace<T>& trace, const Matrix<T>& d_logits,
                            ModelParams<T>& grads) {
    Matrix<T> d_hidden = dense_backward(params.cls_head, trace.hidden, d_logits, grads.cls_head);
    return shared_backward(params, trace, std::move(d_hidden), grads);
}

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
    Matrix<T> p(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const auto row = logits.row(r);
        const T mx = *std::max_element(row.begin(), row.end());
        T s = T{0};
        for (int c = 0; c < logits.cols; ++c) s += (p(r, c) = std::exp(row[c] - mx));
        for (int c = 0; c < logits.cols; ++c) p(r, c) /= s;
    }
    return p;
}

#define WEAKCLR_INSTANTIATE(T)                                                                                    \
    template struct ModelParams<T>;                                                                               \
    template Tensor4<T> stack_images<T>(std::span<const Image>);                                                  \
    template Tensor4<T> stack_images<T>(std::span<const Image* const>);                                           \
    template Matrix<T> backbone_forward<T>(const ModelParams<T>&, const Tensor4<T>&, BackboneTrace<T>*);          \
    template void backbone_backward<T>(const ModelParams<T>&, const BackboneTrace<T>&, const Matrix<T>&,          \
                                       ModelParams<T>&);                                                          \
    template Matrix<T> ssl_head_forward<T>(const ModelParams<T>&, const Matrix<T>&, HeadTrace<T>*);               \
    template Matrix<T> ssl_head_backward<T>(const ModelParams<T>&, const HeadTrace<T>&, const Matrix<T>&,         \
                                            ModelParams<T>&);                                                     \
    template Matrix<T> cls_head_forward<T>(const ModelParams<T>&, const Matrix<T>&, HeadTrace<T>*);               \
    template Matrix<T> cls_head_backward<T>(const ModelParams<T>&, const HeadTrace<T>&, const Matrix<T>&,         \
                                            ModelParams<T>&);                                                     \
    template Matrix<T> softmax_rows<T>(const Matrix<T>&);

WEAKCLR_INSTANTIATE(float)
WEAKCLR_INSTANTIATE(double)

#undef WEAKCLR_INSTANTIATE

} // namespace weakclr
