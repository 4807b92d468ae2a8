#pragma once

#include <cmath>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/rng.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

enum class Activation { None, ReLU };

// One 3x3 valid-convolution layer. Kernels are fixed at 3x3; stacking k of
// them grows the receptive field to (2k+1)x(2k+1).
struct ConvLayer {
    Tensor weights;  // [out_features, in_features, 3, 3]
    Tensor bias;     // [out_features]
    Activation activation = Activation::ReLU;

    int out_features() const { return weights.shape.empty() ? 0 : weights.shape[0]; }
    int in_features() const { return weights.shape.size() < 2 ? 0 : weights.shape[1]; }
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero bias.
inline ConvLayer make_conv_layer(int in_features, int out_features, Activation act, Rng& rng) {
    if (in_features <= 0 || out_features <= 0)
        throw ConfigError("conv layer feature counts must be positive");
    ConvLayer layer;
    layer.weights = Tensor({out_features, in_features, 3, 3});
    layer.bias = Tensor({out_features});
    layer.activation = act;
    const float bound = 1.0f / std::sqrt(static_cast<float>(in_features) * 9.0f);
    for (float& w : layer.weights.values) w = rng.uniform_float(-bound, bound);
    return layer;
}

namespace detail {

// Reused packing / accumulation buffers. The packed layouts keep the feature
// dimension contiguous so the inner loops vectorize without reassociation.
struct ConvScratch {
    std::vector<float> in_p;   // [H][W][C]
    std::vector<float> w_p;    // [3][3][C][O]
    std::vector<float> wt_p;   // [3][3][O][C]
    std::vector<float> dp_p;   // [H'][W'][O]
    std::vector<double> acc;   // [O]
    std::vector<double> dw;    // [C][O] per-tap slice
    std::vector<double> din;   // [H][W][C]
};

inline ConvScratch& conv_scratch() {
    thread_local ConvScratch s;
    return s;
}

inline void pack_input(const Tensor& input, int C, int H, int W, std::vector<float>& in_p) {
    in_p.resize(static_cast<std::size_t>(H) * W * C);
    const float* src = input.values.data();
    for (int c = 0; c < C; ++c) {
        const float* plane = src + static_cast<std::size_t>(c) * H * W;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) in_p[(static_cast<std::size_t>(y) * W + x) * C + c] = plane[y * W + x];
    }
}

inline void pack_weights(const Tensor& weights, int O, int C, std::vector<float>& w_p,
                         std::vector<float>* wt_p) {
    w_p.resize(static_cast<std::size_t>(9) * C * O);
    if (wt_p) wt_p->resize(static_cast<std::size_t>(9) * O * C);
    const float* src = weights.values.data();
    for (int o = 0; o < O; ++o)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < 9; ++t) {
                float w = src[(static_cast<std::size_t>(o) * C + c) * 9 + t];
                w_p[(static_cast<std::size_t>(t) * C + c) * O + o] = w;
                if (wt_p) (*wt_p)[(static_cast<std::size_t>(t) * O + o) * C + c] = w;
            }
}

}  // namespace detail

// Valid (no padding) cross-correlation plus bias, then the layer's
// activation. Input [C,H,W] -> output [O,H-2,W-2].
inline Tensor conv2d_valid(const Tensor& input, const ConvLayer& layer) {
    if (input.shape.size() != 3)
        throw ShapeError("conv2d_valid: expected a [C,H,W] input, got " + input.shape_str());
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    if (C != layer.in_features())
        throw ShapeError("conv2d_valid: expected " + std::to_string(layer.in_features()) +
                         " input channels, got " + std::to_string(C));
    if (H < 3 || W < 3)
        throw ShapeError("conv2d_valid: spatial dims must be >= 3, got " + input.shape_str());

    const int O = layer.out_features();
    const int Ho = H - 2, Wo = W - 2;
    Tensor out({O, Ho, Wo});

    auto& s = detail::conv_scratch();
    detail::pack_input(input, C, H, W, s.in_p);
    detail::pack_weights(layer.weights, O, C, s.w_p, nullptr);
    s.acc.resize(O);

    const bool relu = layer.activation == Activation::ReLU;
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
    for (int y = 0; y < Ho; ++y) {
        for (int x = 0; x < Wo; ++x) {
            double* acc = s.acc.data();
            for (int o = 0; o < O; ++o) acc[o] = static_cast<double>(layer.bias.values[o]);
            for (int dy = 0; dy < 3; ++dy) {
                const float* in_row = &s.in_p[(static_cast<std::size_t>(y + dy) * W + x) * C];
                for (int dx = 0; dx < 3; ++dx) {
                    const float* in_px = in_row + static_cast<std::size_t>(dx) * C;
                    const float* w_tap = &s.w_p[static_cast<std::size_t>(dy * 3 + dx) * C * O];
                    for (int c = 0; c < C; ++c) {
                        const double v = static_cast<double>(in_px[c]);
                        const float* w_row = w_tap + static_cast<std::size_t>(c) * O;
                        for (int o = 0; o < O; ++o) acc[o] += v * static_cast<double>(w_row[o]);
                    }
                }
            }
            float* dst = out.values.data() + static_cast<std::size_t>(y) * Wo + x;
            for (int o = 0; o < O; ++o) {
                float v = static_cast<float>(acc[o]);
                if (relu && v < 0.0f) v = 0.0f;
                dst[o * plane] = v;
            }
        }
    }
    return out;
}

// Backward pass of conv2d_valid. `input` and `output` are the recorded
// forward tensors (the post-activation output doubles as the ReLU mask:
// gradient flows only where pre-activation > 0). Parameter gradients are
// accumulated into the layer's grad buffers; the input gradient is written
// to *d_input when non-null.
inline void conv2d_backward(const Tensor& input, const Tensor& output, const Tensor& d_output,
                            ConvLayer& layer, Tensor* d_input) {
    if (input.shape.size() != 3 || output.shape != d_output.shape)
        throw ShapeError("conv2d_backward: mismatched forward/backward shapes");
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    const int O = layer.out_features();
    const int Ho = H - 2, Wo = W - 2;
    if (output.shape != std::vector<int>{O, Ho, Wo})
        throw StateError("conv2d_backward: output trace does not match this layer/input");

    layer.weights.alloc_grad();
    layer.bias.alloc_grad();

    auto& s = detail::conv_scratch();
    detail::pack_input(input, C, H, W, s.in_p);
    detail::pack_weights(layer.weights, O, C, s.w_p, d_input ? &s.wt_p : nullptr);

    // Pack the pre-activation gradient as [y][x][o].
    const bool relu = layer.activation == Activation::ReLU;
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
    s.dp_p.resize(plane * O);
    for (int o = 0; o < O; ++o) {
        const float* g = d_output.values.data() + o * plane;
        const float* a = output.values.data() + o * plane;
        for (std::size_t px = 0; px < plane; ++px)
            s.dp_p[px * O + o] = (relu && a[px] <= 0.0f) ? 0.0f : g[px];
    }

    // Bias gradient.
    s.acc.assign(O, 0.0);
    for (std::size_t px = 0; px < plane; ++px) {
        const float* row = &s.dp_p[px * O];
        for (int o = 0; o < O; ++o) s.acc[o] += static_cast<double>(row[o]);
    }
    for (int o = 0; o < O; ++o) layer.bias.grad[o] += static_cast<float>(s.acc[o]);

    // Weight gradient, one 3x3 tap at a time so the [C][O] accumulator slice
    // stays cache-resident.
    s.dw.resize(static_cast<std::size_t>(C) * O);
    for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
            std::fill(s.dw.begin(), s.dw.end(), 0.0);
            for (int y = 0; y < Ho; ++y) {
                for (int x = 0; x < Wo; ++x) {
                    const float* in_px = &s.in_p[(static_cast<std::size_t>(y + dy) * W + (x + dx)) * C];
                    const float* g_row = &s.dp_p[(static_cast<std::size_t>(y) * Wo + x) * O];
                    for (int c = 0; c < C; ++c) {
                        const double v = static_cast<double>(in_px[c]);
                        double* dw_row = &s.dw[static_cast<std::size_t>(c) * O];
                        for (int o = 0; o < O; ++o) dw_row[o] += v * static_cast<double>(g_row[o]);
                    }
                }
            }
            for (int o = 0; o < O; ++o)
                for (int c = 0; c < C; ++c)
                    layer.weights.grad[(static_cast<std::size_t>(o) * C + c) * 9 + dy * 3 + dx] +=
                        static_cast<float>(s.dw[static_cast<std::size_t>(c) * O + o]);
        }
    }

    if (!d_input) return;

    s.din.assign(static_cast<std::size_t>(H) * W * C, 0.0);
    for (int y = 0; y < Ho; ++y) {
        for (int x = 0; x < Wo; ++x) {
            const float* g_row = &s.dp_p[(static_cast<std::size_t>(y) * Wo + x) * O];
            for (int dy = 0; dy < 3; ++dy) {
                for (int dx = 0; dx < 3; ++dx) {
                    double* din_px = &s.din[(static_cast<std::size_t>(y + dy) * W + (x + dx)) * C];
                    const float* w_tap = &s.wt_p[static_cast<std::size_t>(dy * 3 + dx) * O * C];
                    for (int o = 0; o < O; ++o) {
                        const double g = static_cast<double>(g_row[o]);
                        if (g == 0.0) continue;
                        const float* w_row = w_tap + static_cast<std::size_t>(o) * C;
                        for (int c = 0; c < C; ++c) din_px[c] += g * static_cast<double>(w_row[c]);
                    }
                }
            }
        }
    }
    *d_input = Tensor({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                d_input->values[(static_cast<std::size_t>(c) * H + y) * W + x] =
                    static_cast<float>(s.din[(static_cast<std::size_t>(y) * W + x) * C + c]);
}

}  // namespace patchsim
