#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "patchsim/adam.hpp"
#include "patchsim/conv.hpp"
#include "patchsim/errors.hpp"
#include "patchsim/rng.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

// Standardization guard: bands with sample stddev below this are divided by
// the guard value instead, so flat bands stay finite (and near zero).
inline constexpr double kStdGuard = 1e-4;

// Zero-mean, unit-variance copy of a [1,H,W] band. Statistics are taken over
// the whole band, which makes descriptors invariant to per-image affine
// brightness changes (x -> a*x + b with a > 0).
inline Tensor standardize_band(const Tensor& band) {
    if (band.shape.size() != 3 || band.shape[0] != 1)
        throw ShapeError("standardize_band: expected [1,H,W], got " + band.shape_str());
    const std::size_t n = band.values.size();
    if (n == 0) throw ShapeError("standardize_band: empty band");
    double mean = 0.0;
    for (float v : band.values) mean += static_cast<double>(v);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (float v : band.values) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    double sigma = std::sqrt(var);
    if (sigma < kStdGuard) sigma = kStdGuard;
    Tensor out(band.shape);
    for (std::size_t i = 0; i < n; ++i)
        out.values[i] = static_cast<float>((static_cast<double>(band.values[i]) - mean) / sigma);
    return out;
}

// Stack of 3x3 valid convolutions mapping a standardized band of height
// patch_size to one L2-normalized descriptor per window position. Hidden
// layers use ReLU; the last layer is linear so descriptors keep sign
// information for the cosine similarity head.
struct EmbeddingNet {
    std::vector<ConvLayer> layers;
    int patch_size = 0;
    int feature_dim = 0;

    std::vector<ParamRef> params() {
        std::vector<ParamRef> out;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.push_back({"layer" + std::to_string(i) + ".weights", &layers[i].weights});
            out.push_back({"layer" + std::to_string(i) + ".bias", &layers[i].bias});
        }
        return out;
    }

    void zero_grad() {
        for (ConvLayer& l : layers) {
            l.weights.alloc_grad();
            l.bias.alloc_grad();
            l.weights.zero_grad();
            l.bias.zero_grad();
        }
    }
};

// patch_size must be odd and >= 3; the layer count (patch_size-1)/2 is what
// collapses the band height to 1.
inline EmbeddingNet make_embedding_net(int patch_size, int feature_dim, Rng& rng) {
    if (patch_size < 3 || patch_size % 2 == 0)
        throw ConfigError("patch_size must be odd and >= 3, got " + std::to_string(patch_size));
    if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
    EmbeddingNet net;
    net.patch_size = patch_size;
    net.feature_dim = feature_dim;
    const int n_layers = (patch_size - 1) / 2;
    for (int i = 0; i < n_layers; ++i) {
        const int in = i == 0 ? 1 : feature_dim;
        const Activation act = i + 1 == n_layers ? Activation::None : Activation::ReLU;
        net.layers.push_back(make_conv_layer(in, feature_dim, act, rng));
    }
    return net;
}

inline int descriptor_count(int width, int patch_size) {
    return width >= patch_size ? width - patch_size + 1 : 0;
}

// Column of the patch center for descriptor k (the descriptor's patch spans
// columns [k, k+patch_size)).
inline int descriptor_center(int k, int patch_size) { return k + (patch_size - 1) / 2; }

// Forward record kept for the backward pass.
struct EmbeddingTrace {
    Tensor standardized;          // [1, s, W] net input
    std::vector<Tensor> outputs;  // post-activation output of every layer
    Tensor descriptors;           // [n, feature_dim], rows L2-normalized
    std::vector<double> norms;    // pre-normalization norms (0 where guarded)
    int count = 0;
};

// Embeds an already-standardized band. Split from embed_line so windowed
// references can reuse full-band statistics.
inline EmbeddingTrace embed_standardized(const EmbeddingNet& net, Tensor std_band) {
    if (std_band.shape.size() != 3 || std_band.shape[0] != 1 || std_band.shape[1] != net.patch_size)
        throw ShapeError("embed: expected [1," + std::to_string(net.patch_size) + ",W], got " +
                         std_band.shape_str());
    const int W = std_band.shape[2];
    if (W < net.patch_size)
        throw ShapeError("embed: band width " + std::to_string(W) + " is narrower than patch_size " +
                         std::to_string(net.patch_size));

    EmbeddingTrace trace;
    trace.standardized = std::move(std_band);
    const Tensor* cur = &trace.standardized;
    trace.outputs.reserve(net.layers.size());
    for (const ConvLayer& layer : net.layers) {
        trace.outputs.push_back(conv2d_valid(*cur, layer));
        cur = &trace.outputs.back();
    }
    const Tensor& raw = trace.outputs.back();
    if (raw.shape[1] != 1)
        throw StateError("embed: layer stack did not reduce band height to 1");
    const int F = net.feature_dim;
    const int n = raw.shape[2];
    trace.count = n;
    trace.descriptors = Tensor({n, F});
    trace.norms.assign(n, 0.0);
    std::vector<float> tmp(F);
    for (int k = 0; k < n; ++k) {
        for (int f = 0; f < F; ++f) tmp[f] = raw.values[static_cast<std::size_t>(f) * n + k];
        trace.norms[k] = l2_normalize_inplace(tmp.data(), F);
        for (int f = 0; f < F; ++f) trace.descriptors.values[static_cast<std::size_t>(k) * F + f] = tmp[f];
    }
    return trace;
}

inline EmbeddingTrace embed_line(const EmbeddingNet& net, const Tensor& band) {
    return embed_standardized(net, standardize_band(band));
}

// Backpropagates d_descriptors [n, feature_dim] through normalization and
// the conv stack, accumulating parameter gradients. The band itself is data,
// so no input gradient is produced.
inline void embed_line_backward(EmbeddingNet& net, const EmbeddingTrace& trace,
                                const Tensor& d_descriptors) {
    const int F = net.feature_dim;
    const int n = trace.count;
    require_shape(d_descriptors, {n, F}, "embed_line_backward: d_descriptors");

    const Tensor& raw = trace.outputs.back();
    Tensor d_raw(raw.shape);
    std::vector<float> d_col(F);
    for (int k = 0; k < n; ++k) {
        const float* unit = trace.descriptors.values.data() + static_cast<std::size_t>(k) * F;
        const float* d_out = d_descriptors.values.data() + static_cast<std::size_t>(k) * F;
        l2_normalize_backward(unit, trace.norms[k], d_out, d_col.data(), F);
        for (int f = 0; f < F; ++f) d_raw.values[static_cast<std::size_t>(f) * n + k] = d_col[f];
    }

    Tensor d_cur = std::move(d_raw);
    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
        const Tensor& in = i == 0 ? trace.standardized : trace.outputs[i - 1];
        if (i == 0) {
            conv2d_backward(in, trace.outputs[i], d_cur, net.layers[i], nullptr);
        } else {
            Tensor d_prev;
            conv2d_backward(in, trace.outputs[i], d_cur, net.layers[i], &d_prev);
            d_cur = std::move(d_prev);
        }
    }
}

}  // namespace patchsim
