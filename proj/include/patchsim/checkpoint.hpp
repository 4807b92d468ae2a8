#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "patchsim/embedding.hpp"
#include "patchsim/errors.hpp"

namespace patchsim {

inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'I', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("checkpoint truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_array(std::ostream& out, const std::vector<float>& values) {
    for (float v : values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        write_u32(out, bits);
    }
}

inline void read_f32_array(std::istream& in, std::vector<float>& values, const std::string& what) {
    for (float& v : values) {
        std::uint32_t bits = read_u32(in, what);
        std::memcpy(&v, &bits, 4);
    }
}

}  // namespace detail

// Layout: 8-byte magic, then little-endian u32 version, layer count, feature
// dim, patch size, then per layer the weight tensor followed by the bias,
// both as raw little-endian f32 in declaration order.
inline void save_checkpoint(const EmbeddingNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, 8);
    detail::write_u32(out, kCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(net.feature_dim));
    detail::write_u32(out, static_cast<std::uint32_t>(net.patch_size));
    for (const ConvLayer& layer : net.layers) {
        detail::write_f32_array(out, layer.weights.values);
        detail::write_f32_array(out, layer.bias.values);
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline EmbeddingNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    const std::uint32_t version = detail::read_u32(in, "version");
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
    const std::uint32_t layer_count = detail::read_u32(in, "layer count");
    const std::uint32_t feature_dim = detail::read_u32(in, "feature dim");
    const std::uint32_t patch_size = detail::read_u32(in, "patch size");
    if (layer_count == 0 || layer_count > 64 || feature_dim == 0 || feature_dim > 4096 ||
        patch_size != 2 * layer_count + 1)
        throw DataError("implausible checkpoint header in " + path);

    EmbeddingNet net;
    net.patch_size = static_cast<int>(patch_size);
    net.feature_dim = static_cast<int>(feature_dim);
    const int F = net.feature_dim;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        ConvLayer layer;
        const int in_f = i == 0 ? 1 : F;
        layer.weights = Tensor({F, in_f, 3, 3});
        layer.bias = Tensor({F});
        layer.activation = i + 1 == layer_count ? Activation::None : Activation::ReLU;
        detail::read_f32_array(in, layer.weights.values, "layer " + std::to_string(i) + " weights");
        detail::read_f32_array(in, layer.bias.values, "layer " + std::to_string(i) + " bias");
        net.layers.push_back(std::move(layer));
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("trailing bytes after checkpoint payload: " + path);
    return net;
}

}  // namespace patchsim
