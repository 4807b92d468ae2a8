#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "patchsim/data.hpp"
#include "patchsim/errors.hpp"
#include "patchsim/image.hpp"
#include "patchsim/png_io.hpp"
#include "patchsim/rng.hpp"

namespace patchsim {

namespace detail {

inline float quantize_u16(float v) {
    if (v < 0.0f) v = 0.0f;
    if (v > 1.0f) v = 1.0f;
    return static_cast<float>(std::lround(v * 65535.0f)) / 65535.0f;
}

// Smoothed noise with full [0,1] contrast, snapped to the 16-bit grid so a
// PGM round-trip is exact and shifted copies stay bit-identical.
inline GrayImage make_texture(Rng& rng, int width, int height) {
    GrayImage img(width, height);
    for (float& p : img.pixels) p = rng.next_float();
    GrayImage tmp(width, height);
    constexpr int kRadius = 2;
    for (int pass = 0; pass < 2; ++pass) {
        // horizontal then vertical box blur
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                int n = 0;
                for (int dx = -kRadius; dx <= kRadius; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= width) continue;
                    acc += img.at(xx, y);
                    ++n;
                }
                tmp.at(x, y) = static_cast<float>(acc / n);
            }
        for (int x = 0; x < width; ++x)
            for (int y = 0; y < height; ++y) {
                double acc = 0.0;
                int n = 0;
                for (int dy = -kRadius; dy <= kRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= height) continue;
                    acc += tmp.at(x, yy);
                    ++n;
                }
                img.at(x, y) = static_cast<float>(acc / n);
            }
    }
    float lo = img.pixels[0], hi = img.pixels[0];
    for (float p : img.pixels) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    const float span = hi - lo > 1e-6f ? hi - lo : 1.0f;
    for (float& p : img.pixels) p = quantize_u16((p - lo) / span);
    return img;
}

}  // namespace detail

struct SyntheticPair {
    GrayImage left, right;
    std::vector<int> disparity;        // per left pixel, in [1, d_max]
    std::vector<std::uint8_t> visible; // per left pixel
    int width = 0, height = 0, d_max = 0;
};

// Left image: textured noise. Right image: every left pixel splatted to
// column x - d with a z-buffer (larger disparity in front); left pixels that
// lose the z test or leave the frame are occluded; right-image holes get an
// independent filler texture. n_regions = 1 gives a constant-disparity
// field; more add random rectangles.
inline SyntheticPair make_synthetic_pair(Rng& rng, int width, int height, int d_max, int n_regions,
                                         bool perturb) {
    if (d_max >= width / 4)
        throw ConfigError("synthetic pairs need d_max < width/4, got d_max=" +
                          std::to_string(d_max) + " width=" + std::to_string(width));
    if (d_max < 1 || n_regions < 1) throw ConfigError("need d_max >= 1 and n_regions >= 1");

    SyntheticPair out;
    out.width = width;
    out.height = height;
    out.d_max = d_max;
    out.left = detail::make_texture(rng, width, height);
    const GrayImage filler = detail::make_texture(rng, width, height);

    // Piecewise-constant disparity field: background plus painted rectangles.
    // Disparities start at 1 so the value*256 encoding never hits the
    // "unknown" sentinel 0.
    out.disparity.assign(static_cast<std::size_t>(width) * height, 0);
    const int bg = static_cast<int>(rng.uniform_int(1, d_max));
    std::fill(out.disparity.begin(), out.disparity.end(), bg);
    for (int r = 1; r < n_regions; ++r) {
        const int rw = static_cast<int>(rng.uniform_int(std::max(4, width / 10), std::max(8, width / 4)));
        const int rh =
            static_cast<int>(rng.uniform_int(std::max(4, height / 10), std::max(8, height / 4)));
        const int x0 = static_cast<int>(rng.uniform_int(0, std::max(0, width - rw - 1)));
        const int y0 = static_cast<int>(rng.uniform_int(0, std::max(0, height - rh - 1)));
        const int d = static_cast<int>(rng.uniform_int(1, d_max));
        for (int y = y0; y < std::min(height, y0 + rh); ++y)
            for (int x = x0; x < std::min(width, x0 + rw); ++x)
                out.disparity[static_cast<std::size_t>(y) * width + x] = d;
    }

    out.right = filler;
    std::vector<int> zbuf(static_cast<std::size_t>(width) * height, -1);
    std::vector<int> src(static_cast<std::size_t>(width) * height, -1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int d = out.disparity[static_cast<std::size_t>(y) * width + x];
            const int xr = x - d;
            if (xr < 0) continue;
            const std::size_t k = static_cast<std::size_t>(y) * width + xr;
            if (d > zbuf[k]) {
                zbuf[k] = d;
                src[k] = x;
                out.right.at(xr, y) = out.left.at(x, y);
            }
        }
    }
    out.visible.assign(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int d = out.disparity[static_cast<std::size_t>(y) * width + x];
            const int xr = x - d;
            if (xr >= 0 && src[static_cast<std::size_t>(y) * width + xr] == x)
                out.visible[static_cast<std::size_t>(y) * width + x] = 1;
        }
    }

    if (perturb) {
        const float a = rng.uniform_float(0.8f, 1.25f);
        const float b = rng.uniform_float(-0.08f, 0.08f);
        for (float& p : out.right.pixels) p = detail::quantize_u16(a * p + b);
    }
    return out;
}

inline GroundTruthDisparity synthetic_ground_truth(const SyntheticPair& pair) {
    GroundTruthDisparity gt;
    gt.width = pair.width;
    gt.height = pair.height;
    const std::size_t n = pair.disparity.size();
    gt.values.resize(n);
    gt.known.assign(n, 1);
    gt.occlusion.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        gt.values[k] = static_cast<float>(pair.disparity[k]);
        gt.occlusion[k] = static_cast<std::uint8_t>(pair.visible[k] ? Occlusion::Visible
                                                                    : Occlusion::Occluded);
    }
    return gt;
}

// Writes pairs, ground truth (value*256 PNG plus occlusion companion) and a
// manifest; returns the manifest path. Region count per pair is drawn from
// [2, 5] unless fixed_regions > 0 pins it.
inline std::string write_synthetic_dataset(const std::string& out_dir, std::uint64_t seed,
                                           int n_pairs, int width, int height, int d_max,
                                           bool perturb, int fixed_regions = 0) {
    if (n_pairs < 1) throw ConfigError("need at least one pair");
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);
    Rng master(seed);

    std::ofstream manifest(base / "manifest.txt", std::ios::trunc);
    if (!manifest) throw DataError("cannot write manifest in " + out_dir);
    for (int p = 0; p < n_pairs; ++p) {
        Rng rng = master.fork(static_cast<std::uint64_t>(p));
        const int regions =
            fixed_regions > 0 ? fixed_regions : static_cast<int>(rng.uniform_int(2, 5));
        const SyntheticPair pair = make_synthetic_pair(rng, width, height, d_max, regions, perturb);

        char name[32];
        std::snprintf(name, sizeof(name), "pair_%03d", p);
        const std::string left_name = std::string(name) + "_left.pgm";
        const std::string right_name = std::string(name) + "_right.pgm";
        const std::string gt_name = std::string(name) + "_gt.png";
        write_pgm(pair.left, (base / left_name).string(), 65535);
        write_pgm(pair.right, (base / right_name).string(), 65535);

        std::vector<std::uint16_t> encoded(pair.disparity.size());
        for (std::size_t k = 0; k < encoded.size(); ++k)
            encoded[k] = static_cast<std::uint16_t>(pair.disparity[k] * 256);
        write_png_u16(encoded, width, height, (base / gt_name).string());

        GrayImage occ(width, height);
        for (std::size_t k = 0; k < pair.visible.size(); ++k)
            occ.pixels[k] = pair.visible[k] ? 0.0f : 1.0f;
        write_pgm(occ, (base / (gt_name + ".occ.pgm")).string(), 255);

        manifest << left_name << " " << right_name << " " << gt_name << " UINT16_PNG_X256 " << d_max
                 << "\n";
    }
    if (!manifest) throw DataError("failed writing manifest in " + out_dir);
    return (base / "manifest.txt").string();
}

}  // namespace patchsim
