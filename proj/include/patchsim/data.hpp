#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/image.hpp"
#include "patchsim/png_io.hpp"
#include "patchsim/rng.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

struct StereoPair {
    GrayImage left, right;
    std::string id;
    int d_max = 0;

    int width() const { return left.width; }
    int height() const { return left.height; }
};

// Ground truth is consumed by evaluation only; the training losses have no
// interface that accepts it.
enum class Occlusion : std::uint8_t { Visible = 0, Occluded = 1, Unknown = 2 };

struct GroundTruthDisparity {
    int width = 0;
    int height = 0;
    std::vector<float> values;
    std::vector<std::uint8_t> known;      // 1 = KNOWN
    std::vector<std::uint8_t> occlusion;  // Occlusion codes

    float value_at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool known_at(int x, int y) const { return known[static_cast<std::size_t>(y) * width + x] != 0; }
    Occlusion occlusion_at(int x, int y) const {
        return static_cast<Occlusion>(occlusion[static_cast<std::size_t>(y) * width + x]);
    }
};

enum class GtFormat { Uint16PngX256, Pfm };

inline GtFormat parse_gt_format(const std::string& token) {
    if (token == "UINT16_PNG_X256") return GtFormat::Uint16PngX256;
    if (token == "PFM") return GtFormat::Pfm;
    throw DataError("unknown ground-truth format '" + token + "'");
}

inline GrayImage load_gray_image(const std::string& path) {
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".png" || ext == ".PNG") return read_png_gray(path);
    if (ext == ".pgm" || ext == ".PGM" || ext == ".ppm") return read_pgm(path);
    throw DataError("unsupported image extension '" + ext + "' for " + path);
}

inline StereoPair load_stereo_pair(const std::string& left_path, const std::string& right_path) {
    StereoPair pair;
    pair.left = load_gray_image(left_path);
    pair.right = load_gray_image(right_path);
    if (pair.left.width != pair.right.width || pair.left.height != pair.right.height)
        throw DataError("stereo pair is not rectified consistently: " + left_path + " is " +
                        std::to_string(pair.left.width) + "x" + std::to_string(pair.left.height) +
                        ", " + right_path + " is " + std::to_string(pair.right.width) + "x" +
                        std::to_string(pair.right.height));
    return pair;
}

// An occlusion companion `<gt_path>.occ.pgm` (0 = visible, 255 = occluded)
// is honored when present; without one, visibility is unknown and the
// evaluator excludes the pixel.
inline GroundTruthDisparity load_ground_truth(const std::string& path, GtFormat format) {
    GroundTruthDisparity gt;
    if (format == GtFormat::Uint16PngX256) {
        int w = 0, h = 0;
        const std::vector<std::uint16_t> raw = read_png_u16(path, w, h);
        gt.width = w;
        gt.height = h;
        gt.values.assign(raw.size(), 0.0f);
        gt.known.assign(raw.size(), 0);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (raw[k] == 0) continue;  // 0 encodes "no measurement"
            gt.values[k] = static_cast<float>(raw[k]) / 256.0f;
            gt.known[k] = 1;
        }
    } else {
        const GrayImage img = read_pfm(path);
        gt.width = img.width;
        gt.height = img.height;
        gt.values.assign(img.pixels.size(), 0.0f);
        gt.known.assign(img.pixels.size(), 0);
        for (std::size_t k = 0; k < img.pixels.size(); ++k) {
            if (!std::isfinite(img.pixels[k])) continue;
            gt.values[k] = img.pixels[k];
            gt.known[k] = 1;
        }
    }
    gt.occlusion.assign(gt.values.size(), static_cast<std::uint8_t>(Occlusion::Unknown));
    const std::string occ_path = path + ".occ.pgm";
    if (std::filesystem::exists(occ_path)) {
        const GrayImage occ = read_pgm(occ_path);
        if (occ.width != gt.width || occ.height != gt.height)
            throw DataError("occlusion mask size mismatch: " + occ_path);
        for (std::size_t k = 0; k < gt.occlusion.size(); ++k)
            gt.occlusion[k] = static_cast<std::uint8_t>(occ.pixels[k] < 0.5f ? Occlusion::Visible
                                                                             : Occlusion::Occluded);
    }
    return gt;
}

// One record per line: `left right [gt gt_format] d_max`, paths relative to
// the manifest's directory. '#' starts a comment.
struct ManifestEntry {
    std::string id;
    std::string left, right, gt;
    bool has_gt = false;
    GtFormat gt_format = GtFormat::Uint16PngX256;
    int d_max = 0;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        return std::filesystem::path(p).is_absolute() ? p : (base / p).string();
    };

    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        ManifestEntry e;
        e.id = std::to_string(entries.size());
        try {
            if (tokens.size() == 3) {
                e.left = resolve(tokens[0]);
                e.right = resolve(tokens[1]);
                e.d_max = std::stoi(tokens[2]);
            } else if (tokens.size() == 5) {
                e.left = resolve(tokens[0]);
                e.right = resolve(tokens[1]);
                e.gt = resolve(tokens[2]);
                e.gt_format = parse_gt_format(tokens[3]);
                e.has_gt = true;
                e.d_max = std::stoi(tokens[4]);
            } else {
                throw DataError("expected 3 or 5 fields, got " + std::to_string(tokens.size()));
            }
        } catch (const DataError& err) {
            throw DataError("manifest " + path + " line " + std::to_string(line_no) + ": " +
                            err.what());
        } catch (const std::exception&) {
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": malformed d_max");
        }
        if (e.d_max <= 0)
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": d_max must be positive");
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw DataError("manifest has no records: " + path);
    return entries;
}

// [1, patch_size, W] horizontal band centered on `row`.
inline Tensor band_from_image(const GrayImage& img, int center_row, int patch_size) {
    const int half = (patch_size - 1) / 2;
    if (center_row - half < 0 || center_row + half >= img.height)
        throw ShapeError("band centered at row " + std::to_string(center_row) +
                         " does not fit an image of height " + std::to_string(img.height));
    Tensor band({1, patch_size, img.width});
    for (int r = 0; r < patch_size; ++r) {
        const float* src = img.pixels.data() +
                           static_cast<std::size_t>(center_row - half + r) * img.width;
        std::copy(src, src + img.width, band.values.data() + static_cast<std::size_t>(r) * img.width);
    }
    return band;
}

// Reference/positive bands share the row; the negative band comes from a
// right-image row far enough away that the bands cannot overlap.
struct LineTriplet {
    Tensor reference_band, positive_band, negative_band;
    int row = 0;
    int negative_row = 0;
};

inline int first_valid_row(int patch_size) { return (patch_size - 1) / 2; }
inline int last_valid_row(int height, int patch_size) { return height - 1 - (patch_size - 1) / 2; }

// Uniform draw over valid center rows at distance >= patch_size from `row`.
inline int sample_negative_row(int row, int height, int patch_size, Rng& rng) {
    const int lo = first_valid_row(patch_size);
    const int hi = last_valid_row(height, patch_size);
    const int below = std::max(0, (row - patch_size) - lo + 1);
    const int above = std::max(0, hi - (row + patch_size) + 1);
    if (below + above == 0)
        throw DataError("no negative row available: image too short for patch_size " +
                        std::to_string(patch_size));
    const int t = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(below + above)));
    return t < below ? lo + t : row + patch_size + (t - below);
}

// Every valid center row exactly once (one image's lines form one
// minibatch); negatives are drawn per row. When negative_source is given,
// negative bands are cut from that image instead of the pair's own right
// image (its height must also fit the sampled rows).
inline std::vector<LineTriplet> enumerate_line_triplets(const StereoPair& pair, int patch_size,
                                                        Rng& rng,
                                                        const GrayImage* negative_source = nullptr) {
    if (pair.height() < 3 * patch_size)
        throw DataError("image too short for line triplets: height " +
                        std::to_string(pair.height()) + " < 3*patch_size " +
                        std::to_string(3 * patch_size));
    const GrayImage& neg_img = negative_source ? *negative_source : pair.right;
    if (neg_img.width != pair.width() || neg_img.height < pair.height())
        throw DataError("negative source image does not cover the pair's size");
    std::vector<LineTriplet> out;
    const int lo = first_valid_row(patch_size);
    const int hi = last_valid_row(pair.height(), patch_size);
    out.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (int row = lo; row <= hi; ++row) {
        LineTriplet t;
        t.row = row;
        t.negative_row = sample_negative_row(row, pair.height(), patch_size, rng);
        t.reference_band = band_from_image(pair.left, row, patch_size);
        t.positive_band = band_from_image(pair.right, row, patch_size);
        t.negative_band = band_from_image(neg_img, t.negative_row, patch_size);
        out.push_back(std::move(t));
    }
    return out;
}

// Random draw of `count` triplets (rows may repeat); deterministic in rng.
inline std::vector<LineTriplet> sample_line_triplets(const StereoPair& pair, int patch_size,
                                                     Rng& rng, int count,
                                                     const GrayImage* negative_source = nullptr) {
    if (pair.height() < 3 * patch_size)
        throw DataError("image too short for line triplets: height " +
                        std::to_string(pair.height()) + " < 3*patch_size " +
                        std::to_string(3 * patch_size));
    const GrayImage& neg_img = negative_source ? *negative_source : pair.right;
    if (neg_img.width != pair.width() || neg_img.height < pair.height())
        throw DataError("negative source image does not cover the pair's size");
    const int lo = first_valid_row(patch_size);
    const int hi = last_valid_row(pair.height(), patch_size);
    std::vector<LineTriplet> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        LineTriplet t;
        t.row = lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1)));
        t.negative_row = sample_negative_row(t.row, pair.height(), patch_size, rng);
        t.reference_band = band_from_image(pair.left, t.row, patch_size);
        t.positive_band = band_from_image(pair.right, t.row, patch_size);
        t.negative_band = band_from_image(neg_img, t.negative_row, patch_size);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace patchsim
