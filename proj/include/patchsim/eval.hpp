#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "patchsim/data.hpp"
#include "patchsim/embedding.hpp"
#include "patchsim/errors.hpp"
#include "patchsim/image.hpp"
#include "patchsim/similarity.hpp"

namespace patchsim {

// Winner-take-all prediction: per row, disparity i - argmax_j over the VALID
// band (lowest-j tie-break). Rows with truncated bands still predict over
// what they have.
inline std::vector<int> wta_disparity(const SimilarityMatrix& S) {
    std::vector<int> out(static_cast<std::size_t>(S.dim), -1);
    for (int i = 0; i < S.dim; ++i) {
        const MaxEntry best = row_max(S, i);
        if (best.found) out[i] = i - best.index;
    }
    return out;
}

// Predictions for one image row, aligned to image columns: descriptor k
// describes the patch centered at column col_offset + k.
struct PredictedRow {
    int row = 0;
    int col_offset = 0;
    std::vector<int> disparity;
};

struct WtaPerLine {
    int row = 0;
    long errors = 0;
    long evaluated = 0;
};

struct WtaReport {
    double error_rate = 0.0;
    long errors = 0;
    long evaluated = 0;
    long border_excluded = 0;    // pixels with no descriptor (image borders)
    long unknown_excluded = 0;   // no GT measurement or unknown visibility
    long occluded_excluded = 0;  // GT marks the pixel occluded
    bool undefined = false;      // no pixel was evaluable
    std::vector<WtaPerLine> per_line;
};

// A prediction is an error iff |pred - gt| > threshold (strict). Only KNOWN,
// VISIBLE pixels with a descriptor count; everything else is tallied into
// the exclusion buckets.
inline WtaReport wta_error_rate(const std::vector<PredictedRow>& predictions,
                                const GroundTruthDisparity& gt, double threshold = 3.0) {
    WtaReport report;
    std::vector<std::uint8_t> row_covered(static_cast<std::size_t>(gt.height), 0);
    for (const PredictedRow& pred : predictions) {
        if (pred.row < 0 || pred.row >= gt.height)
            throw ShapeError("predicted row " + std::to_string(pred.row) +
                             " outside ground truth of height " + std::to_string(gt.height));
        row_covered[pred.row] = 1;
        WtaPerLine line;
        line.row = pred.row;
        report.border_excluded += gt.width - static_cast<long>(pred.disparity.size());
        for (std::size_t k = 0; k < pred.disparity.size(); ++k) {
            const int col = pred.col_offset + static_cast<int>(k);
            if (col < 0 || col >= gt.width)
                throw ShapeError("prediction column " + std::to_string(col) +
                                 " outside ground truth of width " + std::to_string(gt.width));
            if (!gt.known_at(col, pred.row)) {
                ++report.unknown_excluded;
                continue;
            }
            const Occlusion occ = gt.occlusion_at(col, pred.row);
            if (occ == Occlusion::Occluded) {
                ++report.occluded_excluded;
                continue;
            }
            if (occ == Occlusion::Unknown) {
                ++report.unknown_excluded;
                continue;
            }
            // The true match of descriptor k sits at right index k - gt;
            // when that falls off the descriptor grid (left image border),
            // no prediction can be right and the pixel is border territory.
            if (gt.value_at(col, pred.row) > static_cast<float>(k)) {
                ++report.border_excluded;
                continue;
            }
            ++line.evaluated;
            const double err =
                std::abs(static_cast<double>(pred.disparity[k]) - gt.value_at(col, pred.row));
            if (err > threshold) ++line.errors;
        }
        report.errors += line.errors;
        report.evaluated += line.evaluated;
        report.per_line.push_back(line);
    }
    for (int y = 0; y < gt.height; ++y)
        if (!row_covered[y]) report.border_excluded += gt.width;
    if (report.evaluated == 0) {
        report.undefined = true;
        report.error_rate = 0.0;
    } else {
        report.error_rate = static_cast<double>(report.errors) / static_cast<double>(report.evaluated);
    }
    return report;
}

// Runs the net over every band of one stereo pair and evaluates against gt.
inline WtaReport evaluate_pair(const EmbeddingNet& net, const StereoPair& pair,
                               const GroundTruthDisparity& gt, double threshold = 3.0) {
    if (gt.width != pair.width() || gt.height != pair.height())
        throw DataError("ground truth size does not match the stereo pair");
    if (pair.d_max <= 0 || pair.d_max >= descriptor_count(pair.width(), net.patch_size))
        throw ConfigError("d_max " + std::to_string(pair.d_max) +
                          " is not inside the descriptor range of width " +
                          std::to_string(pair.width()));
    std::vector<PredictedRow> predictions;
    const int half = (net.patch_size - 1) / 2;
    const int lo = first_valid_row(net.patch_size);
    const int hi = last_valid_row(pair.height(), net.patch_size);
    for (int row = lo; row <= hi; ++row) {
        const EmbeddingTrace ref = embed_line(net, band_from_image(pair.left, row, net.patch_size));
        const EmbeddingTrace pos = embed_line(net, band_from_image(pair.right, row, net.patch_size));
        const SimilarityMatrix S =
            build_banded_similarity(ref.descriptors, pos.descriptors, pair.d_max);
        PredictedRow pred;
        pred.row = row;
        pred.col_offset = half;
        pred.disparity = wta_disparity(S);
        predictions.push_back(std::move(pred));
    }
    return wta_error_rate(predictions, gt, threshold);
}

inline WtaReport merge_reports(const std::vector<WtaReport>& reports) {
    WtaReport total;
    for (const WtaReport& r : reports) {
        total.errors += r.errors;
        total.evaluated += r.evaluated;
        total.border_excluded += r.border_excluded;
        total.unknown_excluded += r.unknown_excluded;
        total.occluded_excluded += r.occluded_excluded;
    }
    if (total.evaluated == 0) {
        total.undefined = true;
        total.error_rate = 0.0;
    } else {
        total.error_rate = static_cast<double>(total.errors) / static_cast<double>(total.evaluated);
    }
    return total;
}

// 8-bit graymap of the band: the VALID value range maps linearly onto
// [255..0] so high similarity renders dark; BANNED cells are white. A
// constant band renders solid black.
inline void dump_similarity_image(const SimilarityMatrix& S, const std::string& out_path) {
    float lo = 0.0f, hi = 0.0f;
    bool any = false;
    for (int i = 0; i < S.dim; ++i)
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
            if (!S.valid(i, j)) continue;
            const float v = S.at(i, j);
            if (!any) {
                lo = hi = v;
                any = true;
            } else {
                if (v < lo) lo = v;
                if (v > hi) hi = v;
            }
        }
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(S.dim) * S.dim, 255);
    const float span = hi - lo;
    for (int i = 0; i < S.dim; ++i)
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
            if (!S.valid(i, j)) continue;
            std::uint8_t px = 0;
            if (span > 0.0f) {
                const float t = (hi - S.at(i, j)) / span;  // max -> 0 (dark)
                px = static_cast<std::uint8_t>(std::lround(t * 255.0f));
            }
            bytes[static_cast<std::size_t>(i) * S.dim + j] = px;
        }
    write_pgm_bytes(bytes, S.dim, S.dim, out_path);
}

}  // namespace patchsim
