#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/match_path.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

// Banned entries carry this sentinel so max/sum arithmetic stays finite while
// still losing against every cosine value in [-1, 1].
inline constexpr float kBannedValue = -1e9f;

// W x W similarity matrix between two descriptor lines, valid only on the
// band 0 <= i - j <= d_max (a match can only shift left, by at most d_max).
struct SimilarityMatrix {
    int dim = 0;
    int d_max = 0;
    std::vector<float> entries;      // row-major, banned cells hold kBannedValue
    std::vector<std::uint8_t> mask;  // 1 = valid

    float at(int i, int j) const { return entries[static_cast<std::size_t>(i) * dim + j]; }
    float& at(int i, int j) { return entries[static_cast<std::size_t>(i) * dim + j]; }
    bool valid(int i, int j) const { return mask[static_cast<std::size_t>(i) * dim + j] != 0; }

    void ban(int i, int j) {
        mask[static_cast<std::size_t>(i) * dim + j] = 0;
        entries[static_cast<std::size_t>(i) * dim + j] = kBannedValue;
    }

    // Column range of the band in row i: [col_lo, col_hi] inclusive.
    int col_lo(int i) const { return i - d_max > 0 ? i - d_max : 0; }
    int col_hi(int i) const { return i; }
    // Row range of the band in column j: [row_lo, row_hi] inclusive.
    int row_lo(int j) const { return j; }
    int row_hi(int j) const { return j + d_max < dim - 1 ? j + d_max : dim - 1; }

    bool in_band(int i, int j) const {
        return i >= 0 && i < dim && j >= 0 && j < dim && i - j >= 0 && i - j <= d_max;
    }
};

inline SimilarityMatrix make_banded(int dim, int d_max) {
    if (dim <= 0) throw ConfigError("similarity matrix dim must be positive");
    if (d_max < 0 || d_max >= dim)
        throw ConfigError("d_max must be in [0, dim), got d_max=" + std::to_string(d_max) +
                          " dim=" + std::to_string(dim));
    SimilarityMatrix S;
    S.dim = dim;
    S.d_max = d_max;
    S.entries.assign(static_cast<std::size_t>(dim) * dim, kBannedValue);
    S.mask.assign(static_cast<std::size_t>(dim) * dim, 0);
    for (int i = 0; i < dim; ++i)
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j)
            S.mask[static_cast<std::size_t>(i) * dim + j] = 1;
    return S;
}

// Band dot products between two descriptor lines [W, F]. Only the
// W*(d_max+1) band entries are computed.
inline SimilarityMatrix build_banded_similarity(const Tensor& a, const Tensor& b, int d_max) {
    if (a.shape.size() != 2 || b.shape != a.shape)
        throw ShapeError("build_banded_similarity: descriptor lines must share shape [W,F], got " +
                         a.shape_str() + " and " + b.shape_str());
    const int W = a.shape[0], F = a.shape[1];
    if (d_max <= 0 || d_max >= W)
        throw ConfigError("build_banded_similarity: need 0 < d_max < W, got d_max=" +
                          std::to_string(d_max) + " W=" + std::to_string(W));
    SimilarityMatrix S = make_banded(W, d_max);
    for (int i = 0; i < W; ++i) {
        const float* ai = a.values.data() + static_cast<std::size_t>(i) * F;
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j)
            S.at(i, j) = static_cast<float>(dot(ai, b.values.data() + static_cast<std::size_t>(j) * F,
                                                static_cast<std::size_t>(F)));
    }
    return S;
}

// Backprop of build_banded_similarity: d(a_i . b_j) scatters into both
// descriptor lines. d_entries may be dense; only band cells are read.
inline void similarity_backward(const Tensor& a, const Tensor& b, const SimilarityMatrix& S,
                                const Tensor& d_entries, float scale, Tensor& d_a, Tensor& d_b) {
    const int W = a.shape[0], F = a.shape[1];
    require_shape(d_entries, {W, W}, "similarity_backward: d_entries");
    require_shape(d_a, a.shape, "similarity_backward: d_a");
    require_shape(d_b, b.shape, "similarity_backward: d_b");
    for (int i = 0; i < W; ++i) {
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
            const float g = d_entries.values[static_cast<std::size_t>(i) * W + j];
            if (g == 0.0f) continue;
            const float gs = g * scale;
            const float* ai = a.values.data() + static_cast<std::size_t>(i) * F;
            const float* bj = b.values.data() + static_cast<std::size_t>(j) * F;
            float* dai = d_a.values.data() + static_cast<std::size_t>(i) * F;
            float* dbj = d_b.values.data() + static_cast<std::size_t>(j) * F;
            for (int f = 0; f < F; ++f) {
                dai[f] += gs * bj[f];
                dbj[f] += gs * ai[f];
            }
        }
    }
}

// Index sets over which the hinge losses aggregate: rows late enough that
// their true match is inside the band, and the mirror set of columns.
// Half-open, 0-based.
struct ValidityRanges {
    int row_begin = 0, row_end = 0;
    int col_begin = 0, col_end = 0;
    int row_count() const { return row_end - row_begin; }
    int col_count() const { return col_end - col_begin; }
};

inline ValidityRanges make_validity_ranges(int dim, int d_max) {
    if (dim <= d_max)
        throw ConfigError("validity ranges are empty: need W > d_max, got W=" + std::to_string(dim) +
                          " d_max=" + std::to_string(d_max));
    return ValidityRanges{d_max, dim, 0, dim - d_max};
}

struct MaxEntry {
    float value = kBannedValue;
    int index = -1;
    bool found = false;
};

// Max over VALID entries of row i (lowest-j tie-break).
inline MaxEntry row_max(const SimilarityMatrix& S, int i) {
    MaxEntry best;
    for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
        if (!S.valid(i, j)) continue;
        const float v = S.at(i, j);
        if (!best.found || v > best.value) best = {v, j, true};
    }
    return best;
}

// Max over VALID entries of column j (lowest-i tie-break).
inline MaxEntry col_max(const SimilarityMatrix& S, int j) {
    MaxEntry best;
    for (int i = S.row_lo(j); i <= S.row_hi(j); ++i) {
        if (!S.valid(i, j)) continue;
        const float v = S.at(i, j);
        if (!best.found || v > best.value) best = {v, i, true};
    }
    return best;
}

// Copy of S with each row's maximum and its neighbors within radius banned,
// so the surviving row max is the nearest genuine competitor. Rows with no
// valid entries are skipped.
inline SimilarityMatrix mask_row_maxima(const SimilarityMatrix& S, int radius) {
    if (radius < 0) throw ConfigError("mask radius must be >= 0");
    SimilarityMatrix out = S;
    for (int i = 0; i < S.dim; ++i) {
        const MaxEntry best = row_max(S, i);
        if (!best.found) continue;
        const int lo = std::max(S.col_lo(i), best.index - radius);
        const int hi = std::min(S.col_hi(i), best.index + radius);
        for (int j = lo; j <= hi; ++j)
            if (out.valid(i, j)) out.ban(i, j);
    }
    return out;
}

inline SimilarityMatrix mask_col_maxima(const SimilarityMatrix& S, int radius) {
    if (radius < 0) throw ConfigError("mask radius must be >= 0");
    SimilarityMatrix out = S;
    for (int j = 0; j < S.dim; ++j) {
        const MaxEntry best = col_max(S, j);
        if (!best.found) continue;
        const int lo = std::max(S.row_lo(j), best.index - radius);
        const int hi = std::min(S.row_hi(j), best.index + radius);
        for (int i = lo; i <= hi; ++i)
            if (out.valid(i, j)) out.ban(i, j);
    }
    return out;
}

// Copy of S with, for every path cell (i,j), the row-i entries within radius
// of j and the column-j entries within radius of i banned (the cell itself
// falls inside both). Competitor maxima taken on the result cannot sit on or
// near the path.
inline SimilarityMatrix suppress_path_neighborhood(const SimilarityMatrix& S, const MatchPath& path,
                                                   int radius) {
    if (radius < 0) throw ConfigError("suppression radius must be >= 0");
    SimilarityMatrix out = S;
    for (const PathCell& c : path.cells) {
        if (!S.in_band(c.i, c.j))
            throw ContractError("path cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                                ") outside the similarity band");
        const int jlo = std::max(S.col_lo(c.i), c.j - radius);
        const int jhi = std::min(S.col_hi(c.i), c.j + radius);
        for (int j = jlo; j <= jhi; ++j)
            if (out.valid(c.i, j)) out.ban(c.i, j);
        const int ilo = std::max(S.row_lo(c.j), c.i - radius);
        const int ihi = std::min(S.row_hi(c.j), c.i + radius);
        for (int i = ilo; i <= ihi; ++i)
            if (out.valid(i, c.j)) out.ban(i, c.j);
    }
    return out;
}

}  // namespace patchsim
