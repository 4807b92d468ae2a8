#pragma once

#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/match_path.hpp"
#include "patchsim/similarity.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

struct LossConfig {
    double mu = 0.2;  // hinge margin, similarity units
    int t_sup = 2;    // suppression radius, descriptor indices
    int t_occ = 3;    // occlusion run threshold, cells

    void validate() const {
        if (mu <= 0.0) throw ConfigError("mu must be > 0");
        if (t_sup < 0) throw ConfigError("t_sup must be >= 0");
        if (t_occ < 1) throw ConfigError("t_occ must be >= 1");
    }
};

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

namespace detail {

inline void check_same_band(const SimilarityMatrix& a, const SimilarityMatrix& b, const char* what) {
    if (a.dim != b.dim || a.d_max != b.d_max)
        throw ShapeError(std::string(what) + ": matrices must share dim and d_max");
}

}  // namespace detail

// Best-in-row of the positive line must beat best-in-row of the negative
// line by the margin, and per column likewise; only rows/columns whose true
// match is guaranteed inside the band take part. Gradients land on the
// argmax cells of active hinges.
struct MilLoss {
    double value = 0.0;
    Tensor d_rp, d_rn, d_np;  // [W,W] each
};

inline MilLoss mil_loss(const SimilarityMatrix& S_rp, const SimilarityMatrix& S_rn,
                        const SimilarityMatrix& S_np, const ValidityRanges& ranges, double mu) {
    detail::check_same_band(S_rp, S_rn, "mil_loss");
    detail::check_same_band(S_rp, S_np, "mil_loss");
    if (mu <= 0.0) throw ConfigError("mil_loss: mu must be > 0");
    if (ranges.row_count() <= 0 || ranges.col_count() <= 0)
        throw ConfigError("mil_loss: empty validity ranges (need W > d_max)");

    const int W = S_rp.dim;
    MilLoss out;
    out.d_rp = Tensor({W, W});
    out.d_rn = Tensor({W, W});
    out.d_np = Tensor({W, W});

    const double row_w = 1.0 / static_cast<double>(ranges.row_count());
    for (int i = ranges.row_begin; i < ranges.row_end; ++i) {
        const MaxEntry pos = row_max(S_rp, i);
        const MaxEntry neg = row_max(S_rn, i);
        if (!pos.found || !neg.found) continue;
        const double arg = static_cast<double>(neg.value) - static_cast<double>(pos.value) + mu;
        if (arg > 0.0) {
            out.value += arg * row_w;
            out.d_rn.values[static_cast<std::size_t>(i) * W + neg.index] += static_cast<float>(row_w);
            out.d_rp.values[static_cast<std::size_t>(i) * W + pos.index] -= static_cast<float>(row_w);
        }
    }
    const double col_w = 1.0 / static_cast<double>(ranges.col_count());
    for (int j = ranges.col_begin; j < ranges.col_end; ++j) {
        const MaxEntry pos = col_max(S_rp, j);
        const MaxEntry neg = col_max(S_np, j);
        if (!pos.found || !neg.found) continue;
        const double arg = static_cast<double>(neg.value) - static_cast<double>(pos.value) + mu;
        if (arg > 0.0) {
            out.value += arg * col_w;
            out.d_np.values[static_cast<std::size_t>(neg.index) * W + j] += static_cast<float>(col_w);
            out.d_rp.values[static_cast<std::size_t>(pos.index) * W + j] -= static_cast<float>(col_w);
        }
    }
    return out;
}

// Best-in-row must beat the best entry outside the suppression radius of
// the maximum (the nearest genuine competitor), per row and per column.
// Rows/columns whose competitors are entirely suppressed contribute 0 and
// are tallied.
struct ContrastiveLoss {
    double value = 0.0;
    Tensor d_rp;
    int suppressed_rows = 0;
    int suppressed_cols = 0;
};

inline ContrastiveLoss contrastive_loss(const SimilarityMatrix& S_rp, const ValidityRanges& ranges,
                                        double mu, int t_sup) {
    if (mu <= 0.0) throw ConfigError("contrastive_loss: mu must be > 0");
    if (ranges.row_count() <= 0 || ranges.col_count() <= 0)
        throw ConfigError("contrastive_loss: empty validity ranges (need W > d_max)");

    const int W = S_rp.dim;
    ContrastiveLoss out;
    out.d_rp = Tensor({W, W});
    const SimilarityMatrix masked_rows = mask_row_maxima(S_rp, t_sup);
    const SimilarityMatrix masked_cols = mask_col_maxima(S_rp, t_sup);

    const double row_w = 1.0 / static_cast<double>(ranges.row_count());
    for (int i = ranges.row_begin; i < ranges.row_end; ++i) {
        const MaxEntry best = row_max(S_rp, i);
        if (!best.found) continue;
        const MaxEntry second = row_max(masked_rows, i);
        if (!second.found) {
            ++out.suppressed_rows;
            continue;
        }
        if (second.index == best.index)
            throw StateError("contrastive_loss: masked row max equals the unmasked max");
        const double arg = static_cast<double>(second.value) - static_cast<double>(best.value) + mu;
        if (arg > 0.0) {
            out.value += arg * row_w;
            out.d_rp.values[static_cast<std::size_t>(i) * W + second.index] += static_cast<float>(row_w);
            out.d_rp.values[static_cast<std::size_t>(i) * W + best.index] -= static_cast<float>(row_w);
        }
    }
    const double col_w = 1.0 / static_cast<double>(ranges.col_count());
    for (int j = ranges.col_begin; j < ranges.col_end; ++j) {
        const MaxEntry best = col_max(S_rp, j);
        if (!best.found) continue;
        const MaxEntry second = col_max(masked_cols, j);
        if (!second.found) {
            ++out.suppressed_cols;
            continue;
        }
        if (second.index == best.index)
            throw StateError("contrastive_loss: masked column max equals the unmasked max");
        const double arg = static_cast<double>(second.value) - static_cast<double>(best.value) + mu;
        if (arg > 0.0) {
            out.value += arg * col_w;
            out.d_rp.values[static_cast<std::size_t>(second.index) * W + j] += static_cast<float>(col_w);
            out.d_rp.values[static_cast<std::size_t>(best.index) * W + j] -= static_cast<float>(col_w);
        }
    }
    return out;
}

// Sum of the two objectives above; gradients add elementwise.
struct MilContrastiveLoss {
    double value = 0.0;
    Tensor d_rp, d_rn, d_np;
    int suppressed_rows = 0;
    int suppressed_cols = 0;
};

inline MilContrastiveLoss mil_contrastive_loss(const SimilarityMatrix& S_rp,
                                               const SimilarityMatrix& S_rn,
                                               const SimilarityMatrix& S_np,
                                               const ValidityRanges& ranges, double mu, int t_sup) {
    MilLoss mil = mil_loss(S_rp, S_rn, S_np, ranges, mu);
    ContrastiveLoss con = contrastive_loss(S_rp, ranges, mu, t_sup);
    MilContrastiveLoss out;
    out.value = mil.value + con.value;
    out.d_rp = std::move(mil.d_rp);
    for (std::size_t k = 0; k < out.d_rp.values.size(); ++k)
        out.d_rp.values[k] += con.d_rp.values[k];
    out.d_rn = std::move(mil.d_rn);
    out.d_np = std::move(mil.d_np);
    out.suppressed_rows = con.suppressed_rows;
    out.suppressed_cols = con.suppressed_cols;
    return out;
}

// Every kept cell of the match path must beat the best competitor in its row
// and in its column, where competitors are taken on a copy of S with the
// whole path neighborhood suppressed. The path is a constant here: gradients
// flow to cell values only, never through the path selection.
struct ContrastiveDpLoss {
    double value = 0.0;
    Tensor d_rp;
    bool degenerate = false;  // no kept cells (fully occluded line)
};

inline ContrastiveDpLoss contrastive_dp_loss(const SimilarityMatrix& S_rp, const MatchPath& path,
                                             double mu, int t_sup) {
    if (mu <= 0.0) throw ConfigError("contrastive_dp_loss: mu must be > 0");
    if (path.kept.size() != path.cells.size())
        throw ContractError("contrastive_dp_loss: kept mask size mismatch");

    const int W = S_rp.dim;
    ContrastiveDpLoss out;
    out.d_rp = Tensor({W, W});

    const std::size_t kept = path.kept_count();
    if (kept == 0) {
        out.degenerate = true;
        return out;
    }
    const SimilarityMatrix suppressed = suppress_path_neighborhood(S_rp, path, t_sup);

    const double w = 1.0 / static_cast<double>(kept);
    for (std::size_t k = 0; k < path.cells.size(); ++k) {
        if (!path.kept[k]) continue;
        const PathCell& c = path.cells[k];
        if (!S_rp.valid(c.i, c.j))
            throw ContractError("contrastive_dp_loss: kept path cell is banned in S");
        const double s = static_cast<double>(S_rp.at(c.i, c.j));
        const std::size_t cell_off = static_cast<std::size_t>(c.i) * W + c.j;

        const MaxEntry row_comp = row_max(suppressed, c.i);
        if (row_comp.found) {
            const double arg = static_cast<double>(row_comp.value) - s + mu;
            if (arg > 0.0) {
                out.value += arg * w;
                out.d_rp.values[static_cast<std::size_t>(c.i) * W + row_comp.index] +=
                    static_cast<float>(w);
                out.d_rp.values[cell_off] -= static_cast<float>(w);
            }
        }
        const MaxEntry col_comp = col_max(suppressed, c.j);
        if (col_comp.found) {
            const double arg = static_cast<double>(col_comp.value) - s + mu;
            if (arg > 0.0) {
                out.value += arg * w;
                out.d_rp.values[static_cast<std::size_t>(col_comp.index) * W + c.j] +=
                    static_cast<float>(w);
                out.d_rp.values[cell_off] -= static_cast<float>(w);
            }
        }
    }
    return out;
}

}  // namespace patchsim
