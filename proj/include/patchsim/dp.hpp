#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/match_path.hpp"
#include "patchsim/similarity.hpp"

namespace patchsim {

// Paths start at the only band cell of row 0 and end at first contact with
// the last row or last column (within the band the last column is reachable
// only at the corner, so every complete path covers all reference rows).
inline bool is_terminal_cell(const SimilarityMatrix& S, int i, int j) {
    return i == S.dim - 1 || j == S.dim - 1;
}

// Checks every structural invariant of a complete match path on S. Throws
// ContractError naming the first violation.
inline void validate_match_path(const MatchPath& path, const SimilarityMatrix& S) {
    if (path.cells.empty()) throw ContractError("match path is empty");
    if (path.kept.size() != path.cells.size())
        throw ContractError("kept mask size does not match cell count");
    const PathCell& first = path.cells.front();
    if (first.i != 0 || first.j < 0 || first.j > std::max(0, S.d_max - 1))
        throw ContractError("path start (" + std::to_string(first.i) + "," + std::to_string(first.j) +
                            ") outside the start set");
    for (std::size_t k = 0; k < path.cells.size(); ++k) {
        const PathCell& c = path.cells[k];
        if (!S.in_band(c.i, c.j))
            throw ContractError("path cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                                ") outside the band");
        if (!S.valid(c.i, c.j))
            throw ContractError("path cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                                ") is banned");
        if (k > 0) {
            const int di = c.i - path.cells[k - 1].i;
            const int dj = c.j - path.cells[k - 1].j;
            const bool ok = (di == 0 && dj == 1) || (di == 1 && dj == 0) || (di == 1 && dj == 1);
            if (!ok)
                throw ContractError("illegal step (" + std::to_string(di) + "," + std::to_string(dj) +
                                    ") at path index " + std::to_string(k));
        }
        const bool terminal = is_terminal_cell(S, c.i, c.j);
        if (terminal && k + 1 != path.cells.size())
            throw ContractError("path continues past the boundary at index " + std::to_string(k));
        if (!terminal && k + 1 == path.cells.size())
            throw ContractError("path ends away from the boundary");
    }
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One max-sum sweep over the band with every entry shifted by -lambda.
// Returns the best terminal sum and writes the argmax path. Predecessor
// preference on ties: diagonal, then horizontal, then vertical; terminal-cell
// ties prefer the larger column (the more diagonal ending).
inline double max_sum_sweep(const SimilarityMatrix& S, double lambda, std::vector<PathCell>& out) {
    const int W = S.dim, D = S.d_max;
    const int span = D + 1;
    std::vector<double> dp(static_cast<std::size_t>(W) * span, kNegInf);
    std::vector<std::uint8_t> pred(static_cast<std::size_t>(W) * span, 0);
    auto idx = [&](int i, int j) { return static_cast<std::size_t>(i) * span + (i - j); };

    for (int i = 0; i < W; ++i) {
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
            const double v = static_cast<double>(S.at(i, j)) - lambda;
            if (i == 0 && j == 0) {
                dp[idx(i, j)] = v;
                continue;
            }
            double best = kNegInf;
            std::uint8_t code = 0;
            if (i > 0 && j > 0) {  // diagonal predecessor, never terminal
                const double c = dp[idx(i - 1, j - 1)];
                if (c > best) best = c, code = 1;
            }
            if (j > 0 && i - j < D && i < W - 1) {  // horizontal predecessor, banned in last row
                const double c = dp[idx(i, j - 1)];
                if (c > best) best = c, code = 2;
            }
            if (i > 0 && i - j > 0) {  // vertical predecessor (j == W-1 never reaches here)
                const double c = dp[idx(i - 1, j)];
                if (c > best) best = c, code = 3;
            }
            if (best == kNegInf) continue;  // unreachable
            dp[idx(i, j)] = v + best;
            pred[idx(i, j)] = code;
        }
    }

    double best = kNegInf;
    int best_j = -1;
    for (int j = S.col_lo(W - 1); j <= W - 1; ++j) {
        const double v = dp[idx(W - 1, j)];
        if (v >= best && v != kNegInf) best = v, best_j = j;
    }
    if (best_j < 0) throw StateError("no feasible path through the band");

    out.clear();
    int i = W - 1, j = best_j;
    while (true) {
        out.push_back({i, j});
        const std::uint8_t code = pred[idx(i, j)];
        if (code == 0) break;
        if (code == 1) --i, --j;
        else if (code == 2) --j;
        else --i;
    }
    std::reverse(out.begin(), out.end());
    return best;
}

inline double path_mean(const SimilarityMatrix& S, const std::vector<PathCell>& cells) {
    double sum = 0.0;
    for (const PathCell& c : cells) sum += static_cast<double>(S.at(c.i, c.j));
    return sum / static_cast<double>(cells.size());
}

}  // namespace detail

// Max-mean monotone path through the band, solved by parametric iteration:
// maximize sum(S_ij - lambda) and move lambda to the achieved mean until the
// optimal shifted sum reaches zero. Starting lambda is the all-diagonal
// path's mean (feasible, so lambda never decreases). Banned cells take part
// with their sentinel value and lose to any all-valid path.
inline MatchPath max_average_path(const SimilarityMatrix& S) {
    if (S.dim <= 0) throw ConfigError("max_average_path: empty matrix");
    if (!S.valid(0, 0)) throw StateError("max_average_path: no valid start cell in row 0");

    double lambda = 0.0;
    for (int i = 0; i < S.dim; ++i) lambda += static_cast<double>(S.at(i, i));
    lambda /= static_cast<double>(S.dim);

    MatchPath path;
    constexpr int kMaxIterations = 50;
    constexpr double kTol = 1e-9;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double shifted = detail::max_sum_sweep(S, lambda, path.cells);
        const double mean = detail::path_mean(S, path.cells);
        path.iterations = it + 1;
        path.mean_energy = mean;
        if (std::abs(shifted) <= kTol || std::abs(mean - lambda) <= kTol) break;
        lambda = mean;
    }
    for (const PathCell& c : path.cells)
        if (!S.valid(c.i, c.j))
            throw StateError("max_average_path: optimum passes through a banned cell");
    path.kept.assign(path.cells.size(), 1);
    return path;
}

// Exhaustive enumeration of every feasible path; ground truth for
// max_average_path on tiny matrices. Children are tried diagonal first, and
// only a strictly greater mean replaces the incumbent.
inline MatchPath brute_force_path_oracle(const SimilarityMatrix& S) {
    if (S.dim > 12)
        throw ContractError("brute_force_path_oracle: refusing W > 12 (exponential enumeration)");
    if (S.dim <= 0) throw ConfigError("brute_force_path_oracle: empty matrix");
    if (!S.valid(0, 0)) throw StateError("brute_force_path_oracle: no valid start cell in row 0");

    MatchPath best;
    double best_mean = detail::kNegInf;
    std::vector<PathCell> stack;
    double sum = 0.0;

    auto dfs = [&](auto&& self, int i, int j) -> void {
        stack.push_back({i, j});
        sum += static_cast<double>(S.at(i, j));
        if (is_terminal_cell(S, i, j)) {
            const double mean = sum / static_cast<double>(stack.size());
            if (mean > best_mean) {
                best_mean = mean;
                best.cells = stack;
            }
        } else {
            if (S.in_band(i + 1, j + 1)) self(self, i + 1, j + 1);
            if (S.in_band(i, j + 1)) self(self, i, j + 1);
            if (S.in_band(i + 1, j)) self(self, i + 1, j);
        }
        sum -= static_cast<double>(S.at(i, j));
        stack.pop_back();
    };
    dfs(dfs, 0, 0);

    best.mean_energy = best_mean;
    best.kept.assign(best.cells.size(), 1);
    return best;
}

// Marks cells inside maximal horizontal or vertical runs longer than t_occ
// as not kept. Run length counts the cells entered by the run's steps; the
// cell the run departs from flanks it and stays kept.
inline MatchPath filter_occluded_segments(const MatchPath& path, int t_occ) {
    if (t_occ < 1) throw ConfigError("t_occ must be >= 1, got " + std::to_string(t_occ));
    MatchPath out = path;
    out.kept.assign(out.cells.size(), 1);
    const std::size_t n = out.cells.size();
    std::size_t k = 1;
    while (k < n) {
        const int di = out.cells[k].i - out.cells[k - 1].i;
        const int dj = out.cells[k].j - out.cells[k - 1].j;
        if (di == 1 && dj == 1) {
            ++k;
            continue;
        }
        // Extend the run of identical horizontal/vertical steps.
        std::size_t end = k + 1;
        while (end < n && out.cells[end].i - out.cells[end - 1].i == di &&
               out.cells[end].j - out.cells[end - 1].j == dj)
            ++end;
        const std::size_t run_len = end - k;  // cells entered by these steps
        if (run_len > static_cast<std::size_t>(t_occ))
            for (std::size_t c = k; c < end; ++c) out.kept[c] = 0;
        k = end;
    }
    return out;
}

// Disparity i - j for every row covered by a kept cell; rows with several
// kept cells (short horizontal runs) take the first in path order. Uncovered
// rows hold -1.
inline std::vector<int> path_to_disparities(const MatchPath& path, int dim) {
    std::vector<int> disparity(static_cast<std::size_t>(dim), -1);
    for (std::size_t k = 0; k < path.cells.size(); ++k) {
        if (!path.kept[k]) continue;
        const PathCell& c = path.cells[k];
        if (c.i >= 0 && c.i < dim && disparity[c.i] < 0) disparity[c.i] = c.i - c.j;
    }
    return disparity;
}

}  // namespace patchsim
