// Acceptance gate. Each criterion prints exactly one PASS/FAIL line with a
// short measurement summary; the exit code is nonzero if any selected
// criterion fails. Criteria 4, 5 and 8 drive the command-line binary end to
// end and need --cli <path>; the rest run in-process.
//
//   acceptance [--criteria 1,2,3] [--cli path/to/patchsim]

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "patchsim/patchsim.hpp"
#include "test_util.hpp"

namespace {

using namespace patchsim;
using testutil::central_diff;
using testutil::fill_uniform;
using testutil::random_banded;
using testutil::rel_err;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::filesystem::path scratch_root() {
    return std::filesystem::temp_directory_path() / "patchsim_acceptance";
}

std::filesystem::path fresh_dir(const char* name) {
    const auto dir = scratch_root() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

int run_command(const std::string& cmd) { return std::system(cmd.c_str()); }

// First "key=<number>" line of the file.
double parse_metric(const std::filesystem::path& file, const std::string& key) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + "=", 0) == 0) return std::stod(line.substr(key.size() + 1));
    throw DataError("no '" + key + "=' line in " + file.string());
}

// "left right gt fmt d_max" rows -> "left right d_max" rows, so training
// cannot even name a ground-truth file.
void strip_gt_columns(const std::filesystem::path& manifest_in,
                      const std::filesystem::path& manifest_out) {
    std::ifstream in(manifest_in);
    std::ofstream out(manifest_out, std::ios::trunc);
    std::string left, right, gt, fmt, d;
    while (in >> left >> right >> gt >> fmt >> d) out << left << " " << right << " " << d << "\n";
}

std::string format_double(double v, int precision = 6) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// 1. DP solver equals brute-force enumeration on small random bands.

Outcome criterion_1() {
    Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = rng.uniform_int(2, 8);
        const int d_max = rng.uniform_int(1, std::min(4, dim - 1));
        const SimilarityMatrix S = random_banded(rng, dim, d_max);

        const MatchPath fast = max_average_path(S);
        const MatchPath exact = brute_force_path_oracle(S);
        validate_match_path(fast, S);
        validate_match_path(exact, S);
        if (fast.iterations > 50)
            return {false, "solver took " + std::to_string(fast.iterations) + " iterations"};

        const double gap = std::abs(fast.mean_energy - exact.mean_energy);
        worst = std::max(worst, gap);
        if (gap > 1e-9)
            return {false, "trial " + std::to_string(trial) + ": solver mean " +
                               format_double(fast.mean_energy, 12) + " vs oracle " +
                               format_double(exact.mean_energy, 12)};
    }
    return {true, "200 random bands, max mean gap " + format_double(worst, 12)};
}

// ---------------------------------------------------------------------------
// 2. Finite-difference checks: conv layers, l2_normalize, all four losses.

constexpr double kFdStep = 1e-3;
constexpr double kFdRelTol = 1e-3;
constexpr double kSafetyMargin = 5e-3;

bool fd_matches(double analytic, double numeric) {
    return rel_err(analytic, numeric) < kFdRelTol;
}

int check_conv_instances(Rng& rng, std::string& err) {
    int done = 0;
    int attempts = 0;
    while (done < 20 && attempts < 400) {
        ++attempts;
        const int C = rng.uniform_int(1, 3);
        const int O = rng.uniform_int(1, 3);
        const int H = rng.uniform_int(3, 5);
        const int W = rng.uniform_int(5, 8);
        const Activation act = done % 2 == 0 ? Activation::ReLU : Activation::None;
        ConvLayer layer = make_conv_layer(C, O, act, rng);
        fill_uniform(layer.bias, rng, -0.2f, 0.2f);
        Tensor input({C, H, W});
        fill_uniform(input, rng, 0.5f, 1.5f);

        // A finite difference through a ReLU kink is garbage; resample until
        // every pre-activation clears zero by far more than any h-step can move.
        if (act == Activation::ReLU) {
            ConvLayer linear = layer;
            linear.activation = Activation::None;
            const Tensor pre = conv2d_valid(input, linear);
            const bool near_kink =
                std::any_of(pre.values.begin(), pre.values.end(),
                            [](float v) { return std::abs(v) < 0.02f; });
            if (near_kink) continue;
        }
        Tensor probe({O, H - 2, W - 2});
        fill_uniform(probe, rng);

        const auto eval = [&]() {
            const Tensor out = conv2d_valid(input, layer);
            double s = 0.0;
            for (std::size_t k = 0; k < out.values.size(); ++k)
                s += static_cast<double>(out.values[k]) * probe.values[k];
            return s;
        };

        layer.weights.alloc_grad();
        layer.bias.alloc_grad();
        layer.weights.zero_grad();
        layer.bias.zero_grad();
        const Tensor out = conv2d_valid(input, layer);
        Tensor d_input({C, H, W});
        conv2d_backward(input, out, probe, layer, &d_input);

        const auto check_slots = [&](Tensor& t, const std::vector<float>& grads,
                                     const char* what) {
            for (std::size_t k = 0; k < t.values.size(); ++k) {
                const double fd = central_diff(&t.values[k], kFdStep, eval);
                if (!fd_matches(grads[k], fd)) {
                    err = std::string(what) + " slot " + std::to_string(k) + ": analytic " +
                          format_double(grads[k], 8) + " fd " + format_double(fd, 8);
                    return false;
                }
            }
            return true;
        };
        if (!check_slots(layer.weights, layer.weights.grad, "conv weight")) return done;
        if (!check_slots(layer.bias, layer.bias.grad, "conv bias")) return done;
        if (!check_slots(input, d_input.values, "conv input")) return done;
        ++done;
    }
    return done;
}

int check_l2_instances(Rng& rng, std::string& err) {
    int done = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.uniform_int(4, 16);
        Tensor v({n});
        do {
            fill_uniform(v, rng);
        } while (l2_norm(v.values.data(), v.values.size()) < 0.3);
        Tensor probe({n});
        fill_uniform(probe, rng);

        const auto eval = [&]() {
            const Tensor unit = l2_normalize(v);
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += static_cast<double>(unit.values[k]) * probe.values[k];
            return s;
        };

        Tensor unit = v;
        const double norm = l2_normalize_inplace(unit.values.data(), unit.values.size());
        std::vector<float> d_in(static_cast<std::size_t>(n), 0.0f);
        l2_normalize_backward(unit.values.data(), norm, probe.values.data(), d_in.data(),
                              static_cast<std::size_t>(n));

        for (int k = 0; k < n; ++k) {
            const double fd = central_diff(&v.values[k], kFdStep, eval);
            if (!fd_matches(d_in[k], fd)) {
                err = "l2_normalize slot " + std::to_string(k) + ": analytic " +
                      format_double(d_in[k], 8) + " fd " + format_double(fd, 8);
                return done;
            }
        }
        ++done;
    }
    return done;
}

// Best-vs-second gap of a row/column, 1.0 when fewer than two values survive.
double row_gap2(const SimilarityMatrix& S, int i) {
    float best = -2.0f, second = -2.0f;
    for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
        if (!S.valid(i, j)) continue;
        const float v = S.at(i, j);
        if (v > best) {
            second = best;
            best = v;
        } else if (v > second) {
            second = v;
        }
    }
    return second < -1.5f ? 1.0 : static_cast<double>(best) - second;
}

double col_gap2(const SimilarityMatrix& S, int j) {
    float best = -2.0f, second = -2.0f;
    for (int i = S.row_lo(j); i <= S.row_hi(j); ++i) {
        if (!S.valid(i, j)) continue;
        const float v = S.at(i, j);
        if (v > best) {
            second = best;
            best = v;
        } else if (v > second) {
            second = v;
        }
    }
    return second < -1.5f ? 1.0 : static_cast<double>(best) - second;
}

// The losses are piecewise linear in the entries, so central differences are
// exact unless a perturbation can switch an argmax or flip a hinge. These
// predicates reject instances that sit within `margin` of such a kink.
bool mil_fd_safe(const SimilarityMatrix& S_rp, const SimilarityMatrix& S_rn,
                 const SimilarityMatrix& S_np, const ValidityRanges& r, double mu) {
    for (int i = r.row_begin; i < r.row_end; ++i) {
        if (row_gap2(S_rp, i) < kSafetyMargin || row_gap2(S_rn, i) < kSafetyMargin) return false;
        const MaxEntry pos = row_max(S_rp, i), neg = row_max(S_rn, i);
        if (pos.found && neg.found &&
            std::abs(static_cast<double>(neg.value) - pos.value + mu) < kSafetyMargin)
            return false;
    }
    for (int j = r.col_begin; j < r.col_end; ++j) {
        if (col_gap2(S_rp, j) < kSafetyMargin || col_gap2(S_np, j) < kSafetyMargin) return false;
        const MaxEntry pos = col_max(S_rp, j), neg = col_max(S_np, j);
        if (pos.found && neg.found &&
            std::abs(static_cast<double>(neg.value) - pos.value + mu) < kSafetyMargin)
            return false;
    }
    return true;
}

bool contrastive_fd_safe(const SimilarityMatrix& S, const ValidityRanges& r, double mu,
                         int t_sup) {
    const SimilarityMatrix mr = mask_row_maxima(S, t_sup);
    const SimilarityMatrix mc = mask_col_maxima(S, t_sup);
    for (int i = r.row_begin; i < r.row_end; ++i) {
        if (row_gap2(S, i) < kSafetyMargin || row_gap2(mr, i) < kSafetyMargin) return false;
        const MaxEntry best = row_max(S, i), second = row_max(mr, i);
        if (best.found && second.found &&
            std::abs(static_cast<double>(second.value) - best.value + mu) < kSafetyMargin)
            return false;
    }
    for (int j = r.col_begin; j < r.col_end; ++j) {
        if (col_gap2(S, j) < kSafetyMargin || col_gap2(mc, j) < kSafetyMargin) return false;
        const MaxEntry best = col_max(S, j), second = col_max(mc, j);
        if (best.found && second.found &&
            std::abs(static_cast<double>(second.value) - best.value + mu) < kSafetyMargin)
            return false;
    }
    return true;
}

bool dp_fd_safe(const SimilarityMatrix& S, const MatchPath& path, double mu, int t_sup) {
    const SimilarityMatrix sup = suppress_path_neighborhood(S, path, t_sup);
    for (std::size_t k = 0; k < path.cells.size(); ++k) {
        if (!path.kept[k]) continue;
        const PathCell& c = path.cells[k];
        if (row_gap2(sup, c.i) < kSafetyMargin || col_gap2(sup, c.j) < kSafetyMargin) return false;
        const double s = S.at(c.i, c.j);
        const MaxEntry rc = row_max(sup, c.i);
        if (rc.found && std::abs(static_cast<double>(rc.value) - s + mu) < kSafetyMargin)
            return false;
        const MaxEntry cc = col_max(sup, c.j);
        if (cc.found && std::abs(static_cast<double>(cc.value) - s + mu) < kSafetyMargin)
            return false;
    }
    return true;
}

bool sweep_band_fd(SimilarityMatrix& S, const Tensor& analytic,
                   const std::function<double()>& eval, std::string& err, const char* what) {
    const int W = S.dim;
    for (int i = 0; i < W; ++i)
        for (int j = S.col_lo(i); j <= S.col_hi(i); ++j) {
            const double fd = central_diff(&S.at(i, j), kFdStep, eval);
            const double an = analytic.values[static_cast<std::size_t>(i) * W + j];
            if (!fd_matches(an, fd)) {
                err = std::string(what) + " cell (" + std::to_string(i) + "," +
                      std::to_string(j) + "): analytic " + format_double(an, 8) + " fd " +
                      format_double(fd, 8);
                return false;
            }
        }
    return true;
}

int check_loss_instances(Rng& rng, LossMethod method, std::string& err) {
    const int dim = 12, d_max = 4;
    const double mu = 0.2;
    const int t_sup = 1;
    const ValidityRanges ranges = make_validity_ranges(dim, d_max);
    int done = 0;
    int attempts = 0;
    while (done < 20 && attempts < 4000) {
        ++attempts;
        SimilarityMatrix S = random_banded(rng, dim, d_max);
        if (method == LossMethod::Mil || method == LossMethod::MilContrastive) {
            SimilarityMatrix S_rn = random_banded(rng, dim, d_max);
            SimilarityMatrix S_np = random_banded(rng, dim, d_max);
            if (!mil_fd_safe(S, S_rn, S_np, ranges, mu)) continue;
            if (method == LossMethod::MilContrastive &&
                !contrastive_fd_safe(S, ranges, mu, t_sup))
                continue;
            if (method == LossMethod::Mil) {
                const auto eval = [&]() { return mil_loss(S, S_rn, S_np, ranges, mu).value; };
                const MilLoss L = mil_loss(S, S_rn, S_np, ranges, mu);
                if (!sweep_band_fd(S, L.d_rp, eval, err, "MIL d_rp")) return done;
                if (!sweep_band_fd(S_rn, L.d_rn, eval, err, "MIL d_rn")) return done;
                if (!sweep_band_fd(S_np, L.d_np, eval, err, "MIL d_np")) return done;
            } else {
                const auto eval = [&]() {
                    return mil_contrastive_loss(S, S_rn, S_np, ranges, mu, t_sup).value;
                };
                const MilContrastiveLoss L = mil_contrastive_loss(S, S_rn, S_np, ranges, mu, t_sup);
                if (!sweep_band_fd(S, L.d_rp, eval, err, "MIL_CONTRASTIVE d_rp")) return done;
                if (!sweep_band_fd(S_rn, L.d_rn, eval, err, "MIL_CONTRASTIVE d_rn")) return done;
                if (!sweep_band_fd(S_np, L.d_np, eval, err, "MIL_CONTRASTIVE d_np")) return done;
            }
        } else if (method == LossMethod::Contrastive) {
            if (!contrastive_fd_safe(S, ranges, mu, t_sup)) continue;
            const auto eval = [&]() { return contrastive_loss(S, ranges, mu, t_sup).value; };
            const ContrastiveLoss L = contrastive_loss(S, ranges, mu, t_sup);
            if (!sweep_band_fd(S, L.d_rp, eval, err, "CONTRASTIVE d_rp")) return done;
        } else {
            const MatchPath path = max_average_path(S);
            if (!dp_fd_safe(S, path, mu, t_sup)) continue;
            // The path is an input here: the loss reads it but never differentiates
            // through its selection.
            const auto eval = [&]() { return contrastive_dp_loss(S, path, mu, t_sup).value; };
            const ContrastiveDpLoss L = contrastive_dp_loss(S, path, mu, t_sup);
            if (!sweep_band_fd(S, L.d_rp, eval, err, "CONTRASTIVE_DP d_rp")) return done;
        }
        ++done;
    }
    return done;
}

Outcome criterion_2() {
    Rng rng(1002);
    std::string err;

    const int conv_done = check_conv_instances(rng, err);
    if (conv_done < 20) return {false, "conv instance " + std::to_string(conv_done) + ": " + err};
    const int l2_done = check_l2_instances(rng, err);
    if (l2_done < 20) return {false, "l2 instance " + std::to_string(l2_done) + ": " + err};

    for (LossMethod m : {LossMethod::Mil, LossMethod::Contrastive, LossMethod::MilContrastive,
                         LossMethod::ContrastiveDp}) {
        const int done = check_loss_instances(rng, m, err);
        if (done < 20)
            return {false, std::string(loss_method_name(m)) + " instance " +
                               std::to_string(done) + ": " +
                               (err.empty() ? "not enough kink-free instances" : err)};
    }
    return {true, "20 conv, 20 l2_normalize and 4x20 loss instances within rel 1e-3"};
}

// ---------------------------------------------------------------------------
// 3. Dense line embedding equals isolated per-patch forward passes.

Outcome criterion_3() {
    Rng rng(1003);
    double worst = 0.0;
    const int patches[] = {3, 5, 9};
    for (int trial = 0; trial < 50; ++trial) {
        const int patch = patches[trial % 3];
        const int fdim = trial % 2 == 0 ? 4 : 8;
        EmbeddingNet net = make_embedding_net(patch, fdim, rng);
        const int W = patch + rng.uniform_int(4, 20);
        Tensor band({1, patch, W});
        fill_uniform(band, rng, 0.0f, 1.0f);

        // The windowed reference reuses the full-band statistics: the dense
        // pass standardizes once and every window sees that shared result.
        const EmbeddingTrace dense = embed_line(net, band);
        const Tensor std_band = standardize_band(band);
        const int count = descriptor_count(W, patch);
        for (int k = 0; k < count; ++k) {
            Tensor window({1, patch, patch});
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c)
                    window.values[static_cast<std::size_t>(r) * patch + c] =
                        std_band.values[static_cast<std::size_t>(r) * W + k + c];
            const EmbeddingTrace single = embed_standardized(net, window);
            for (int f = 0; f < fdim; ++f) {
                const double diff = std::abs(
                    static_cast<double>(
                        dense.descriptors.values[static_cast<std::size_t>(k) * fdim + f]) -
                    single.descriptors.values[f]);
                worst = std::max(worst, diff);
                if (diff > 1e-5)
                    return {false, "trial " + std::to_string(trial) + " descriptor " +
                                       std::to_string(k) + " feature " + std::to_string(f) +
                                       ": diff " + format_double(diff, 8)};
            }
        }
    }
    return {true, "50 bands, max dense-vs-patch deviation " + format_double(worst, 9)};
}

// ---------------------------------------------------------------------------
// 4. Semi-supervised training halves the untrained WTA error via the CLI.

constexpr int kC4Epochs = 10;

Outcome criterion_4(const std::string& cli) {
    const auto dir = fresh_dir("c4");
    const std::string data = (dir / "data").string();
    const std::string log = (dir / "cmd.log").string();

    if (run_command(cli + " make-synthetic --out " + data +
                    " --seed 7 --pairs 20 --width 256 --height 128 --dmax 16 --perturb > " + log +
                    " 2>&1") != 0)
        return {false, "make-synthetic failed, see " + log};
    // The stripped copy sits next to the images: manifest paths resolve
    // against the manifest's own directory.
    strip_gt_columns(dir / "data" / "manifest.txt", dir / "data" / "train_manifest.txt");

    write_text(dir / "train0.cfg",
               "method = CONTRASTIVE_DP\nepochs = 0\nseed = 7\nfeature_dim = 64\n"
               "patch_size = 9\nlr = 0.001\n");
    write_text(dir / "train.cfg",
               "method = CONTRASTIVE_DP\nepochs = " + std::to_string(kC4Epochs) +
                   "\nseed = 7\nfeature_dim = 64\npatch_size = 9\nlr = 0.001\n");

    const std::string train_manifest = (dir / "data" / "train_manifest.txt").string();
    const std::string eval_manifest = (dir / "data" / "manifest.txt").string();

    if (run_command(cli + " train --config " + (dir / "train0.cfg").string() + " --manifest " +
                    train_manifest + " --out " + (dir / "run0").string() + " >> " + log +
                    " 2>&1") != 0)
        return {false, "baseline train failed, see " + log};
    const std::string eval0 = (dir / "eval0.txt").string();
    if (run_command(cli + " eval --checkpoint " + (dir / "run0" / "checkpoint_final.bin").string() +
                    " --manifest " + eval_manifest + " > " + eval0 + " 2>> " + log) != 0)
        return {false, "baseline eval failed, see " + log};
    const double untrained = parse_metric(eval0, "wta_error");

    if (run_command(cli + " train --config " + (dir / "train.cfg").string() + " --manifest " +
                    train_manifest + " --out " + (dir / "run").string() + " >> " + log +
                    " 2>&1") != 0)
        return {false, "training failed, see " + log};
    const std::string eval1 = (dir / "eval1.txt").string();
    if (run_command(cli + " eval --checkpoint " + (dir / "run" / "checkpoint_final.bin").string() +
                    " --manifest " + eval_manifest + " > " + eval1 + " 2>> " + log) != 0)
        return {false, "trained eval failed, see " + log};
    const double trained = parse_metric(eval1, "wta_error");

    const std::string detail = "untrained " + format_double(untrained) + ", trained " +
                               format_double(trained) + " after " + std::to_string(kC4Epochs) +
                               " epochs (no ground truth in the training manifest)";
    if (untrained <= 0.0) return {false, "untrained error is zero; nothing to improve: " + detail};
    if (trained < 0.5 * untrained) return {true, detail};
    return {false, detail + "; needs < " + format_double(0.5 * untrained)};
}

// ---------------------------------------------------------------------------
// 5. Method comparison on one reduced benchmark: CONTRASTIVE_DP <= MIL.

constexpr int kC5Epochs = 4;

Outcome criterion_5(const std::string& cli) {
    const auto dir = fresh_dir("c5");
    const std::string data = (dir / "data").string();
    const std::string log = (dir / "cmd.log").string();

    if (run_command(cli + " make-synthetic --out " + data +
                    " --seed 9 --pairs 8 --width 192 --height 96 --dmax 12 --perturb > " + log +
                    " 2>&1") != 0)
        return {false, "make-synthetic failed, see " + log};
    strip_gt_columns(dir / "data" / "manifest.txt", dir / "data" / "train_manifest.txt");
    const std::string train_manifest = (dir / "data" / "train_manifest.txt").string();
    const std::string eval_manifest = (dir / "data" / "manifest.txt").string();

    const char* methods[] = {"MIL", "CONTRASTIVE", "MIL_CONTRASTIVE", "CONTRASTIVE_DP"};
    double errors[4] = {0, 0, 0, 0};
    for (int m = 0; m < 4; ++m) {
        const std::string name = methods[m];
        write_text(dir / (name + ".cfg"),
                   "method = " + name + "\nepochs = " + std::to_string(kC5Epochs) +
                       "\nseed = 9\nfeature_dim = 64\npatch_size = 9\nlr = 0.001\n");
        if (run_command(cli + " train --config " + (dir / (name + ".cfg")).string() +
                        " --manifest " + train_manifest + " --out " + (dir / name).string() +
                        " >> " + log + " 2>&1") != 0)
            return {false, name + " training failed, see " + log};
        const std::string eval_file = (dir / (name + "_eval.txt")).string();
        if (run_command(cli + " eval --checkpoint " +
                        (dir / name / "checkpoint_final.bin").string() + " --manifest " +
                        eval_manifest + " > " + eval_file + " 2>> " + log) != 0)
            return {false, name + " eval failed, see " + log};
        errors[m] = parse_metric(eval_file, "wta_error");
    }

    std::string detail = "wta errors after " + std::to_string(kC5Epochs) + " identical epochs:";
    for (int m = 0; m < 4; ++m)
        detail += std::string(" ") + methods[m] + "=" + format_double(errors[m]);
    detail += " (only CONTRASTIVE_DP <= MIL is gated)";
    if (errors[3] <= errors[0]) return {true, detail};
    return {false, detail};
}

// ---------------------------------------------------------------------------
// 6. Evaluation boundary semantics.

Outcome criterion_6() {
    // Error needs |pred - gt| strictly above the 3 px threshold.
    GroundTruthDisparity gt;
    gt.width = 8;
    gt.height = 1;
    gt.values.assign(8, 2.0f);
    gt.known.assign(8, 1);
    gt.occlusion.assign(8, static_cast<std::uint8_t>(Occlusion::Visible));

    PredictedRow pred;
    pred.row = 0;
    pred.col_offset = 2;
    pred.disparity = {5, 5, 5, 5};  // gt + 3 exactly
    const WtaReport at_threshold = wta_error_rate({pred}, gt, 3.0);
    if (at_threshold.evaluated != 2 || at_threshold.errors != 0)
        return {false, "pred = gt+3 gave " + std::to_string(at_threshold.errors) + " errors on " +
                           std::to_string(at_threshold.evaluated) + " pixels (want 0 on 2)"};

    pred.disparity = {6, 6, 6, 6};  // gt + 4
    const WtaReport above = wta_error_rate({pred}, gt, 3.0);
    if (above.errors != above.evaluated || above.errors == 0)
        return {false, "pred = gt+4 gave " + std::to_string(above.errors) + " errors on " +
                           std::to_string(above.evaluated) + " pixels (want all)"};

    // The x256 integer encoding decodes without rounding slack.
    const auto dir = fresh_dir("c6");
    const std::string png = (dir / "gt.png").string();
    write_png_u16({768}, 1, 1, png);
    const GroundTruthDisparity decoded = load_ground_truth(png, GtFormat::Uint16PngX256);
    if (!decoded.known_at(0, 0) || decoded.value_at(0, 0) != 3.0f)
        return {false, "u16 768 decoded to " + format_double(decoded.value_at(0, 0), 9) +
                           " (want exactly 3)"};

    return {true, "strict 3 px threshold and exact u16/256 decoding"};
}

// ---------------------------------------------------------------------------
// 7. Invariant fuzzing over masking, occlusion filtering and the losses.

// Banning only narrows: every cell valid afterwards was valid before, sits in
// the band and kept its value; everything banned holds the sentinel.
std::string check_narrowing(const SimilarityMatrix& before, const SimilarityMatrix& after,
                            const char* what) {
    for (int i = 0; i < before.dim; ++i)
        for (int j = 0; j < before.dim; ++j) {
            const std::size_t off = static_cast<std::size_t>(i) * before.dim + j;
            if (after.mask[off]) {
                if (!before.mask[off]) return std::string(what) + " marked a banned cell valid";
                if (!before.in_band(i, j)) return std::string(what) + " left the band";
                if (after.entries[off] != before.entries[off])
                    return std::string(what) + " changed a surviving value";
            } else if (after.entries[off] != kBannedValue) {
                return std::string(what) + " banned a cell without the sentinel";
            }
        }
    return "";
}

std::string grads_in_band(const SimilarityMatrix& M, const Tensor& g, const char* name) {
    for (int i = 0; i < M.dim; ++i)
        for (int j = 0; j < M.dim; ++j)
            if (g.values[static_cast<std::size_t>(i) * M.dim + j] != 0.0f && !M.valid(i, j))
                return std::string(name) + " gradient on a banned cell";
    return "";
}

Outcome criterion_7() {
    Rng rng(1007);
    long calls = 0;
    const double mu = 0.2;

    for (int round = 0; round < 1100; ++round) {
        const int dim = rng.uniform_int(3, 14);
        const int d_max = rng.uniform_int(1, std::min(6, dim - 1));
        SimilarityMatrix S = random_banded(rng, dim, d_max);
        const int bans = rng.uniform_int(0, 2);
        for (int b = 0; b < bans; ++b) {
            const int i = rng.uniform_int(1, dim - 1);
            S.ban(i, rng.uniform_int(S.col_lo(i), S.col_hi(i)));
        }
        const ValidityRanges ranges = make_validity_ranges(dim, d_max);
        const int t_sup = rng.uniform_int(0, 3);

        for (const SimilarityMatrix& masked :
             {mask_row_maxima(S, t_sup), mask_col_maxima(S, t_sup)}) {
            ++calls;
            const std::string bad = check_narrowing(S, masked, "masking");
            if (!bad.empty()) return {false, bad};
        }

        // DP path, its suppression and the occlusion filter. Bans can cut off
        // every feasible path; the solver reports that by throwing, which
        // just leaves nothing to check downstream.
        MatchPath path;
        bool have_path = true;
        try {
            path = max_average_path(S);
        } catch (const StateError&) {
            have_path = false;
        }
        ++calls;
        if (have_path) {
            validate_match_path(path, S);
            const SimilarityMatrix sup = suppress_path_neighborhood(S, path, t_sup);
            ++calls;
            const std::string bad = check_narrowing(S, sup, "suppression");
            if (!bad.empty()) return {false, bad};

            const int t_occ = rng.uniform_int(1, 4);
            const MatchPath filtered = filter_occluded_segments(path, t_occ);
            ++calls;
            if (filtered.cells.size() != path.cells.size() ||
                filtered.kept.size() != path.cells.size())
                return {false, "occlusion filter changed the path size"};
            const MatchPath twice = filter_occluded_segments(filtered, t_occ);
            ++calls;
            if (twice.kept != filtered.kept)
                return {false, "occlusion filter is not idempotent"};

            // Loss invariants on the DP variant.
            const ContrastiveDpLoss L = contrastive_dp_loss(S, filtered, mu, t_sup);
            ++calls;
            if (L.value < 0.0) return {false, "CONTRASTIVE_DP loss went negative"};
            const std::string bad_dp = grads_in_band(S, L.d_rp, "CONTRASTIVE_DP");
            if (!bad_dp.empty()) return {false, bad_dp};
            const auto nonzero = [](const Tensor& g) {
                for (float v : g.values)
                    if (v != 0.0f) return true;
                return false;
            };
            if (L.value == 0.0 && nonzero(L.d_rp))
                return {false, "CONTRASTIVE_DP zero loss with nonzero gradient"};
        }

        // MIL family invariants.
        SimilarityMatrix S_rn = random_banded(rng, dim, d_max);
        SimilarityMatrix S_np = random_banded(rng, dim, d_max);
        const MilLoss mil = mil_loss(S, S_rn, S_np, ranges, mu);
        ++calls;
        const ContrastiveLoss con = contrastive_loss(S, ranges, mu, t_sup);
        ++calls;
        const MilContrastiveLoss both = mil_contrastive_loss(S, S_rn, S_np, ranges, mu, t_sup);
        ++calls;
        if (mil.value < 0.0 || con.value < 0.0 || both.value < 0.0)
            return {false, "a hinge loss went negative"};
        if (std::abs(both.value - (mil.value + con.value)) > 1e-12)
            return {false, "MIL_CONTRASTIVE is not the sum of its parts"};
        for (const std::string& bad :
             {grads_in_band(S, mil.d_rp, "MIL"), grads_in_band(S_rn, mil.d_rn, "MIL"),
              grads_in_band(S_np, mil.d_np, "MIL"), grads_in_band(S, con.d_rp, "CONTRASTIVE")}) {
            if (!bad.empty()) return {false, bad};
        }
        const auto grads_all_zero = [](const Tensor& g) {
            for (float v : g.values)
                if (v != 0.0f) return false;
            return true;
        };
        if (mil.value == 0.0 &&
            !(grads_all_zero(mil.d_rp) && grads_all_zero(mil.d_rn) && grads_all_zero(mil.d_np)))
            return {false, "MIL zero loss with nonzero gradient"};
        if (con.value == 0.0 && !grads_all_zero(con.d_rp))
            return {false, "CONTRASTIVE zero loss with nonzero gradient"};
    }

    if (calls < 10000)
        return {false, "only " + std::to_string(calls) + " randomized calls executed"};
    return {true, std::to_string(calls) + " randomized calls, no invariant violated"};
}

// ---------------------------------------------------------------------------
// 8. Bytewise deterministic training through the CLI.

Outcome criterion_8(const std::string& cli) {
    const auto dir = fresh_dir("c8");
    const std::string data = (dir / "data").string();
    const std::string log = (dir / "cmd.log").string();

    if (run_command(cli + " make-synthetic --out " + data +
                    " --seed 13 --pairs 2 --width 96 --height 40 --dmax 8 --perturb > " + log +
                    " 2>&1") != 0)
        return {false, "make-synthetic failed, see " + log};
    strip_gt_columns(dir / "data" / "manifest.txt", dir / "data" / "train_manifest.txt");
    write_text(dir / "train.cfg",
               "method = CONTRASTIVE_DP\nepochs = 2\nseed = 13\nfeature_dim = 64\n"
               "patch_size = 9\nlr = 0.001\n");

    for (const char* run : {"run_a", "run_b"}) {
        if (run_command(cli + " train --config " + (dir / "train.cfg").string() + " --manifest " +
                        (dir / "data" / "train_manifest.txt").string() + " --out " +
                        (dir / run).string() + " >> " + log + " 2>&1") != 0)
            return {false, std::string(run) + " failed, see " + log};
    }

    for (const char* file :
         {"loss_log.txt", "checkpoint_epoch_1.bin", "checkpoint_epoch_2.bin",
          "checkpoint_final.bin"}) {
        if (slurp(dir / "run_a" / file) != slurp(dir / "run_b" / file))
            return {false, std::string(file) + " differs between identical runs"};
    }
    return {true, "two identical runs: loss log and all checkpoints byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected = {1, 2, 3, 4, 5, 6, 7, 8};
    std::string cli;
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--criteria" && a + 1 < argc) {
            selected.clear();
            std::stringstream ss(argv[++a]);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                const int n = std::atoi(tok.c_str());
                if (n < 1 || n > 8) {
                    std::cerr << "unknown criterion '" << tok << "'\n";
                    return 2;
                }
                selected.insert(n);
            }
        } else if (arg == "--cli" && a + 1 < argc) {
            cli = argv[++a];
        } else {
            std::cerr << "usage: acceptance [--criteria 1,2,...] [--cli path]\n";
            return 2;
        }
    }

    bool all_pass = true;
    for (int n : selected) {
        Outcome outcome;
        try {
            switch (n) {
                case 1: outcome = criterion_1(); break;
                case 2: outcome = criterion_2(); break;
                case 3: outcome = criterion_3(); break;
                case 6: outcome = criterion_6(); break;
                case 7: outcome = criterion_7(); break;
                case 4:
                case 5:
                case 8:
                    if (cli.empty()) {
                        outcome = {false, "needs --cli <path to the command-line binary>"};
                    } else if (n == 4) {
                        outcome = criterion_4(cli);
                    } else if (n == 5) {
                        outcome = criterion_5(cli);
                    } else {
                        outcome = criterion_8(cli);
                    }
                    break;
            }
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << n << ": "
                  << outcome.detail << std::endl;
        if (!outcome.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
