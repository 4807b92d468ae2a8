#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "patchsim/adam.hpp"
#include "patchsim/checkpoint.hpp"
#include "patchsim/config.hpp"
#include "patchsim/data.hpp"
#include "patchsim/dp.hpp"
#include "patchsim/embedding.hpp"
#include "patchsim/errors.hpp"
#include "patchsim/losses.hpp"
#include "patchsim/similarity.hpp"

namespace patchsim {

struct TrainResult {
    EmbeddingNet net;
    std::vector<double> epoch_losses;
};

namespace detail {

// Per-line forward/backward for one training method. Returns the line loss;
// descriptor gradients are pushed back through the embedding, scaled by
// `scale` (the minibatch averaging factor).
inline double train_line(EmbeddingNet& net, const LineTriplet& triplet, int d_max,
                         const TrainConfig& cfg, float scale) {
    const EmbeddingTrace ref = embed_line(net, triplet.reference_band);
    const EmbeddingTrace pos = embed_line(net, triplet.positive_band);
    const int n = ref.count;
    const int F = net.feature_dim;
    const SimilarityMatrix S_rp = build_banded_similarity(ref.descriptors, pos.descriptors, d_max);

    Tensor d_ref({n, F}), d_pos({n, F});
    double loss = 0.0;

    const bool needs_negative =
        cfg.method == LossMethod::Mil || cfg.method == LossMethod::MilContrastive;
    if (needs_negative) {
        const EmbeddingTrace neg = embed_line(net, triplet.negative_band);
        const SimilarityMatrix S_rn =
            build_banded_similarity(ref.descriptors, neg.descriptors, d_max);
        const SimilarityMatrix S_np =
            build_banded_similarity(neg.descriptors, pos.descriptors, d_max);
        const ValidityRanges ranges = make_validity_ranges(n, d_max);
        Tensor d_neg({n, F});
        if (cfg.method == LossMethod::Mil) {
            const MilLoss L = mil_loss(S_rp, S_rn, S_np, ranges, cfg.mu);
            loss = L.value;
            similarity_backward(ref.descriptors, pos.descriptors, S_rp, L.d_rp, scale, d_ref, d_pos);
            similarity_backward(ref.descriptors, neg.descriptors, S_rn, L.d_rn, scale, d_ref, d_neg);
            similarity_backward(neg.descriptors, pos.descriptors, S_np, L.d_np, scale, d_neg, d_pos);
        } else {
            const MilContrastiveLoss L =
                mil_contrastive_loss(S_rp, S_rn, S_np, ranges, cfg.mu, cfg.t_sup);
            loss = L.value;
            similarity_backward(ref.descriptors, pos.descriptors, S_rp, L.d_rp, scale, d_ref, d_pos);
            similarity_backward(ref.descriptors, neg.descriptors, S_rn, L.d_rn, scale, d_ref, d_neg);
            similarity_backward(neg.descriptors, pos.descriptors, S_np, L.d_np, scale, d_neg, d_pos);
        }
        embed_line_backward(net, neg, d_neg);
    } else if (cfg.method == LossMethod::Contrastive) {
        const ValidityRanges ranges = make_validity_ranges(n, d_max);
        const ContrastiveLoss L = contrastive_loss(S_rp, ranges, cfg.mu, cfg.t_sup);
        loss = L.value;
        similarity_backward(ref.descriptors, pos.descriptors, S_rp, L.d_rp, scale, d_ref, d_pos);
    } else {
        const MatchPath path = filter_occluded_segments(max_average_path(S_rp), cfg.t_occ);
        const ContrastiveDpLoss L = contrastive_dp_loss(S_rp, path, cfg.mu, cfg.t_sup);
        loss = L.value;
        similarity_backward(ref.descriptors, pos.descriptors, S_rp, L.d_rp, scale, d_ref, d_pos);
    }

    embed_line_backward(net, ref, d_ref);
    embed_line_backward(net, pos, d_pos);
    return loss;
}

}  // namespace detail

// The full training procedure: per epoch, per image pair, one minibatch made
// of every line triplet of the pair, gradients averaged over lines, one ADAM
// step per minibatch. The match path (CONTRASTIVE_DP) is recomputed for each
// line from the current metric. Ground-truth files are never opened here.
//
// Writes to out_dir: loss_log.txt (one "epoch mean_loss" line per epoch,
// wall time goes to info only, keeping the log byte-stable across machines),
// checkpoint_epoch_N.bin per epoch, checkpoint_final.bin always.
inline TrainResult run_training(const TrainConfig& cfg, const std::vector<ManifestEntry>& manifest,
                                const std::string& out_dir, std::ostream* info = nullptr) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);

    std::vector<StereoPair> pairs;
    pairs.reserve(manifest.size());
    for (const ManifestEntry& e : manifest) {
        StereoPair pair = load_stereo_pair(e.left, e.right);
        pair.id = e.id;
        pair.d_max = cfg.d_max > 0 ? cfg.d_max : e.d_max;
        const int n = descriptor_count(pair.width(), cfg.patch_size);
        if (pair.d_max <= 0 || pair.d_max >= n)
            throw ConfigError("pair " + pair.id + ": d_max " + std::to_string(pair.d_max) +
                              " does not fit " + std::to_string(n) + " descriptors per line");
        if (pair.height() < 3 * cfg.patch_size)
            throw DataError("pair " + pair.id + " is too short for patch_size " +
                            std::to_string(cfg.patch_size));
        pairs.push_back(std::move(pair));
    }

    Rng master(cfg.seed);
    TrainResult result;
    result.net = make_embedding_net(cfg.patch_size, cfg.feature_dim, master);
    EmbeddingNet& net = result.net;
    std::vector<ParamRef> params = net.params();
    Adam adam(AdamConfig{static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
                         static_cast<float>(cfg.beta2), 1e-8f});

    std::ofstream loss_log(base / "loss_log.txt", std::ios::trunc);
    if (!loss_log) throw DataError("cannot write loss log in " + out_dir);
    loss_log << std::fixed << std::setprecision(9);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const StereoPair& pair = pairs[p];
            Rng rng = master.fork(static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(p));

            const GrayImage* neg_src = nullptr;
            if (cfg.negative_source == NegativeSource::OtherPair && pairs.size() > 1) {
                const StereoPair& other = pairs[(p + 1) % pairs.size()];
                if (other.width() != pair.width() || other.height() != pair.height())
                    throw DataError("other_pair negatives need equal image sizes (pairs " + pair.id +
                                    ", " + other.id + ")");
                neg_src = &other.right;
            }
            const std::vector<LineTriplet> triplets =
                enumerate_line_triplets(pair, cfg.patch_size, rng, neg_src);

            net.zero_grad();
            const float scale = 1.0f / static_cast<float>(triplets.size());
            double batch_loss = 0.0;
            for (const LineTriplet& t : triplets)
                batch_loss += detail::train_line(net, t, pair.d_max, cfg, scale);
            batch_loss /= static_cast<double>(triplets.size());
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   " pair " + pair.id);
            adam.step(params);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(pairs.size());
        result.epoch_losses.push_back(epoch_loss);
        loss_log << (epoch + 1) << " " << epoch_loss << "\n";
        loss_log.flush();

        char ckpt_name[40];
        std::snprintf(ckpt_name, sizeof(ckpt_name), "checkpoint_epoch_%d.bin", epoch + 1);
        save_checkpoint(net, (base / ckpt_name).string());

        if (info) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            (*info) << "epoch " << (epoch + 1) << " mean_loss " << epoch_loss << " seconds "
                    << secs << "\n";
        }
    }

    save_checkpoint(net, (base / "checkpoint_final.bin").string());
    if (!cfg.checkpoint_path.empty()) save_checkpoint(net, cfg.checkpoint_path);
    return result;
}

}  // namespace patchsim
