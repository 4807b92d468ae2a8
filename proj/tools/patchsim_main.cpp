// Command-line driver: train a metric, evaluate WTA disparity error, build
// synthetic datasets, and dump similarity/path visualizations.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "patchsim/patchsim.hpp"

namespace {

using namespace patchsim;

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir) {
    TrainConfig cfg = parse_train_config(config_path);
    if (!manifest_path.empty()) cfg.manifest_path = manifest_path;
    if (cfg.manifest_path.empty())
        throw ConfigError("no manifest given (pass --manifest or set manifest= in the config)");
    const std::vector<ManifestEntry> manifest = load_manifest(cfg.manifest_path);
    const TrainResult result = run_training(cfg, manifest, out_dir, &std::cerr);
    std::cout << "trained " << cfg.epochs << " epochs over " << manifest.size() << " pairs ("
              << loss_method_name(cfg.method) << ")\n";
    std::cout << "final checkpoint: " << (std::filesystem::path(out_dir) / "checkpoint_final.bin").string()
              << "\n";
    if (!result.epoch_losses.empty())
        std::cout << "final epoch mean loss: " << std::fixed << std::setprecision(9)
                  << result.epoch_losses.back() << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path) {
    const EmbeddingNet net = load_checkpoint(checkpoint_path);
    const std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
    std::vector<WtaReport> reports;
    std::cout << "pair error_rate errors evaluated\n";
    for (const ManifestEntry& e : manifest) {
        if (!e.has_gt) {
            std::cerr << "warning: pair " << e.id << " has no ground truth, skipping\n";
            continue;
        }
        StereoPair pair = load_stereo_pair(e.left, e.right);
        pair.id = e.id;
        pair.d_max = e.d_max;
        const GroundTruthDisparity gt = load_ground_truth(e.gt, e.gt_format);
        WtaReport report = evaluate_pair(net, pair, gt);
        std::cout << e.id << " " << std::fixed << std::setprecision(6) << report.error_rate << " "
                  << report.errors << " " << report.evaluated << "\n";
        reports.push_back(std::move(report));
    }
    if (reports.empty()) throw DataError("no manifest entry carries ground truth");
    const WtaReport total = merge_reports(reports);
    std::cout << "total " << std::fixed << std::setprecision(6) << total.error_rate << " "
              << total.errors << " " << total.evaluated << "\n";
    std::cout << "wta_error=" << std::fixed << std::setprecision(6) << total.error_rate << "\n";
    std::cout << "errors=" << total.errors << "\n";
    std::cout << "evaluated=" << total.evaluated << "\n";
    std::cout << "border_excluded=" << total.border_excluded << "\n";
    std::cout << "unknown_excluded=" << total.unknown_excluded << "\n";
    std::cout << "occluded_excluded=" << total.occluded_excluded << "\n";
    std::cout << "undefined=" << (total.undefined ? 1 : 0) << "\n";
    return 0;
}

int cmd_make_synthetic(const std::string& out_dir, std::uint64_t seed, int pairs, int width,
                       int height, int dmax, bool perturb, int regions) {
    const std::string manifest =
        write_synthetic_dataset(out_dir, seed, pairs, width, height, dmax, perturb, regions);
    std::cout << "manifest: " << manifest << "\n";
    return 0;
}

int cmd_inspect(const std::string& checkpoint_path, const std::string& manifest_path,
                const std::string& pair_id, int row, const std::string& out_dir, bool dump_dp,
                int t_occ) {
    const EmbeddingNet net = load_checkpoint(checkpoint_path);
    const std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
    const ManifestEntry* entry = nullptr;
    for (const ManifestEntry& e : manifest)
        if (e.id == pair_id) entry = &e;
    if (!entry) throw DataError("no pair '" + pair_id + "' in manifest (ids are 0-based indices)");

    StereoPair pair = load_stereo_pair(entry->left, entry->right);
    pair.id = entry->id;
    pair.d_max = entry->d_max;
    const int lo = first_valid_row(net.patch_size);
    const int hi = last_valid_row(pair.height(), net.patch_size);
    if (row < lo || row > hi)
        throw DataError("row " + std::to_string(row) + " outside the valid center-row range [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");

    const EmbeddingTrace ref = embed_line(net, band_from_image(pair.left, row, net.patch_size));
    const EmbeddingTrace pos = embed_line(net, band_from_image(pair.right, row, net.patch_size));
    const SimilarityMatrix S = build_banded_similarity(ref.descriptors, pos.descriptors, pair.d_max);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);
    const std::string sim_name = "sim_pair" + pair.id + "_row" + std::to_string(row) + ".pgm";
    dump_similarity_image(S, (base / sim_name).string());
    std::cout << "similarity image: " << (base / sim_name).string() << "\n";

    if (dump_dp) {
        const MatchPath path = filter_occluded_segments(max_average_path(S), t_occ);
        const std::string path_name = "path_pair" + pair.id + "_row" + std::to_string(row) + ".txt";
        std::ofstream out(base / path_name, std::ios::trunc);
        if (!out) throw DataError("cannot write path dump in " + out_dir);
        for (std::size_t k = 0; k < path.cells.size(); ++k)
            out << path.cells[k].i << " " << path.cells[k].j << " " << (path.kept[k] ? 1 : 0)
                << "\n";
        if (!out) throw DataError("failed writing path dump in " + out_dir);
        std::cout << "path dump: " << (base / path_name).string() << " (mean energy "
                  << std::fixed << std::setprecision(6) << path.mean_energy << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-similarity metrics for rectified stereo, trained without ground truth"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, out_dir, checkpoint_path, pair_id;
    std::uint64_t seed = 1;
    int pairs = 4, width = 256, height = 128, dmax = 16, row = 0, regions = 0, t_occ = 3;
    bool perturb = true, dump_dp = false;

    CLI::App* train = app.add_subcommand("train", "train a metric from a manifest of stereo pairs");
    train->add_option("--config", config_path, "key=value training configuration")->required();
    train->add_option("--manifest", manifest_path, "dataset manifest (overrides config)");
    train->add_option("--out", out_dir, "output directory for checkpoints and the loss log")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "winner-take-all disparity error of a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    eval->add_option("--manifest", manifest_path, "dataset manifest with ground truth")->required();

    CLI::App* synth = app.add_subcommand("make-synthetic", "generate a synthetic stereo dataset");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--pairs", pairs, "number of stereo pairs");
    synth->add_option("--width", width, "image width");
    synth->add_option("--height", height, "image height");
    synth->add_option("--dmax", dmax, "maximum disparity");
    synth->add_flag("--perturb,!--no-perturb", perturb,
                    "apply a brightness/contrast change to the right images");
    synth->add_option("--regions", regions, "disparity regions per pair (0 = random 2..5)");

    CLI::App* inspect =
        app.add_subcommand("inspect", "dump the similarity matrix (and DP path) of one line");
    inspect->add_option("--checkpoint", checkpoint_path, "checkpoint to inspect")->required();
    inspect->add_option("--manifest", manifest_path, "dataset manifest")->required();
    inspect->add_option("--pair", pair_id, "pair id from the manifest")->required();
    inspect->add_option("--row", row, "center row of the line")->required();
    inspect->add_option("--out", out_dir, "output directory")->required();
    inspect->add_flag("--dp", dump_dp, "also dump the max-mean match path");
    inspect->add_option("--t-occ", t_occ, "occlusion run threshold for the path dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // 0 is --help; everything else is a usage error
    }

    try {
        if (*train) return cmd_train(config_path, manifest_path, out_dir);
        if (*eval) return cmd_eval(checkpoint_path, manifest_path);
        if (*synth)
            return cmd_make_synthetic(out_dir, seed, pairs, width, height, dmax, perturb, regions);
        if (*inspect)
            return cmd_inspect(checkpoint_path, manifest_path, pair_id, row, out_dir, dump_dp,
                               t_occ);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
