#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "patchsim/errors.hpp"
#include "patchsim/losses.hpp"

namespace patchsim {

enum class LossMethod { Mil, Contrastive, MilContrastive, ContrastiveDp };

inline LossMethod parse_loss_method(const std::string& token) {
    if (token == "MIL") return LossMethod::Mil;
    if (token == "CONTRASTIVE") return LossMethod::Contrastive;
    if (token == "MIL_CONTRASTIVE") return LossMethod::MilContrastive;
    if (token == "CONTRASTIVE_DP") return LossMethod::ContrastiveDp;
    throw ConfigError("unknown method '" + token +
                      "' (expected MIL, CONTRASTIVE, MIL_CONTRASTIVE or CONTRASTIVE_DP)");
}

inline const char* loss_method_name(LossMethod m) {
    switch (m) {
        case LossMethod::Mil: return "MIL";
        case LossMethod::Contrastive: return "CONTRASTIVE";
        case LossMethod::MilContrastive: return "MIL_CONTRASTIVE";
        case LossMethod::ContrastiveDp: return "CONTRASTIVE_DP";
    }
    return "?";
}

enum class NegativeSource { SamePair, OtherPair };

struct TrainConfig {
    LossMethod method = LossMethod::ContrastiveDp;
    double mu = 0.2;
    int t_sup = 2;
    int t_occ = 3;
    int d_max = 0;  // 0 = take each pair's manifest value
    int patch_size = 9;
    int feature_dim = 64;
    int epochs = 1;
    std::uint64_t seed = 1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    NegativeSource negative_source = NegativeSource::SamePair;
    std::string manifest_path;    // may be overridden by the CLI flag
    std::string checkpoint_path;  // optional extra copy of the final checkpoint

    LossConfig loss_config() const { return LossConfig{mu, t_sup, t_occ}; }

    void validate() const {
        loss_config().validate();
        if (patch_size != 9 && patch_size != 11)
            throw ConfigError("patch_size must be 9 or 11, got " + std::to_string(patch_size));
        if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
        if (d_max < 0) throw ConfigError("d_max must be >= 0");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (lr <= 0.0) throw ConfigError("lr must be > 0");
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw ConfigError("ADAM betas must lie in (0, 1)");
    }
};

// Flat key=value lines; '#' starts a comment; unknown keys are rejected so
// typos fail loudly.
inline TrainConfig parse_train_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": expected key=value, got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key or value");
        try {
            if (key == "method") cfg.method = parse_loss_method(value);
            else if (key == "mu") cfg.mu = std::stod(value);
            else if (key == "t_sup") cfg.t_sup = std::stoi(value);
            else if (key == "t_occ") cfg.t_occ = std::stoi(value);
            else if (key == "d_max") cfg.d_max = std::stoi(value);
            else if (key == "patch_size") cfg.patch_size = std::stoi(value);
            else if (key == "feature_dim") cfg.feature_dim = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "beta1") cfg.beta1 = std::stod(value);
            else if (key == "beta2") cfg.beta2 = std::stod(value);
            else if (key == "manifest") cfg.manifest_path = value;
            else if (key == "checkpoint") cfg.checkpoint_path = value;
            else if (key == "negative_source") {
                if (value == "same_pair") cfg.negative_source = NegativeSource::SamePair;
                else if (value == "other_pair") cfg.negative_source = NegativeSource::OtherPair;
                else throw ConfigError("negative_source must be same_pair or other_pair");
            } else {
                throw ConfigError(origin + " line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": bad value '" + value +
                              "' for key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig parse_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_train_config_text(ss.str(), path);
}

}  // namespace patchsim
