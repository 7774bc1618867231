#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradinv/diffusion.hpp"
#include "gradinv/models.hpp"

namespace gradinv {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat key = value experiment configuration shared by all commands.
// parse_config rejects unknown keys and reports malformed lines with their
// line number; defaults are documented by config_help().
struct ExperimentConfig {
    // run
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out = "runs";
    int jobs = 1;
    // dataset
    int dataset_size = 512;
    int image_side = 8;
    uint64_t data_seed = 7;
    // model
    std::string model = "cnn-tiny";
    int64_t input_dim = 64;
    int64_t classes = 4;
    uint64_t model_seed = 11;
    int label = 0;
    std::string client_loss = "softmax-cross-entropy";
    // defense
    std::string noise_kind = "none";
    double noise_variance = 0.0;
    int batch_size = 1;
    // diffusion
    int T = 50;
    double eta = 0.5;
    std::string denoiser = "oracle";  // oracle | trained
    std::string denoiser_checkpoint;
    int mixture_components = 1;
    double mixture_variance = 0.02;
    std::string posterior_mean_mode = "inversion";  // inversion | linear-coef
    // denoiser training
    int epochs = 2000;
    double lr = 1e-3;
    int64_t hidden = 128;
    uint64_t train_seed = 3;
    // attack
    double m_r = 0.20;
    std::string step_size = "auto";  // auto | positive number
    std::string attack_loss_kind = "euclidean";
    int max_snapshots = 10;
    // dlg baseline
    int dlg_iters = 50;
    double dlg_lr = 0.05;
    // rv
    int rv_m = 1000;
    int rv_n = 310;
    // which dataset item is the private target; -1 derives it from the seed
    int target_index = -1;

    void validate() const;
    ClientLoss client_loss_kind() const;
    PosteriorMeanMode posterior_mode() const;
    std::optional<double> step_size_value() const;  // nullopt = auto
    // Every key in declaration order, formatted for manifests.
    std::vector<std::pair<std::string, std::string>> as_kv() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);
std::string config_help();

}  // namespace gradinv
