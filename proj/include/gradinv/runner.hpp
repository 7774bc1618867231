#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gradinv/attack.hpp"
#include "gradinv/config.hpp"
#include "gradinv/defense.hpp"
#include "gradinv/diffusion.hpp"
#include "gradinv/vulnerability.hpp"

namespace gradinv::runner {

// Deterministic stream salts for per-seed RNG forks.
inline constexpr uint64_t kNoiseStream = 1;
inline constexpr uint64_t kAttackStream = 2;
inline constexpr uint64_t kRvStream = 3;

inline constexpr const char* kFormatVersion = "1";

// Everything a run needs, assembled once per config: dataset, schedule,
// denoiser and attacked model.
struct BenchParts {
    std::vector<Tensor> dataset;
    NoiseSchedule sched;
    std::unique_ptr<Denoiser> denoiser;
    AttackedModel model;
};

BenchParts make_parts(const ExperimentConfig& cfg);
AttackedModel make_model(const ExperimentConfig& cfg, const std::string& name);
GaussianMixture benchmark_mixture(const std::vector<Tensor>& dataset, int components, double variance);
GaussianMixture single_gaussian_fit(const std::vector<Tensor>& dataset);

// Leaked gradient for one seed: batch starting at the target index, then the
// configured defense applied with the seed's noise stream.
struct SeedGradient {
    LeakedGradient gradient;
    Tensor target;
    int target_index = 0;
};
SeedGradient make_leaked_gradient(const BenchParts& parts, const ExperimentConfig& cfg, uint64_t seed,
                                  NoiseKind kind, double variance);

AttackTrace run_attack_for_seed(const BenchParts& parts, const ExperimentConfig& cfg, uint64_t seed, NoiseKind kind,
                                double variance);

struct SweepRow {
    std::string kind;
    double variance = 0.0;
    uint64_t seed = 0;
    double peak_psnr = 0.0;
    double final_psnr = 0.0;
    double peak_mse = 0.0;
};
// Grid runs ordered by (kind, variance, seed); parallel up to cfg.jobs.
std::vector<SweepRow> run_noise_sweep(const ExperimentConfig& cfg, const std::vector<std::string>& kinds,
                                      const std::vector<double>& variances);

std::vector<std::string> model_zoo();

// Run-directory helpers. Directories are timestamped and never reused; file
// contents stay byte-identical across reruns with equal config and seeds.
std::string make_run_dir(const std::string& out_root, const std::string& command);
void write_manifest(const std::string& run_dir, const std::string& command, const ExperimentConfig& cfg);
std::string trace_csv(const AttackTrace& trace);

void parallel_for(int jobs, int64_t count, const std::function<void(int64_t)>& fn);

// Commands. Return 0 on success; theorem failures return 3. Validation and
// numeric errors surface as exceptions for the CLI to map to exit codes.
int cmd_train_denoiser(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);
int cmd_attack(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);
int cmd_sweep_noise(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);
int cmd_rv(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);
int cmd_verify_theorems(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);
int cmd_baseline(const ExperimentConfig& cfg, std::string* run_dir_out = nullptr);

}  // namespace gradinv::runner
