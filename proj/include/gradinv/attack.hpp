#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradinv/diffusion.hpp"
#include "gradinv/models.hpp"

namespace gradinv {

struct AttackConfig {
    int T = 50;
    double eta = 0.5;
    double m_r = 0.20;
    // Guidance step size; unset means auto = sqrt(n) * sigma_t per step,
    // which makes the blended step degenerate to the exact spherical one at
    // m_r = 1.
    std::optional<double> step_size;
    std::string loss_kind = "euclidean";
    uint64_t seed = 1;
    int max_snapshots = 10;
    PosteriorMeanMode posterior_mode = PosteriorMeanMode::kInversion;
    void validate() const;
};

struct StepRecord {
    int t = 0;
    double attack_loss = 0.0;
    double mse = 0.0;   // NaN when no target was given
    double psnr = 0.0;  // NaN when no target was given
    bool degenerate = false;
};

struct AttackTrace {
    std::vector<StepRecord> records;  // ordered t = T..1 (or iteration order for DLG)
    std::vector<std::pair<int, Tensor>> snapshots;
    Tensor final_x;
    double final_mse = 0.0;   // vs target, NaN without target
    double final_psnr = 0.0;
    int64_t gradient_evals = 0;
    double peak_psnr() const;
    double peak_mse() const;
    double final_loss() const;
};

struct AttackAbort : NumericError {
    int step;
    AttackAbort(const std::string& what, int step_index)
        : NumericError(what + " at step " + std::to_string(step_index)), step(step_index) {}
};

// Euclidean distance between two leaked gradients as a differentiable scalar.
ad::Value attack_loss(const LeakedGradient& a, const LeakedGradient& b);

// Everything one guided reverse step needs, computed with a single pass of
// the model / denoiser: the attack loss at x_t, its gradient w.r.t. x_t (via
// double backward through the posterior mean and the client gradient), and
// the unconditional transition mean.
struct GuidanceStep {
    Tensor x0_hat;
    Tensor eps_hat;
    Tensor mu;
    Tensor grad;  // d loss / d x_t, zero when degenerate
    double loss = 0.0;
    double grad_norm = 0.0;
    bool degenerate = false;
};
GuidanceStep guidance_compute(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                              const AttackedModel& model, const LeakedGradient& g_leaked,
                              PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

// Optimal correction d* = -sqrt(n) sigma_t * grad / ||grad||; zero vector
// with the degenerate flag when the guidance gradient vanishes.
struct GuidanceDirection {
    Tensor direction;
    bool degenerate = false;
};
GuidanceDirection guidance_direction(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                                     const AttackedModel& model, const LeakedGradient& g_leaked,
                                     PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

// Exact spherical step: x_{t-1} = mu + d*.
Tensor ggss_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den, const AttackedModel& model,
                 const LeakedGradient& g_leaked, PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

// Blended step: d_m = d_sample + m_r (d* - d_sample) with d_sample = sigma_t
// * eps; x_{t-1} = mu + r * d_m / ||d_m||. Falls back to mu when d_m
// degenerates. r <= 0 selects auto (= sqrt(n) sigma_t).
Tensor blended_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                    const AttackedModel& model, const LeakedGradient& g_leaked, double m_r, double r, Rng& rng,
                    PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

AttackTrace run_attack(const AttackedModel& model, const LeakedGradient& g_leaked, const Denoiser& den,
                       const NoiseSchedule& sched, const AttackConfig& cfg, const Tensor* target);

// Pixel-space baseline: gradient descent on ||g(x) - g_leaked||^2 from
// x ~ N(0, I), with backtracking line search so the loss never increases.
// Line-search probes count against eval_budget (0 = unlimited), capping the
// total client-gradient evaluations for budget-matched comparisons.
AttackTrace dlg_baseline(const AttackedModel& model, const LeakedGradient& g_leaked, int iters, double lr,
                         uint64_t seed, const Tensor* target, int64_t eval_budget = 0);

}  // namespace gradinv
