#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gradinv/autodiff.hpp"
#include "gradinv/rng.hpp"
#include "gradinv/tensor.hpp"

namespace gradinv {

// Cumulative signal coefficients alpha[0..T] (alpha[0] = 1, strictly
// decreasing) and DDIM denoising scales sigma[0..T] (sigma[t] = 0 for all t
// iff eta = 0).
struct NoiseSchedule {
    int T = 0;
    double eta = 0.0;
    std::vector<double> alpha;
    std::vector<double> sigma;
};

NoiseSchedule make_schedule(int T, double eta);

struct GaussianMixture {
    std::vector<double> weights;    // simplex
    std::vector<Tensor> means;
    std::vector<double> variances;  // isotropic, > 0
    void validate() const;
    int64_t dim() const;
};

// Which coefficient multiplies the predicted noise when estimating x0:
// kInversion uses sqrt(1 - alpha_t) (the algebraic inversion of the forward
// process); kLinearCoef uses (1 - alpha_t).
enum class PosteriorMeanMode { kInversion, kLinearCoef };

class Denoiser {
  public:
    virtual ~Denoiser() = default;
    virtual int64_t dim() const = 0;
    virtual ad::Value predict(const ad::Value& x_t, int t) const = 0;
    // Graph-free fast path; default evaluates the graph.
    virtual Tensor predict_tensor(const Tensor& x_t, int t) const;
    virtual std::string kind() const = 0;
};

// Closed-form log-density and score of the mixture pushed through the
// forward process to time t: component k becomes
// N(sqrt(alpha_t) m_k, (alpha_t v_k + 1 - alpha_t) I).
double mixture_log_density(const GaussianMixture& gm, double alpha_t, const Tensor& x);
Tensor mixture_score(const GaussianMixture& gm, double alpha_t, const Tensor& x);

// Analytic eps*(x_t, t) = -sqrt(1 - alpha_t) * score_t(x_t).
std::unique_ptr<Denoiser> oracle_denoiser(GaussianMixture gm, const NoiseSchedule& sched);

struct ForwardSample {
    Tensor x_t;
    Tensor eps;
};
ForwardSample forward_sample(const Tensor& x0, int t, const NoiseSchedule& sched, Rng& rng);

ad::Value posterior_mean(const ad::Value& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                         PosteriorMeanMode mode = PosteriorMeanMode::kInversion);
Tensor posterior_mean_tensor(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                             PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

struct DdimStep {
    Tensor mu;      // deterministic part of the transition
    Tensor x_prev;  // mu + sigma_t * eps
};
DdimStep ddim_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den, Rng& rng,
                   PosteriorMeanMode mode = PosteriorMeanMode::kInversion);
Tensor ddim_sample(const Denoiser& den, const NoiseSchedule& sched, uint64_t seed,
                   PosteriorMeanMode mode = PosteriorMeanMode::kInversion);

// Exact posterior p(x0 | x_t) when the data prior is a single Gaussian.
struct GaussianPosterior {
    Tensor mean;
    double variance = 0.0;
};
GaussianPosterior single_gaussian_posterior(const GaussianMixture& gm, const NoiseSchedule& sched, int t,
                                            const Tensor& x_t);

// Small MLP noise predictor: [dim + 16] -> hidden -> hidden -> dim with silu
// activations and a 16-dim sinusoidal embedding of t/T. The first layer is
// stored as separate input/time blocks, which is the same map as a
// concatenated input.
class MlpDenoiser final : public Denoiser {
  public:
    static constexpr int kTimeEmbedDim = 16;
    static Tensor time_embedding(int t, int T);

    MlpDenoiser(int64_t dim, int T, int64_t hidden, std::vector<Tensor> params);
    static MlpDenoiser init(int64_t dim, int T, int64_t hidden, uint64_t seed);

    int64_t dim() const override { return dim_; }
    int T() const { return T_; }
    int64_t hidden() const { return hidden_; }
    std::string kind() const override { return "trained-mlp"; }
    ad::Value predict(const ad::Value& x_t, int t) const override;
    // Whole-batch prediction used by training: rows of X are samples.
    ad::Value predict_batch(const ad::Value& X, const ad::Value& Temb, const std::vector<ad::Value>& params) const;

    const std::vector<Tensor>& params() const { return params_; }
    std::vector<Tensor>& mutable_params() { return params_; }
    static const std::vector<std::string>& param_names();

  private:
    int64_t dim_ = 0;
    int T_ = 0;
    int64_t hidden_ = 0;
    std::vector<Tensor> params_;  // w1x, w1t, b1, w2, b2, w3, b3
};

struct TrainResult {
    std::unique_ptr<MlpDenoiser> model;
    std::vector<double> losses;  // one entry per epoch
};

struct TrainingDiverged : NumericError {
    int epoch;
    explicit TrainingDiverged(int e)
        : NumericError("denoiser training diverged (non-finite loss) at epoch " + std::to_string(e)), epoch(e) {}
};

TrainResult train_denoiser(const std::vector<Tensor>& dataset, const NoiseSchedule& sched, int epochs, double lr,
                           uint64_t seed, int64_t hidden = 128);

}  // namespace gradinv
