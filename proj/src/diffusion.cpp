#include "gradinv/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace gradinv {

using ad::Value;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

NoiseSchedule make_schedule(int T, double eta) {
    if (T < 10 || T > 1000) throw ShapeError("make_schedule: T must lie in [10, 1000]");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ShapeError("make_schedule: eta must lie in [0, 1]");
    NoiseSchedule s;
    s.T = T;
    s.eta = eta;
    s.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
    s.sigma.assign(static_cast<size_t>(T) + 1, 0.0);
    // Linear beta in [1e-4, 0.02] rescaled by 1000/T; clamped below 1 so the
    // cumulative product stays positive for short schedules.
    double rescale = 1000.0 / static_cast<double>(T);
    for (int t = 1; t <= T; ++t) {
        double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        double beta = rescale * (1e-4 + frac * (0.02 - 1e-4));
        beta = std::min(beta, 0.999);
        s.alpha[t] = s.alpha[t - 1] * (1.0 - beta);
    }
    for (int t = 1; t <= T; ++t) {
        double a_prev = s.alpha[t - 1], a = s.alpha[t];
        s.sigma[t] = eta * std::sqrt((1.0 - a_prev) / (1.0 - a)) * std::sqrt(1.0 - a / a_prev);
    }
    return s;
}

void GaussianMixture::validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
        throw ShapeError("gaussian mixture: weights/means/variances must be nonempty and equal length");
    }
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ShapeError("gaussian mixture: negative weight");
        wsum += w;
    }
    if (std::fabs(wsum - 1.0) > 1e-12) throw ShapeError("gaussian mixture: weights must sum to 1");
    for (double v : variances) {
        if (!(v > 0.0)) throw ShapeError("gaussian mixture: variances must be positive");
    }
    for (const auto& m : means) {
        if (m.numel() != means[0].numel()) throw ShapeError("gaussian mixture: mean shape mismatch");
    }
}

int64_t GaussianMixture::dim() const { return means.empty() ? 0 : means[0].numel(); }

double mixture_log_density(const GaussianMixture& gm, double alpha_t, const Tensor& x) {
    int64_t n = gm.dim();
    double best = -1e300;
    std::vector<double> logs(gm.weights.size());
    for (size_t k = 0; k < gm.weights.size(); ++k) {
        double s = alpha_t * gm.variances[k] + 1.0 - alpha_t;
        double q = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double d = x[i] - std::sqrt(alpha_t) * gm.means[k][i];
            q += d * d;
        }
        logs[k] = std::log(gm.weights[k]) - 0.5 * static_cast<double>(n) * std::log(kTwoPi * s) - q / (2.0 * s);
        best = std::max(best, logs[k]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - best);
    return best + std::log(acc);
}

Tensor mixture_score(const GaussianMixture& gm, double alpha_t, const Tensor& x) {
    int64_t n = gm.dim();
    size_t K = gm.weights.size();
    std::vector<double> logs(K), svals(K);
    double best = -1e300;
    for (size_t k = 0; k < K; ++k) {
        double s = alpha_t * gm.variances[k] + 1.0 - alpha_t;
        svals[k] = s;
        double q = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double d = x[i] - std::sqrt(alpha_t) * gm.means[k][i];
            q += d * d;
        }
        logs[k] = std::log(gm.weights[k]) - 0.5 * static_cast<double>(n) * std::log(kTwoPi * s) - q / (2.0 * s);
        best = std::max(best, logs[k]);
    }
    double z = 0.0;
    for (size_t k = 0; k < K; ++k) z += std::exp(logs[k] - best);
    Tensor score(x.shape());
    for (size_t k = 0; k < K; ++k) {
        double gamma = std::exp(logs[k] - best) / z;
        double c = gamma / svals[k];
        for (int64_t i = 0; i < n; ++i) score[i] += c * (std::sqrt(alpha_t) * gm.means[k][i] - x[i]);
    }
    return score;
}

namespace {

class OracleMixtureDenoiser final : public Denoiser {
  public:
    OracleMixtureDenoiser(GaussianMixture gm, std::vector<double> alpha) : gm_(std::move(gm)), alpha_(std::move(alpha)) {
        gm_.validate();
    }

    int64_t dim() const override { return gm_.dim(); }
    std::string kind() const override { return "oracle-gaussian-mixture"; }

    Tensor predict_tensor(const Tensor& x_t, int t) const override {
        double a = alpha_at(t);
        return scale(mixture_score(gm_, a, x_t), -std::sqrt(1.0 - a));
    }

    Value predict(const Value& x_t, int t) const override {
        double a = alpha_at(t);
        double sqrt_a = std::sqrt(a);
        int64_t n = gm_.dim();
        size_t K = gm_.weights.size();
        std::vector<Value> diffs(K), logits(K);
        std::vector<double> svals(K);
        for (size_t k = 0; k < K; ++k) {
            double s = a * gm_.variances[k] + 1.0 - a;
            svals[k] = s;
            diffs[k] = ad::sub(ad::constant(scale(gm_.means[k], sqrt_a)), x_t);
            double logc = std::log(gm_.weights[k]) - 0.5 * static_cast<double>(n) * std::log(kTwoPi * s);
            Value q = scalar_mul(sum(square(diffs[k])), 1.0 / (2.0 * s));
            logits[k] = ad::sub(ad::scalar_value(logc), q);
        }
        Value lvec = K == 1 ? logits[0] : concat(logits);
        // Detached max-shift keeps exp in range without changing derivatives.
        double shift = lvec.tensor()[0];
        for (int64_t i = 1; i < lvec.numel(); ++i) shift = std::max(shift, lvec.tensor()[i]);
        Value p = exp_v(ad::sub(lvec, ad::constant(Tensor::full(lvec.shape(), shift))));
        Value zinv = recip(sum(p));
        Value score;
        for (size_t k = 0; k < K; ++k) {
            Value gamma = mul(slice(p, static_cast<int64_t>(k), 1), zinv);
            Value term = mul(diffs[k], expand(scalar_mul(gamma, 1.0 / svals[k]), x_t.shape()));
            score = score.defined() ? ad::add(score, term) : term;
        }
        return scalar_mul(score, -std::sqrt(1.0 - a));
    }

  private:
    double alpha_at(int t) const {
        if (t < 1 || t >= static_cast<int>(alpha_.size())) {
            throw ShapeError("denoiser: timestep " + std::to_string(t) + " out of range");
        }
        return alpha_[static_cast<size_t>(t)];
    }

    GaussianMixture gm_;
    std::vector<double> alpha_;
};

}  // namespace

Tensor Denoiser::predict_tensor(const Tensor& x_t, int t) const { return predict(ad::leaf(x_t), t).tensor(); }

std::unique_ptr<Denoiser> oracle_denoiser(GaussianMixture gm, const NoiseSchedule& sched) {
    return std::make_unique<OracleMixtureDenoiser>(std::move(gm), sched.alpha);
}

ForwardSample forward_sample(const Tensor& x0, int t, const NoiseSchedule& sched, Rng& rng) {
    if (t < 1 || t > sched.T) throw ShapeError("forward_sample: t out of range");
    double a = sched.alpha[static_cast<size_t>(t)];
    Tensor eps = rng.gaussian_tensor(x0.shape());
    Tensor x_t = scale(x0, std::sqrt(a));
    axpy(x_t, std::sqrt(1.0 - a), eps);
    return {std::move(x_t), std::move(eps)};
}

namespace {
double posterior_coef(double alpha_t, PosteriorMeanMode mode) {
    return mode == PosteriorMeanMode::kInversion ? std::sqrt(1.0 - alpha_t) : (1.0 - alpha_t);
}
}  // namespace

Value posterior_mean(const Value& x_t, int t, const NoiseSchedule& sched, const Denoiser& den, PosteriorMeanMode mode) {
    if (t < 1 || t > sched.T) throw ShapeError("posterior_mean: t out of range");
    double a = sched.alpha[static_cast<size_t>(t)];
    Value eps = den.predict(x_t, t);
    return scalar_mul(ad::sub(x_t, scalar_mul(eps, posterior_coef(a, mode))), 1.0 / std::sqrt(a));
}

Tensor posterior_mean_tensor(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                             PosteriorMeanMode mode) {
    double a = sched.alpha[static_cast<size_t>(t)];
    if (t < 1 || t > sched.T) throw ShapeError("posterior_mean: t out of range");
    Tensor x0 = sub(x_t, scale(den.predict_tensor(x_t, t), posterior_coef(a, mode)));
    return scale(x0, 1.0 / std::sqrt(a));
}

DdimStep ddim_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den, Rng& rng,
                   PosteriorMeanMode mode) {
    if (t < 1 || t > sched.T) throw ShapeError("ddim_step: t out of range");
    double a = sched.alpha[static_cast<size_t>(t)];
    double a_prev = sched.alpha[static_cast<size_t>(t - 1)];
    double sig = sched.sigma[static_cast<size_t>(t)];
    double dir_sq = 1.0 - a_prev - sig * sig;
    if (dir_sq < -1e-12) throw NumericError("ddim_step: schedule invalid, 1 - alpha_{t-1} - sigma_t^2 < 0");
    dir_sq = std::max(dir_sq, 0.0);
    Tensor eps_hat = den.predict_tensor(x_t, t);
    Tensor x0 = scale(sub(x_t, scale(eps_hat, posterior_coef(a, mode))), 1.0 / std::sqrt(a));
    Tensor mu = scale(x0, std::sqrt(a_prev));
    axpy(mu, std::sqrt(dir_sq), eps_hat);
    Tensor x_prev = mu;
    if (sig > 0.0) {
        Tensor noise = rng.gaussian_tensor(x_t.shape());
        axpy(x_prev, sig, noise);
    }
    x_prev.check_finite("ddim_step");
    return {std::move(mu), std::move(x_prev)};
}

Tensor ddim_sample(const Denoiser& den, const NoiseSchedule& sched, uint64_t seed, PosteriorMeanMode mode) {
    Rng rng(seed);
    Tensor x = rng.gaussian_tensor({den.dim()});
    for (int t = sched.T; t >= 1; --t) x = ddim_step(x, t, sched, den, rng, mode).x_prev;
    return x;
}

GaussianPosterior single_gaussian_posterior(const GaussianMixture& gm, const NoiseSchedule& sched, int t,
                                            const Tensor& x_t) {
    gm.validate();
    if (gm.weights.size() != 1) throw ShapeError("single_gaussian_posterior: mixture must have one component");
    if (t < 1 || t > sched.T) throw ShapeError("single_gaussian_posterior: t out of range");
    double a = sched.alpha[static_cast<size_t>(t)];
    double v = gm.variances[0];
    double prec = a / (1.0 - a) + 1.0 / v;
    double var = 1.0 / prec;
    Tensor mean = scale(x_t, var * std::sqrt(a) / (1.0 - a));
    axpy(mean, var / v, gm.means[0]);
    return {std::move(mean), var};
}

Tensor MlpDenoiser::time_embedding(int t, int T) {
    Tensor e({kTimeEmbedDim});
    double u = static_cast<double>(t) / static_cast<double>(T);
    // Geometric frequencies 1..128 rad over u in (0, 1]: low ones give a
    // smooth global position, high ones separate adjacent steps.
    for (int k = 0; k < kTimeEmbedDim / 2; ++k) {
        double freq = std::pow(2.0, k);
        e[k] = std::sin(freq * u);
        e[k + kTimeEmbedDim / 2] = std::cos(freq * u);
    }
    return e;
}

const std::vector<std::string>& MlpDenoiser::param_names() {
    static const std::vector<std::string> names{"w1x", "w1t", "b1", "w2", "b2", "w3", "b3"};
    return names;
}

MlpDenoiser::MlpDenoiser(int64_t dim, int T, int64_t hidden, std::vector<Tensor> params)
    : dim_(dim), T_(T), hidden_(hidden), params_(std::move(params)) {
    if (params_.size() != 7) throw ShapeError("mlp denoiser expects 7 parameter tensors");
}

MlpDenoiser MlpDenoiser::init(int64_t dim, int T, int64_t hidden, uint64_t seed) {
    Rng rng(seed);
    auto w = [&](int64_t out, int64_t in) { return rng.gaussian_tensor({out, in}, 1.0 / std::sqrt(double(in))); };
    std::vector<Tensor> p;
    p.push_back(w(hidden, dim));
    p.push_back(w(hidden, kTimeEmbedDim));
    p.push_back(Tensor::zeros({hidden}));
    p.push_back(w(hidden, hidden));
    p.push_back(Tensor::zeros({hidden}));
    p.push_back(w(dim, hidden));
    p.push_back(Tensor::zeros({dim}));
    return MlpDenoiser(dim, T, hidden, std::move(p));
}

Value MlpDenoiser::predict(const Value& x_t, int t) const {
    if (x_t.numel() != dim_) throw ShapeError("mlp denoiser: input dim mismatch");
    Value temb = ad::constant(time_embedding(t, T_));
    auto P = [&](size_t i) { return ad::leaf(params_[i]); };
    Value h = silu(ad::add(ad::add(matmul(P(0), x_t), matmul(P(1), temb)), P(2)));
    h = silu(ad::add(matmul(P(3), h), P(4)));
    return ad::add(matmul(P(5), h), P(6));
}

Value MlpDenoiser::predict_batch(const Value& X, const Value& Temb, const std::vector<Value>& params) const {
    int64_t B = X.shape()[0];
    Value h = ad::add(ad::add(matmul(X, transpose(params[0])), matmul(Temb, transpose(params[1]))),
                      expand_rows(params[2], B));
    h = silu(h);
    h = silu(ad::add(matmul(h, transpose(params[3])), expand_rows(params[4], B)));
    return ad::add(matmul(h, transpose(params[5])), expand_rows(params[6], B));
}

TrainResult train_denoiser(const std::vector<Tensor>& dataset, const NoiseSchedule& sched, int epochs, double lr,
                           uint64_t seed, int64_t hidden) {
    if (dataset.empty()) throw ShapeError("train_denoiser: empty dataset");
    int64_t dim = dataset[0].numel();
    for (const auto& d : dataset) {
        if (d.numel() != dim) throw ShapeError("train_denoiser: dataset shapes must be uniform");
    }
    auto model = std::make_unique<MlpDenoiser>(MlpDenoiser::init(dim, sched.T, hidden, seed));
    Rng rng = Rng(seed).fork(1);
    int64_t B = static_cast<int64_t>(dataset.size());
    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Tensor X({B, dim}), Temb({B, MlpDenoiser::kTimeEmbedDim}), Eps({B, dim});
        for (int64_t i = 0; i < B; ++i) {
            int t = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(sched.T));
            double a = sched.alpha[static_cast<size_t>(t)];
            Tensor temb = MlpDenoiser::time_embedding(t, sched.T);
            for (int64_t j = 0; j < MlpDenoiser::kTimeEmbedDim; ++j) Temb[i * MlpDenoiser::kTimeEmbedDim + j] = temb[j];
            const Tensor& x0 = dataset[static_cast<size_t>(i)];
            for (int64_t j = 0; j < dim; ++j) {
                double e = rng.gaussian();
                Eps[i * dim + j] = e;
                X[i * dim + j] = std::sqrt(a) * x0[j] + std::sqrt(1.0 - a) * e;
            }
        }
        double loss_val = 0.0;
        try {
            std::vector<Value> leaves;
            for (const auto& p : model->params()) leaves.push_back(ad::leaf(p));
            Value pred = model->predict_batch(ad::leaf(X), ad::leaf(Temb), leaves);
            Value loss = mean(square(ad::sub(pred, ad::leaf(Eps))));
            loss_val = loss.item();
            std::vector<Value> grads = ad::backward(loss, leaves, false);
            for (size_t i = 0; i < leaves.size(); ++i) {
                axpy(model->mutable_params()[i], -lr, grads[i].tensor());
            }
        } catch (const NumericError&) {
            throw TrainingDiverged(epoch);
        }
        losses.push_back(loss_val);
    }
    return {std::move(model), std::move(losses)};
}

}  // namespace gradinv
