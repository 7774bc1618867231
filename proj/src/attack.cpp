#include "gradinv/attack.hpp"

#include <cmath>
#include <limits>

#include "gradinv/analysis.hpp"

namespace gradinv {

using ad::Value;

namespace {
constexpr double kDegenerateNorm = 1e-12;
const double kNan = std::numeric_limits<double>::quiet_NaN();
}  // namespace

void AttackConfig::validate() const {
    if (m_r < 0.0 || m_r > 1.0) throw ShapeError("attack config: m_r must lie in [0, 1]");
    if (step_size && *step_size <= 0.0) throw ShapeError("attack config: step size must be positive or auto");
    if (loss_kind != "euclidean") throw ShapeError("attack config: unsupported loss kind '" + loss_kind + "'");
    if (max_snapshots < 0) throw ShapeError("attack config: max_snapshots must be >= 0");
}

double AttackTrace::peak_psnr() const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : records)
        if (!std::isnan(r.psnr)) best = std::max(best, r.psnr);
    return best;
}

double AttackTrace::peak_mse() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : records)
        if (!std::isnan(r.mse)) best = std::min(best, r.mse);
    return best;
}

double AttackTrace::final_loss() const { return records.empty() ? kNan : records.back().attack_loss; }

Value attack_loss(const LeakedGradient& a, const LeakedGradient& b) {
    if (a.values.numel() != b.values.numel()) {
        throw ShapeError("attack_loss: gradient lengths " + std::to_string(a.values.numel()) + " vs " +
                         std::to_string(b.values.numel()));
    }
    return l2_norm_v(ad::sub(ad::leaf(a.values), ad::leaf(b.values)));
}

GuidanceStep guidance_compute(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                              const AttackedModel& model, const LeakedGradient& g_leaked, PosteriorMeanMode mode) {
    if (g_leaked.values.numel() != model.param_count()) {
        throw ShapeError("guidance: leaked gradient length does not match model parameter count");
    }
    double a = sched.alpha[static_cast<size_t>(t)];
    double a_prev = sched.alpha[static_cast<size_t>(t - 1)];
    double sig = sched.sigma[static_cast<size_t>(t)];
    double dir_sq = 1.0 - a_prev - sig * sig;
    if (dir_sq < -1e-12) throw NumericError("guidance: schedule invalid, 1 - alpha_{t-1} - sigma_t^2 < 0");
    dir_sq = std::max(dir_sq, 0.0);

    Value x_leaf = ad::leaf(x_t);
    Value eps = den.predict(x_leaf, t);
    double coef = mode == PosteriorMeanMode::kInversion ? std::sqrt(1.0 - a) : (1.0 - a);
    Value x0 = scalar_mul(ad::sub(x_leaf, scalar_mul(eps, coef)), 1.0 / std::sqrt(a));
    Value gval = model.client_gradient_value(x0, model.label());
    Value loss = l2_norm_v(ad::sub(gval, ad::constant(g_leaked.values)));

    GuidanceStep step;
    step.x0_hat = x0.tensor();
    step.eps_hat = eps.tensor();
    step.mu = scale(step.x0_hat, std::sqrt(a_prev));
    axpy(step.mu, std::sqrt(dir_sq), step.eps_hat);
    step.loss = loss.item();
    if (step.loss < kDegenerateNorm) {
        // ||.|| is not differentiable at zero; the caller takes the
        // unconditional step.
        step.degenerate = true;
        step.grad = Tensor::zeros(x_t.shape());
        return step;
    }
    step.grad = ad::backward(loss, {x_leaf}, false)[0].tensor();
    step.grad_norm = l2_norm(step.grad);
    if (step.grad_norm < kDegenerateNorm) {
        step.degenerate = true;
        step.grad = Tensor::zeros(x_t.shape());
    }
    return step;
}

namespace {

Tensor optimal_direction(const GuidanceStep& step, double radius) {
    Tensor d = scale(step.grad, -radius / step.grad_norm);
    return d;
}

}  // namespace

GuidanceDirection guidance_direction(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                                     const AttackedModel& model, const LeakedGradient& g_leaked,
                                     PosteriorMeanMode mode) {
    GuidanceStep step = guidance_compute(x_t, t, sched, den, model, g_leaked, mode);
    double radius = std::sqrt(static_cast<double>(x_t.numel())) * sched.sigma[static_cast<size_t>(t)];
    if (step.degenerate) return {Tensor::zeros(x_t.shape()), true};
    return {optimal_direction(step, radius), false};
}

Tensor ggss_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den, const AttackedModel& model,
                 const LeakedGradient& g_leaked, PosteriorMeanMode mode) {
    GuidanceStep step = guidance_compute(x_t, t, sched, den, model, g_leaked, mode);
    double radius = std::sqrt(static_cast<double>(x_t.numel())) * sched.sigma[static_cast<size_t>(t)];
    if (step.degenerate || radius == 0.0) return step.mu;
    Tensor x = step.mu;
    axpy(x, 1.0, optimal_direction(step, radius));
    return x;
}

Tensor blended_step(const Tensor& x_t, int t, const NoiseSchedule& sched, const Denoiser& den,
                    const AttackedModel& model, const LeakedGradient& g_leaked, double m_r, double r, Rng& rng,
                    PosteriorMeanMode mode) {
    if (m_r < 0.0 || m_r > 1.0) throw ShapeError("blended_step: m_r must lie in [0, 1]");
    GuidanceStep step = guidance_compute(x_t, t, sched, den, model, g_leaked, mode);
    double sig = sched.sigma[static_cast<size_t>(t)];
    double radius = std::sqrt(static_cast<double>(x_t.numel())) * sig;
    if (r <= 0.0) r = radius;  // auto
    Tensor d_sample = sig > 0.0 ? rng.gaussian_tensor(x_t.shape(), sig) : Tensor::zeros(x_t.shape());
    Tensor d_m = scale(d_sample, 1.0 - m_r);
    if (!step.degenerate && radius > 0.0) axpy(d_m, m_r, optimal_direction(step, radius));
    double norm = l2_norm(d_m);
    if (norm < kDegenerateNorm || r == 0.0) return step.mu;
    Tensor x = step.mu;
    axpy(x, r / norm, d_m);
    return x;
}

AttackTrace run_attack(const AttackedModel& model, const LeakedGradient& g_leaked, const Denoiser& den,
                       const NoiseSchedule& sched, const AttackConfig& cfg, const Tensor* target) {
    cfg.validate();
    if (g_leaked.values.numel() != model.param_count()) {
        throw ShapeError("run_attack: leaked gradient length does not match model parameter count");
    }
    if (sched.T != cfg.T) throw ShapeError("run_attack: schedule T does not match config T");
    bool exact_spherical = cfg.m_r == 1.0 && !cfg.step_size;
    int snapshot_every = cfg.max_snapshots > 0 ? std::max(1, cfg.T / cfg.max_snapshots) : 0;

    Rng rng(cfg.seed);
    Tensor x = rng.gaussian_tensor({model.input_dim()});
    AttackTrace trace;
    trace.records.reserve(static_cast<size_t>(cfg.T));
    for (int t = cfg.T; t >= 1; --t) {
        try {
            GuidanceStep step = guidance_compute(x, t, sched, den, model, g_leaked, cfg.posterior_mode);
            ++trace.gradient_evals;
            StepRecord rec;
            rec.t = t;
            rec.attack_loss = step.loss;
            rec.degenerate = step.degenerate;
            rec.mse = target ? mse(step.x0_hat, *target) : kNan;
            rec.psnr = target ? psnr(step.x0_hat, *target, 1.0) : kNan;
            trace.records.push_back(rec);
            if (snapshot_every > 0 && (t % snapshot_every == 0 || t == 1)) {
                trace.snapshots.emplace_back(t, step.x0_hat);
            }

            double sig = sched.sigma[static_cast<size_t>(t)];
            double radius = std::sqrt(static_cast<double>(x.numel())) * sig;
            if (exact_spherical) {
                x = step.mu;
                if (!step.degenerate && radius > 0.0) axpy(x, 1.0, optimal_direction(step, radius));
            } else {
                double r = cfg.step_size ? *cfg.step_size : radius;
                Tensor d_sample = sig > 0.0 ? rng.gaussian_tensor(x.shape(), sig) : Tensor::zeros(x.shape());
                Tensor d_m = scale(d_sample, 1.0 - cfg.m_r);
                if (!step.degenerate && radius > 0.0) axpy(d_m, cfg.m_r, optimal_direction(step, radius));
                double norm = l2_norm(d_m);
                x = step.mu;
                if (norm >= kDegenerateNorm && r > 0.0) {
                    axpy(x, r / norm, d_m);
                } else {
                    trace.records.back().degenerate = true;  // fell back to mu
                }
            }
            x.check_finite("run_attack step");
        } catch (const NumericError& e) {
            throw AttackAbort(std::string("attack aborted: ") + e.what(), t);
        }
    }
    trace.final_x = x;
    trace.final_mse = target ? mse(x, *target) : kNan;
    trace.final_psnr = target ? psnr(x, *target, 1.0) : kNan;
    return trace;
}

AttackTrace dlg_baseline(const AttackedModel& model, const LeakedGradient& g_leaked, int iters, double lr,
                         uint64_t seed, const Tensor* target, int64_t eval_budget) {
    if (iters < 1) throw ShapeError("dlg_baseline: iters must be >= 1");
    if (g_leaked.values.numel() != model.param_count()) {
        throw ShapeError("dlg_baseline: leaked gradient length does not match model parameter count");
    }
    Rng rng(seed);
    Tensor x = rng.gaussian_tensor({model.input_dim()});
    AttackTrace trace;
    trace.records.reserve(static_cast<size_t>(iters));
    int snapshot_every = std::max(1, iters / 10);

    auto sq_loss_and_grad = [&](const Tensor& at, Tensor* grad) {
        Value x_leaf = ad::leaf(at);
        Value gval = model.client_gradient_value(x_leaf, model.label());
        Value loss = sum(square(ad::sub(gval, ad::constant(g_leaked.values))));
        ++trace.gradient_evals;
        if (grad) *grad = ad::backward(loss, {x_leaf}, false)[0].tensor();
        return loss.item();
    };
    auto budget_left = [&] { return eval_budget <= 0 || trace.gradient_evals < eval_budget; };

    for (int it = 1; it <= iters && budget_left(); ++it) {
        try {
            Tensor grad;
            double sq = sq_loss_and_grad(x, &grad);
            StepRecord rec;
            rec.t = it;
            rec.attack_loss = std::sqrt(sq);
            rec.mse = target ? mse(x, *target) : kNan;
            rec.psnr = target ? psnr(x, *target, 1.0) : kNan;
            trace.records.push_back(rec);
            if (it % snapshot_every == 0 || it == iters) trace.snapshots.emplace_back(it, x);

            // Backtracking line search keeps the objective non-increasing;
            // the step degrades to zero when no decrease is found.
            double step = lr;
            bool moved = false;
            for (int bt = 0; bt < 30 && budget_left(); ++bt) {
                Tensor cand = x;
                axpy(cand, -step, grad);
                double sq_cand = sq_loss_and_grad(cand, nullptr);
                if (sq_cand <= sq) {
                    x = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) trace.records.back().degenerate = true;
            x.check_finite("dlg step");
        } catch (const NumericError& e) {
            throw AttackAbort(std::string("dlg aborted: ") + e.what(), it);
        }
    }
    trace.final_x = x;
    trace.final_mse = target ? mse(x, *target) : kNan;
    trace.final_psnr = target ? psnr(x, *target, 1.0) : kNan;
    return trace;
}

}  // namespace gradinv
