#include "gradinv/vulnerability.hpp"

#include <cmath>

namespace gradinv {

using ad::Value;

std::vector<Tensor> rv_directions(int64_t dim, int M, Rng& rng, bool* orthonormal) {
    if (M < 1) throw ShapeError("rv_directions: M must be >= 1");
    bool ortho = M <= dim;
    if (orthonormal) *orthonormal = ortho;
    std::vector<Tensor> dirs;
    dirs.reserve(static_cast<size_t>(M));
    while (static_cast<int>(dirs.size()) < M) {
        Tensor v = rng.gaussian_tensor({dim});
        if (ortho) {
            for (const auto& u : dirs) axpy(v, -dot(u, v), u);
        }
        double norm = l2_norm(v);
        if (norm < 1e-9) continue;  // re-draw on a degenerate residual
        dirs.push_back(scale(v, 1.0 / norm));
    }
    return dirs;
}

RVEstimate estimate_rv(const AttackedModel& model, const std::vector<Tensor>& dataset, const std::vector<int>& labels,
                       int M, int N, Rng& rng) {
    if (N < 1 || static_cast<size_t>(N) > dataset.size()) {
        throw ShapeError("estimate_rv: N must lie in [1, dataset size]");
    }
    if (labels.size() < static_cast<size_t>(N)) throw ShapeError("estimate_rv: fewer labels than samples");
    RVEstimate est;
    est.M = M;
    est.N = N;
    std::vector<Tensor> dirs = rv_directions(model.param_count(), M, rng, &est.orthonormal);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < N; ++i) {
        Value x = ad::leaf(dataset[static_cast<size_t>(i)]);
        Value flat = model.client_gradient_value(x, labels[static_cast<size_t>(i)]);
        for (const auto& v : dirs) {
            Value s = dot_v(ad::constant(v), flat);
            Tensor grad = ad::backward(s, {x}, false)[0].tensor();
            double term = l2_norm(grad);
            sum += term;
            sum_sq += term * term;
        }
    }
    double count = static_cast<double>(N) * static_cast<double>(M);
    est.value = sum / count;
    double var = count > 1.0 ? std::max(0.0, (sum_sq - sum * sum / count) / (count - 1.0)) : 0.0;
    est.stderr_value = std::sqrt(var / count);
    return est;
}

double exact_rv_bilinear(const AttackedModel& model, const std::vector<Tensor>& dataset) {
    if (model.spec().name != "linear-1" || model.loss_kind() != ClientLoss::kHalfSquaredError) {
        throw ShapeError("exact_rv_bilinear: requires linear-1 with half-squared-error");
    }
    if (dataset.empty()) throw ShapeError("exact_rv_bilinear: empty dataset");
    const Tensor& W = model.params()[0];
    int64_t c = W.shape()[0], n = W.shape()[1];
    Tensor y = model.hse_target_or_default();
    double w_fro_sq = dot(W, W);
    double best = 0.0;
    for (const auto& x : dataset) {
        if (x.numel() != n) throw ShapeError("exact_rv_bilinear: input dim mismatch");
        // residual r = Wx (+ b) - y
        Tensor r({c});
        for (int64_t i = 0; i < c; ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < n; ++j) s += W.at(i, j) * x[j];
            r[i] = s - y[i];
        }
        if (model.spec().bias) axpy(r, 1.0, model.params()[1]);
        // d/dx_k (r_i x_j) = W_ik x_j + r_i delta_jk; bias rows add W_ik.
        // ||.||_F^2 = ||W||_F^2 ||x||^2 + 2 r'Wx + n ||r||^2 (+ ||W||_F^2).
        double rwx = 0.0;
        for (int64_t i = 0; i < c; ++i) {
            double wx = 0.0;
            for (int64_t j = 0; j < n; ++j) wx += W.at(i, j) * x[j];
            rwx += r[i] * wx;
        }
        double total = w_fro_sq * dot(x, x) + 2.0 * rwx + static_cast<double>(n) * dot(r, r);
        if (model.spec().bias) total += w_fro_sq;
        best = std::max(best, std::sqrt(total));
    }
    return best;
}

}  // namespace gradinv
