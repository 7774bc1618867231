#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gradinv/diffusion.hpp"
#include "gradinv/models.hpp"
#include "gradinv/rng.hpp"

namespace gradinv {

struct AttackTrace;

double mse(const Tensor& a, const Tensor& b);
// 10 log10(max^2 / mse); +infinity when mse is exactly zero.
double psnr(const Tensor& a, const Tensor& b, double max_value);

struct TheoremReport {
    std::string id;
    bool pass = false;
    std::vector<std::pair<std::string, double>> stats;
    double tolerance = 0.0;
    int64_t samples = 0;
    std::vector<uint64_t> seeds;
    std::string note;
};

std::string theorem_report_text(const TheoremReport& r);

// Draws `samples` vectors from N(0, sigma^2 I_n) and measures the frequency
// of ||x||^2 >= n s^2 + 2 n s^2 (sqrt(eps) + eps) against the analytic bound
// e^{-n eps} (pass iff freq <= bound + 3 binomial SEs). The second printed
// inequality bounds a high-probability event by the same small number; its
// frequency is recorded but never asserted.
TheoremReport laurent_massart_check(int64_t n, double sigma, double eps, int64_t samples, Rng& rng);

struct JensenGap {
    double value = 0.0;
    double stderr_value = 0.0;  // SE of the vector-mean estimate, aggregated
    int64_t samples = 0;
};

// Monte-Carlo || E[g(x0)] - g(E[x0]) || with x0 drawn from the analytic
// posterior p(x0 | x_t) of a single-Gaussian data prior.
JensenGap jensen_gap_estimate(const AttackedModel& model, const GaussianMixture& gm, const NoiseSchedule& sched, int t,
                              const Tensor& x_t, int64_t samples, Rng& rng);

// Fraction of consecutive steps with loss(x_{t-1}) <= loss(x_t) + tol;
// pass iff >= 0.95.
TheoremReport check_monotonicity(const AttackTrace& trace, double tol);

// Mean per-step loss decrease per noise level; pass iff the decrease is
// non-increasing in the variance (larger noise, slower convergence).
TheoremReport convergence_rate_report(const std::vector<std::pair<double, std::vector<AttackTrace>>>& by_variance);

struct SpectrumResult {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

// Extreme eigenvalues of J'J where J = d/dx of the flattened client
// gradient, built row-by-row from projected gradients. Guarded to
// param_count * input_dim <= 1e6.
SpectrumResult jacobian_spectrum(const AttackedModel& model, const Tensor& x, int label);

// Spearman rank correlation; ties receive average ranks.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gradinv
