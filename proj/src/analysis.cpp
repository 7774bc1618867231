#include "gradinv/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gradinv/attack.hpp"

namespace gradinv {

using ad::Value;

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

double psnr(const Tensor& a, const Tensor& b, double max_value) {
    if (!(max_value > 0.0)) throw ShapeError("psnr: max_value must be positive");
    double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_value * max_value / m);
}

std::string theorem_report_text(const TheoremReport& r) {
    std::ostringstream os;
    os << "theorem = " << r.id << '\n';
    os << "pass = " << (r.pass ? "true" : "false") << '\n';
    char buf[64];
    for (const auto& [k, v] : r.stats) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << k << " = " << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", r.tolerance);
    os << "tolerance = " << buf << '\n';
    os << "samples = " << r.samples << '\n';
    if (!r.seeds.empty()) {
        os << "seeds =";
        for (auto s : r.seeds) os << ' ' << s;
        os << '\n';
    }
    if (!r.note.empty()) os << "note = " << r.note << '\n';
    return os.str();
}

TheoremReport laurent_massart_check(int64_t n, double sigma, double eps, int64_t samples, Rng& rng) {
    if (n < 1) throw ShapeError("laurent_massart_check: n must be >= 1");
    if (!(eps > 0.0)) throw ShapeError("laurent_massart_check: eps must be positive");
    if (samples < 10000) throw ShapeError("laurent_massart_check: samples must be >= 1e4");
    double s2 = sigma * sigma;
    double upper_threshold = n * s2 + 2.0 * n * s2 * (std::sqrt(eps) + eps);
    double lower_threshold = n * s2 + 2.0 * n * s2 * std::sqrt(eps);
    int64_t upper_hits = 0, lower_hits = 0;
    for (int64_t s = 0; s < samples; ++s) {
        double q = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double z = sigma * rng.gaussian();
            q += z * z;
        }
        if (q >= upper_threshold) ++upper_hits;
        if (q <= lower_threshold) ++lower_hits;
    }
    double bound = std::exp(-static_cast<double>(n) * eps);
    double upper_freq = static_cast<double>(upper_hits) / static_cast<double>(samples);
    double lower_freq = static_cast<double>(lower_hits) / static_cast<double>(samples);
    double se = std::sqrt(std::max(bound * (1.0 - bound), 1.0 / static_cast<double>(samples)) /
                          static_cast<double>(samples));
    TheoremReport rep;
    rep.id = "laurent-massart";
    rep.samples = samples;
    rep.tolerance = bound + 3.0 * se;
    rep.pass = upper_freq <= rep.tolerance;
    rep.stats = {{"n", static_cast<double>(n)},
                 {"sigma", sigma},
                 {"eps", eps},
                 {"bound", bound},
                 {"upper_threshold", upper_threshold},
                 {"upper_tail_freq", upper_freq},
                 {"printed_lower_threshold", lower_threshold},
                 {"printed_lower_event_freq", lower_freq}};
    rep.note =
        "printed lower-tail inequality bounds a high-probability event by a vanishing number; "
        "its frequency is reported, not asserted";
    return rep;
}

JensenGap jensen_gap_estimate(const AttackedModel& model, const GaussianMixture& gm, const NoiseSchedule& sched, int t,
                              const Tensor& x_t, int64_t samples, Rng& rng) {
    if (gm.weights.size() != 1) {
        throw ShapeError("jensen_gap_estimate: posterior is closed-form only for a single-Gaussian prior");
    }
    if (samples < 1000) throw ShapeError("jensen_gap_estimate: samples must be >= 1e3");
    GaussianPosterior post = single_gaussian_posterior(gm, sched, t, x_t);
    double sd = std::sqrt(post.variance);
    int64_t dim = post.mean.numel();
    Tensor mean_g;
    Tensor sq_acc;
    for (int64_t s = 0; s < samples; ++s) {
        Tensor x0 = post.mean;
        for (int64_t i = 0; i < dim; ++i) x0[i] += sd * rng.gaussian();
        Tensor g = model.client_gradient(x0).values;
        if (s == 0) {
            mean_g = Tensor::zeros(g.shape());
            sq_acc = Tensor::zeros(g.shape());
        }
        axpy(mean_g, 1.0, g);
        for (int64_t i = 0; i < g.numel(); ++i) sq_acc[i] += g[i] * g[i];
    }
    double count = static_cast<double>(samples);
    mean_g = scale(mean_g, 1.0 / count);
    Tensor g_at_mean = model.client_gradient(post.mean).values;
    JensenGap gap;
    gap.samples = samples;
    gap.value = l2_norm(sub(mean_g, g_at_mean));
    double var_sum = 0.0;
    for (int64_t i = 0; i < sq_acc.numel(); ++i) {
        double var = std::max(0.0, sq_acc[i] / count - mean_g[i] * mean_g[i]);
        var_sum += var;
    }
    gap.stderr_value = std::sqrt(var_sum / count);
    return gap;
}

TheoremReport check_monotonicity(const AttackTrace& trace, double tol) {
    if (trace.records.empty()) throw ShapeError("check_monotonicity: empty trace");
    int64_t ok = 0, total = 0;
    for (size_t i = 0; i + 1 < trace.records.size(); ++i) {
        ++total;
        if (trace.records[i + 1].attack_loss <= trace.records[i].attack_loss + tol) ++ok;
    }
    double fraction = total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
    TheoremReport rep;
    rep.id = "attack-loss-monotone";
    rep.tolerance = tol;
    rep.samples = total;
    rep.stats = {{"fraction_nonincreasing", fraction}};
    rep.pass = fraction >= 0.95;
    return rep;
}

TheoremReport convergence_rate_report(const std::vector<std::pair<double, std::vector<AttackTrace>>>& by_variance) {
    if (by_variance.size() < 2) throw ShapeError("convergence_rate_report: need at least 2 noise levels");
    TheoremReport rep;
    rep.id = "convergence-rate-vs-noise";
    std::vector<std::pair<double, double>> level_decrease;
    for (const auto& [variance, traces] : by_variance) {
        if (traces.size() < 3) throw ShapeError("convergence_rate_report: need >= 3 seeds per level");
        double acc = 0.0;
        int64_t count = 0;
        for (const auto& trace : traces) {
            const auto& rec = trace.records;
            if (rec.size() < 2) throw ShapeError("convergence_rate_report: trace too short");
            acc += (rec.front().attack_loss - rec.back().attack_loss) / static_cast<double>(rec.size() - 1);
            ++count;
        }
        level_decrease.emplace_back(variance, acc / static_cast<double>(count));
        rep.samples += count;
    }
    std::sort(level_decrease.begin(), level_decrease.end());
    bool ok = true;
    for (size_t i = 0; i + 1 < level_decrease.size(); ++i) {
        if (level_decrease[i + 1].second > level_decrease[i].second + 1e-12) ok = false;
    }
    for (const auto& [v, d] : level_decrease) {
        rep.stats.emplace_back("mean_decrease_var_" + std::to_string(v), d);
    }
    rep.pass = ok;
    return rep;
}

SpectrumResult jacobian_spectrum(const AttackedModel& model, const Tensor& x, int label) {
    int64_t p = model.param_count();
    int64_t n = model.input_dim();
    if (p * n > 1000000) {
        throw ShapeError("jacobian_spectrum: dense Jacobian too large (" + std::to_string(p * n) + " entries)");
    }
    Value x_leaf = ad::leaf(x);
    Value flat = model.client_gradient_value(x_leaf, label);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    for (int64_t row = 0; row < p; ++row) {
        Value s = slice(flat, row, 1);
        Tensor jrow = ad::backward(s, {x_leaf}, false)[0].tensor();
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j <= i; ++j) gram(i, j) += jrow[i] * jrow[j];
        }
    }
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) gram(i, j) = gram(j, i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw NumericError("jacobian_spectrum: eigensolver failed");
    const auto& ev = solver.eigenvalues();
    return {ev(0), ev(n - 1)};
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ShapeError("spearman_correlation: need two equal-length series");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> order(v.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        size_t i = 0;
        while (i < order.size()) {
            size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double num = 0, va = 0, vb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return num / std::sqrt(va * vb);
}

}  // namespace gradinv
