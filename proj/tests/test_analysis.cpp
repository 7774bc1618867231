#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradinv/analysis.hpp"
#include "gradinv/attack.hpp"
#include "gradinv/runner.hpp"
#include "support/finite_diff.hpp"

using namespace gradinv;
namespace ts = testsupport;

TEST_CASE("mse basics and naive-loop oracle") {
    Tensor a({4}, {0.1, 0.2, 0.3, 0.4});
    CHECK(mse(a, a) == 0.0);

    Tensor b = a;
    for (int64_t i = 0; i < b.numel(); ++i) b[i] += 0.1;
    CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));

    Rng rng(3);
    Tensor x = rng.gaussian_tensor({64}), y = rng.gaussian_tensor({64});
    double naive = 0.0;
    for (int64_t i = 0; i < 64; ++i) naive += (x[i] - y[i]) * (x[i] - y[i]);
    naive /= 64.0;
    CHECK(std::fabs(mse(x, y) - naive) < 1e-15);

    CHECK_THROWS_AS(mse(a, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("psnr arithmetic, sentinel, monotonicity") {
    Tensor a({2}, {0.0, 0.0});
    Tensor b({2}, {0.1, 0.1});  // mse = 0.01
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(std::isinf(psnr(a, a, 1.0)));
    CHECK_THROWS_AS(psnr(a, b, 0.0), ShapeError);

    // mse 0.0016 pairs with roughly 27.96 dB
    Tensor c({1}, {0.0}), d({1}, {0.04});
    CHECK(psnr(c, d, 1.0) == doctest::Approx(27.9588).epsilon(1e-4));

    double prev = std::numeric_limits<double>::infinity();
    for (double delta : {0.01, 0.02, 0.05, 0.1, 0.5}) {
        Tensor e({1}, {delta});
        double p = psnr(c, e, 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("laurent-massart bound holds empirically on the upper tail") {
    Rng rng(5);
    TheoremReport rep = laurent_massart_check(1000, 1.0, 0.01, 10000, rng);
    CHECK(rep.pass);
    auto stat = [&](const std::string& k) {
        for (const auto& [name, v] : rep.stats)
            if (name == k) return v;
        FAIL("missing stat ", k);
        return 0.0;
    };
    CHECK(stat("upper_threshold") == doctest::Approx(1220.0).epsilon(1e-12));
    CHECK(stat("bound") == doctest::Approx(std::exp(-10.0)).epsilon(1e-12));
    CHECK(stat("upper_tail_freq") <= rep.tolerance);
    // the printed lower-tail event is a high-probability one; recorded only
    CHECK(stat("printed_lower_event_freq") > 0.4);
    CHECK(rep.note.find("not asserted") != std::string::npos);

    // extreme eps: the tail frequency collapses to zero
    Rng rng2(6);
    TheoremReport far = laurent_massart_check(1000, 1.0, 4.0, 10000, rng2);
    CHECK(stat("upper_tail_freq") >= 0.0);
    CHECK(far.stats[5].second == 0.0);

    CHECK_THROWS_AS(laurent_massart_check(1000, 1.0, 0.01, 100, rng), ShapeError);
    CHECK_THROWS_AS(laurent_massart_check(1000, 1.0, -0.1, 10000, rng), ShapeError);
}

TEST_CASE("high-dimensional chi-square concentration") {
    Rng rng(7);
    const int64_t n = 4096, samples = 10000;
    int64_t inside = 0;
    for (int64_t s = 0; s < samples; ++s) {
        double q = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double z = rng.gaussian();
            q += z * z;
        }
        double ratio = q / static_cast<double>(n);
        if (ratio >= 0.9 && ratio <= 1.1) ++inside;
    }
    CHECK(static_cast<double>(inside) / static_cast<double>(samples) > 0.999);
}

TEST_CASE("jensen gap of an affine gradient map is zero within monte carlo error") {
    // zero-weight linear-1: the client gradient ((b - y) x', b - y) is affine in x
    AttackedModel m = AttackedModel::build({"linear-1", 6, 3, true}, 3, ClientLoss::kHalfSquaredError, 0);
    m.mutable_params()[0] = Tensor::zeros({3, 6});
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {Tensor::full({6}, 0.4)};
    gm.variances = {0.1};
    NoiseSchedule sched = make_schedule(40, 0.5);
    Rng rng(9);
    Tensor x_t = rng.gaussian_tensor({6});
    JensenGap gap = jensen_gap_estimate(m, gm, sched, 20, x_t, 2000, rng);
    CHECK(gap.value <= 4.0 * gap.stderr_value);

    GaussianMixture two = gm;
    two.weights = {0.5, 0.5};
    two.means.push_back(Tensor::zeros({6}));
    two.variances.push_back(0.1);
    CHECK_THROWS_AS(jensen_gap_estimate(m, two, sched, 20, x_t, 2000, rng), ShapeError);
    CHECK_THROWS_AS(jensen_gap_estimate(m, gm, sched, 20, x_t, 10, rng), ShapeError);
}

TEST_CASE("jensen gap grows with posterior variance for a nonlinear model") {
    AttackedModel m = AttackedModel::build({"mlp-2", 6, 3, true}, 11);
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {Tensor::full({6}, 0.5)};
    gm.variances = {0.08};
    NoiseSchedule sched = make_schedule(40, 0.5);
    Rng rng(13);
    double prev_gap = -1.0, prev_var = 0.0;
    for (int t : {8, 20, 40}) {
        Tensor x_t = forward_sample(gm.means[0], t, sched, rng).x_t;
        GaussianPosterior post = single_gaussian_posterior(gm, sched, t, x_t);
        CHECK(post.variance > prev_var);
        JensenGap gap = jensen_gap_estimate(m, gm, sched, t, x_t, 4000, rng);
        CHECK(gap.value > prev_gap);
        prev_gap = gap.value;
        prev_var = post.variance;
    }
    CHECK(prev_gap > 0.0);
}

TEST_CASE("jensen gap stays below the reconstruction-error upper bound") {
    AttackedModel m = AttackedModel::build({"mlp-2", 6, 3, true}, 11);
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {Tensor::full({6}, 0.5)};
    gm.variances = {0.08};
    NoiseSchedule sched = make_schedule(40, 0.5);
    Rng rng(17);
    int t = 20;
    Tensor x_t = forward_sample(gm.means[0], t, sched, rng).x_t;
    GaussianPosterior post = single_gaussian_posterior(gm, sched, t, x_t);
    JensenGap gap = jensen_gap_estimate(m, gm, sched, t, x_t, 4000, rng);

    // n / sqrt(2 pi s^2) * |grad_x g|_F * E|x0 - x0_hat| with the norm from
    // finite differences and the folded-Gaussian mean in closed form
    const int64_t n = 6;
    Tensor J = ts::fd_jacobian([&](const Tensor& p) { return m.client_gradient(p).values; }, post.mean, 1e-5);
    double fro = std::sqrt(dot(J, J));
    double expected_dist = std::sqrt(post.variance) * std::sqrt(2.0) *
                           std::exp(std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0));
    double sigma_sq = 0.01;
    double bound = static_cast<double>(n) / std::sqrt(2.0 * M_PI * sigma_sq) * fro * expected_dist;
    CHECK(gap.value <= bound);
}

TEST_CASE("monotonicity checker on synthetic traces") {
    AttackTrace decreasing;
    for (int i = 0; i < 10; ++i) decreasing.records.push_back({10 - i, 1.0 - 0.05 * i, 0.0, 0.0, false});
    TheoremReport r1 = check_monotonicity(decreasing, 1e-9);
    CHECK(r1.stats[0].second == 1.0);
    CHECK(r1.pass);

    AttackTrace constant;
    for (int i = 0; i < 10; ++i) constant.records.push_back({10 - i, 0.7, 0.0, 0.0, false});
    TheoremReport r2 = check_monotonicity(constant, 1e-9);
    CHECK(r2.stats[0].second == 1.0);

    AttackTrace noisy = decreasing;
    noisy.records[4].attack_loss = 2.0;  // one increase at the step into index 4
    TheoremReport r3 = check_monotonicity(noisy, 1e-9);
    CHECK(r3.stats[0].second == doctest::Approx(8.0 / 9.0));

    AttackTrace empty;
    CHECK_THROWS_AS(check_monotonicity(empty, 1e-9), ShapeError);
}

TEST_CASE("convergence rate report orders noise levels") {
    auto trace_with_drop = [](double drop) {
        AttackTrace t;
        for (int i = 0; i <= 10; ++i) t.records.push_back({10 - i, 5.0 - drop * i, 0.0, 0.0, false});
        return t;
    };
    std::vector<std::pair<double, std::vector<AttackTrace>>> good{
        {1e-4, {trace_with_drop(0.4), trace_with_drop(0.42), trace_with_drop(0.38)}},
        {1e-2, {trace_with_drop(0.2), trace_with_drop(0.22), trace_with_drop(0.18)}},
    };
    CHECK(convergence_rate_report(good).pass);

    std::vector<std::pair<double, std::vector<AttackTrace>>> equal{
        {1e-4, {trace_with_drop(0.3), trace_with_drop(0.3), trace_with_drop(0.3)}},
        {1e-2, {trace_with_drop(0.3), trace_with_drop(0.3), trace_with_drop(0.3)}},
    };
    CHECK(convergence_rate_report(equal).pass);  // non-strict

    std::vector<std::pair<double, std::vector<AttackTrace>>> inverted{
        {1e-4, {trace_with_drop(0.1), trace_with_drop(0.1), trace_with_drop(0.1)}},
        {1e-2, {trace_with_drop(0.3), trace_with_drop(0.3), trace_with_drop(0.3)}},
    };
    CHECK_FALSE(convergence_rate_report(inverted).pass);

    std::vector<std::pair<double, std::vector<AttackTrace>>> single{{1e-4, {trace_with_drop(0.1)}}};
    CHECK_THROWS_AS(convergence_rate_report(single), ShapeError);
}

TEST_CASE("jacobian spectrum of a constant-jacobian model matches the hand-computed gram matrix") {
    // zero weights: J has rows r_i delta_jk over the weight block and zero
    // bias rows, so J'J = |r|^2 I
    AttackedModel m = AttackedModel::build({"linear-1", 5, 3, true}, 7, ClientLoss::kHalfSquaredError, 1);
    m.mutable_params()[0] = Tensor::zeros({3, 5});
    Tensor r = sub(m.params()[1], onehot(1, 3));
    double expected = dot(r, r);
    Rng rng(3);
    SpectrumResult s = jacobian_spectrum(m, rng.gaussian_tensor({5}), 1);
    CHECK(std::fabs(s.lambda_min - expected) < 1e-8);
    CHECK(std::fabs(s.lambda_max - expected) < 1e-8);
}

TEST_CASE("duplicate-column construction is rank deficient") {
    AttackedModel m = AttackedModel::build({"linear-1", 4, 3, true}, 9, ClientLoss::kHalfSquaredError, 0);
    Tensor W({3, 4});
    Rng rng(5);
    for (int64_t i = 0; i < 3; ++i) {
        double v = rng.gaussian();
        W.at(i, 0) = v;
        W.at(i, 1) = v;  // two identical columns
        W.at(i, 2) = rng.gaussian();
        W.at(i, 3) = rng.gaussian();
    }
    m.mutable_params()[0] = W;
    Tensor x({4}, {0.3, -0.2, 0.7, 0.1});
    // pin the residual to zero so the x-dependent delta term drops out
    std::vector<ad::Value> leaves = m.param_leaves();
    m.set_hse_target(m.forward(ad::leaf(x), leaves).tensor());
    SpectrumResult s = jacobian_spectrum(m, x, 0);
    CHECK(std::fabs(s.lambda_min) < 1e-10);
    CHECK(s.lambda_max >= s.lambda_min);
}

TEST_CASE("jacobian spectrum agrees with a power-iteration oracle") {
    AttackedModel m = AttackedModel::build({"mlp-2", 8, 3, true}, 21);
    Rng rng(11);
    Tensor x = rng.gaussian_tensor({8});
    SpectrumResult s = jacobian_spectrum(m, x, m.label());
    CHECK(s.lambda_max >= s.lambda_min);

    // independent route: finite-difference Jacobian, then power iteration
    Tensor Jrows = ts::fd_jacobian([&](const Tensor& p) { return m.client_gradient(p).values; }, x, 1e-6);
    int64_t n = 8, P = m.param_count();
    auto gram_mul = [&](const Tensor& v) {
        Tensor out({n});
        for (int64_t p = 0; p < P; ++p) {
            double dot_pv = 0.0;
            for (int64_t i = 0; i < n; ++i) dot_pv += Jrows[i * P + p] * v[i];
            for (int64_t i = 0; i < n; ++i) out[i] += Jrows[i * P + p] * dot_pv;
        }
        return out;
    };
    Tensor v = rng.gaussian_tensor({n});
    double lambda = 0.0;
    for (int it = 0; it < 600; ++it) {
        Tensor w = gram_mul(v);
        lambda = l2_norm(w);
        v = scale(w, 1.0 / lambda);
    }
    CHECK(std::fabs(lambda - s.lambda_max) / s.lambda_max < 1e-6);

    // smallest eigenvalue by deflated power iteration on lambda_max I - G
    Tensor u = rng.gaussian_tensor({n});
    double mu = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Tensor w = scale(u, lambda);
        axpy(w, -1.0, gram_mul(u));
        mu = l2_norm(w);
        u = scale(w, 1.0 / mu);
    }
    double lambda_min_pi = lambda - mu;
    double denom = std::max(s.lambda_max, 1.0);
    CHECK(std::fabs(lambda_min_pi - s.lambda_min) / denom < 1e-6);

    AttackedModel big = AttackedModel::build({"mlp-4", 256, 4, true}, 3);
    Rng rng2(1);
    CHECK_THROWS_AS(jacobian_spectrum(big, rng2.gaussian_tensor({256}), 0), ShapeError);
}

TEST_CASE("spearman correlation on hand cases") {
    CHECK(spearman_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_correlation({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    CHECK(std::fabs(spearman_correlation({1, 2, 3, 4, 5}, {3, 1, 4, 1, 5})) < 1.0);
    CHECK_THROWS_AS(spearman_correlation({1.0}, {2.0}), ShapeError);
}

TEST_CASE("theorem report serialization is key = value text") {
    TheoremReport rep;
    rep.id = "demo";
    rep.pass = true;
    rep.stats = {{"alpha", 0.5}};
    rep.tolerance = 1e-3;
    rep.samples = 42;
    rep.seeds = {1, 2};
    std::string text = theorem_report_text(rep);
    CHECK(text.find("theorem = demo") != std::string::npos);
    CHECK(text.find("pass = true") != std::string::npos);
    CHECK(text.find("alpha = 0.5") != std::string::npos);
    CHECK(text.find("seeds = 1 2") != std::string::npos);
}
