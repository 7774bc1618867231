#include <doctest.h>

#include <cmath>

#include "gradinv/dataset.hpp"
#include "gradinv/diffusion.hpp"
#include "support/finite_diff.hpp"

using namespace gradinv;
namespace ts = testsupport;
using ad::Value;

TEST_CASE("schedule invariants across T and eta") {
    for (int T : {10, 20, 50, 377, 1000}) {
        for (double eta : {0.0, 0.3, 1.0}) {
            CAPTURE(T);
            CAPTURE(eta);
            NoiseSchedule s = make_schedule(T, eta);
            CHECK(s.alpha[0] == 1.0);
            for (int t = 1; t <= T; ++t) {
                CHECK(s.alpha[t] < s.alpha[t - 1]);
                CHECK(s.alpha[t] > 0.0);
                CHECK(s.sigma[t] >= 0.0);
                CHECK(1.0 - s.alpha[t - 1] - s.sigma[t] * s.sigma[t] >= -1e-15);
                if (eta == 0.0) CHECK(s.sigma[t] == 0.0);
            }
            CHECK(s.alpha[T] < 0.05);
            if (eta > 0.0) {
                bool any_positive = false;
                for (int t = 1; t <= T; ++t) any_positive = any_positive || s.sigma[t] > 0.0;
                CHECK(any_positive);
            }
        }
    }
    CHECK_THROWS_AS(make_schedule(5, 0.5), ShapeError);
    CHECK_THROWS_AS(make_schedule(2000, 0.5), ShapeError);
    CHECK_THROWS_AS(make_schedule(50, 1.5), ShapeError);
}

TEST_CASE("schedule alpha_T equals the direct product at T = 1000") {
    NoiseSchedule s = make_schedule(1000, 0.0);
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        double beta = 1e-4 + (t - 1) / 999.0 * (0.02 - 1e-4);
        prod *= 1.0 - beta;
    }
    CHECK(s.alpha[1000] == doctest::Approx(prod).epsilon(1e-12));
    CHECK(prod < 0.05);
}

TEST_CASE("forward_sample closed-form structure") {
    NoiseSchedule s = make_schedule(50, 0.5);
    Rng rng(4);
    Tensor x0 = rng.gaussian_tensor({6});

    // x_t - sqrt(alpha) x0 = sqrt(1 - alpha) eps, exactly
    Rng r1(9);
    ForwardSample fs = forward_sample(x0, 20, s, r1);
    double a = s.alpha[20];
    Tensor lhs = sub(fs.x_t, scale(x0, std::sqrt(a)));
    CHECK(max_abs_diff(lhs, scale(fs.eps, std::sqrt(1.0 - a))) < 1e-15);

    // zero signal: x_t = sqrt(1 - alpha) eps
    Rng r2(9);
    ForwardSample fz = forward_sample(Tensor::zeros({6}), 20, s, r2);
    CHECK(max_abs_diff(fz.x_t, scale(fz.eps, std::sqrt(1.0 - a))) < 1e-15);

    // hypothetical alpha_t = 1 keeps x_t = x0
    NoiseSchedule degenerate = s;
    degenerate.alpha[20] = 1.0;
    Rng r3(9);
    ForwardSample fd = forward_sample(x0, 20, degenerate, r3);
    CHECK(max_abs_diff(fd.x_t, x0) == 0.0);

    CHECK_THROWS_AS(forward_sample(x0, 0, s, rng), ShapeError);
    CHECK_THROWS_AS(forward_sample(x0, 51, s, rng), ShapeError);
}

TEST_CASE("forward_sample moments match the marginal") {
    NoiseSchedule s = make_schedule(40, 0.0);
    Tensor x0({3}, {0.8, -0.4, 0.1});
    int t = 25;
    double a = s.alpha[t];
    Rng rng(11);
    const int64_t n_draws = 100000;
    Tensor mean_acc({3}), var_acc({3});
    for (int64_t i = 0; i < n_draws; ++i) {
        ForwardSample fs = forward_sample(x0, t, s, rng);
        axpy(mean_acc, 1.0, fs.x_t);
        for (int64_t j = 0; j < 3; ++j) var_acc[j] += fs.x_t[j] * fs.x_t[j];
    }
    double inv = 1.0 / static_cast<double>(n_draws);
    for (int64_t j = 0; j < 3; ++j) {
        double mean = mean_acc[j] * inv;
        double var = var_acc[j] * inv - mean * mean;
        double target_mean = std::sqrt(a) * x0[j];
        double target_var = 1.0 - a;
        double se_mean = std::sqrt(target_var * inv);
        double se_var = target_var * std::sqrt(2.0 * inv);
        CHECK(std::fabs(mean - target_mean) < 3.0 * se_mean);
        CHECK(std::fabs(var - target_var) < 3.0 * se_var);
    }
}

namespace {
GaussianMixture single(double mean_fill, double v, int64_t n) {
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {Tensor::full({n}, mean_fill)};
    gm.variances = {v};
    return gm;
}
}  // namespace

TEST_CASE("oracle score matches finite differences of the closed-form log density") {
    NoiseSchedule s = make_schedule(60, 0.5);
    GaussianMixture gm;
    gm.weights = {0.3, 0.45, 0.25};
    Rng rng(21);
    gm.means = {rng.gaussian_tensor({5}), rng.gaussian_tensor({5}), rng.gaussian_tensor({5})};
    gm.variances = {0.2, 0.05, 0.8};
    auto den = oracle_denoiser(gm, s);

    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        int t = 1 + static_cast<int>(rng.next_u64() % 60);
        double a = s.alpha[t];
        Tensor x = rng.gaussian_tensor({5});
        Tensor fd_score =
            ts::fd_gradient([&](const Tensor& p) { return mixture_log_density(gm, a, p); }, x, 1e-6);
        Tensor eps = den->predict_tensor(x, t);
        Tensor eps_expected = scale(fd_score, -std::sqrt(1.0 - a));
        worst = std::max(worst, ts::max_rel_err(eps, eps_expected));
        // graph path agrees with the tensor path
        Tensor eps_graph = den->predict(ad::leaf(x), t).tensor();
        CHECK(max_abs_diff(eps, eps_graph) < 1e-12);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("oracle score is zero along the symmetry axis of a balanced two-component mixture") {
    NoiseSchedule s = make_schedule(50, 0.0);
    GaussianMixture gm;
    gm.weights = {0.5, 0.5};
    gm.means = {Tensor({2}, {1.0, 0.0}), Tensor({2}, {-1.0, 0.0})};
    gm.variances = {0.3, 0.3};
    auto den = oracle_denoiser(gm, s);
    // x on the mid-plane (first coordinate zero) has no pull along axis 0
    Tensor x({2}, {0.0, 0.7});
    Tensor eps = den->predict_tensor(x, 25);
    CHECK(std::fabs(eps[0]) < 1e-14);
    CHECK(std::fabs(eps[1]) > 1e-6);
}

TEST_CASE("point-mass oracle inverts the forward process") {
    NoiseSchedule s = make_schedule(50, 0.5);
    Tensor m({4}, {0.3, -0.2, 0.8, 0.0});
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {m};
    gm.variances = {1e-12};
    auto den = oracle_denoiser(gm, s);
    Rng rng(31);
    for (int t : {5, 25, 50}) {
        double a = s.alpha[t];
        Tensor x = rng.gaussian_tensor({4});
        Tensor eps = den->predict_tensor(x, t);
        Tensor expected = scale(sub(x, scale(m, std::sqrt(a))), 1.0 / std::sqrt(1.0 - a));
        CHECK(max_abs_diff(eps, expected) < 1e-9);
        // posterior mean with the inversion coefficient recovers m exactly
        Tensor x0 = posterior_mean_tensor(x, t, s, *den);
        CHECK(max_abs_diff(x0, m) < 1e-9);
    }
}

TEST_CASE("posterior mean modes differ by the stated coefficient") {
    NoiseSchedule s = make_schedule(50, 0.5);
    GaussianMixture gm = single(0.4, 0.2, 4);
    auto den = oracle_denoiser(gm, s);
    Rng rng(33);
    Tensor x = rng.gaussian_tensor({4});
    int t = 30;
    double a = s.alpha[t];
    Tensor eps = den->predict_tensor(x, t);
    Tensor inv = posterior_mean_tensor(x, t, s, *den, PosteriorMeanMode::kInversion);
    Tensor lit = posterior_mean_tensor(x, t, s, *den, PosteriorMeanMode::kLinearCoef);
    Tensor expected_inv = scale(sub(x, scale(eps, std::sqrt(1.0 - a))), 1.0 / std::sqrt(a));
    Tensor expected_lit = scale(sub(x, scale(eps, 1.0 - a)), 1.0 / std::sqrt(a));
    CHECK(max_abs_diff(inv, expected_inv) < 1e-15);
    CHECK(max_abs_diff(lit, expected_lit) < 1e-15);
}

TEST_CASE("posterior mean approaches identity as alpha approaches 1") {
    NoiseSchedule s = make_schedule(50, 0.0);
    s.alpha[1] = 1.0 - 1e-12;
    GaussianMixture gm = single(0.2, 0.3, 4);
    auto den = oracle_denoiser(gm, s);
    Tensor x({4}, {0.5, -0.1, 0.2, 0.9});
    Tensor x0 = posterior_mean_tensor(x, 1, s, *den);
    CHECK(max_abs_diff(x0, x) < 1e-5);
}

TEST_CASE("posterior mean is differentiable") {
    NoiseSchedule s = make_schedule(50, 0.5);
    GaussianMixture gm;
    gm.weights = {0.6, 0.4};
    Rng rng(35);
    gm.means = {rng.gaussian_tensor({4}), rng.gaussian_tensor({4})};
    gm.variances = {0.3, 0.1};
    auto den = oracle_denoiser(gm, s);
    int t = 20;
    Tensor p = rng.gaussian_tensor({4});
    auto scalar_fn = [&](const Tensor& q) {
        double acc = 0.0;
        Tensor x0 = posterior_mean_tensor(q, t, s, *den);
        for (int64_t i = 0; i < x0.numel(); ++i) acc += x0[i];
        return acc;
    };
    Tensor fd = ts::fd_gradient(scalar_fn, p, 1e-6);
    Value x_leaf = ad::leaf(p);
    Value x0 = posterior_mean(x_leaf, t, s, *den);
    Tensor grad = ad::backward(ad::sum(x0), {x_leaf}, false)[0].tensor();
    CHECK(ts::max_rel_err(grad, fd) < 1e-5);
}

TEST_CASE("ddim_step determinism and eta = 0 behavior") {
    NoiseSchedule s0 = make_schedule(40, 0.0);
    GaussianMixture gm = single(0.3, 0.25, 4);
    auto den = oracle_denoiser(gm, s0);
    Rng rng(41);
    Tensor x = rng.gaussian_tensor({4});
    Rng step_rng(1);
    DdimStep st = ddim_step(x, 20, s0, *den, step_rng);
    CHECK(max_abs_diff(st.mu, st.x_prev) == 0.0);  // eta = 0: no noise term

    NoiseSchedule s1 = make_schedule(40, 0.7);
    auto den1 = oracle_denoiser(gm, s1);
    Tensor t1 = ddim_sample(*den1, s1, 77);
    Tensor t2 = ddim_sample(*den1, s1, 77);
    CHECK(max_abs_diff(t1, t2) == 0.0);
    CHECK(t1.numel() == 4);

    NoiseSchedule invalid = s1;
    invalid.sigma[20] = 2.0;  // violates 1 - alpha_{t-1} - sigma^2 >= 0
    Rng r2(5);
    CHECK_THROWS_AS(ddim_step(x, 20, invalid, *den1, r2), NumericError);
}

TEST_CASE("deterministic reverse pass contracts toward the data mean") {
    NoiseSchedule s = make_schedule(80, 0.0);
    GaussianMixture gm = single(0.5, 0.04, 6);
    auto den = oracle_denoiser(gm, s);
    Rng rng(43);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rng.gaussian_tensor({6});
        std::vector<double> dist;
        Rng step_rng(0);
        for (int t = 80; t >= 1; --t) {
            x = ddim_step(x, t, s, *den, step_rng).x_prev;
            dist.push_back(l2_norm(sub(x, gm.means[0])));
        }
        for (size_t i = dist.size() - 20; i + 1 < dist.size(); ++i) {
            CHECK(dist[i + 1] <= dist[i] + 1e-12);
        }
    }
}

TEST_CASE("reverse pass reproduces single-Gaussian population moments") {
    const int T = 120;
    NoiseSchedule s = make_schedule(T, 0.0);
    Tensor m({3}, {0.4, -0.3, 0.15});
    GaussianMixture gm;
    gm.weights = {1.0};
    gm.means = {m};
    gm.variances = {0.2};
    auto den = oracle_denoiser(gm, s);
    const int64_t runs = 3000;
    Tensor mean_acc({3}), var_acc({3});
    for (int64_t i = 0; i < runs; ++i) {
        Tensor x = ddim_sample(*den, s, 1000 + static_cast<uint64_t>(i));
        axpy(mean_acc, 1.0, x);
        for (int64_t j = 0; j < 3; ++j) var_acc[j] += x[j] * x[j];
    }
    double inv = 1.0 / static_cast<double>(runs);
    for (int64_t j = 0; j < 3; ++j) {
        double mean = mean_acc[j] * inv;
        double var = var_acc[j] * inv - mean * mean;
        double se_mean = std::sqrt(0.2 * inv);
        double se_var = 0.2 * std::sqrt(2.0 * inv);
        CHECK(std::fabs(mean - m[j]) < 3.0 * se_mean);
        CHECK(std::fabs(var - 0.2) < 3.0 * se_var);
    }
}

TEST_CASE("train_denoiser descends and is reproducible") {
    Tensor m({4}, {0.6, 0.2, 0.8, 0.4});
    std::vector<Tensor> dataset{m};
    NoiseSchedule s = make_schedule(40, 0.0);
    TrainResult tr = train_denoiser(dataset, s, 2000, 2e-3, 9, 48);
    REQUIRE(static_cast<int>(tr.losses.size()) == 2000);
    CHECK(tr.losses.back() < tr.losses.front());

    TrainResult tr2 = train_denoiser(dataset, s, 2000, 2e-3, 9, 48);
    CHECK(std::fabs(tr2.losses.back() - tr.losses.back()) < 1e-12);
}

TEST_CASE("converged point-mass denoiser recovers the point through the posterior mean") {
    // Point-mass data distribution, batched as replicas so the full-batch
    // gradient is well averaged. Short schedule keeps the per-step noise
    // prediction easy enough for plain gradient descent to fit tightly.
    const int T = 20;
    Tensor m({2}, {0.2, 0.8});
    std::vector<Tensor> dataset(64, m);
    NoiseSchedule s = make_schedule(T, 0.0);
    TrainResult tr = train_denoiser(dataset, s, 45000, 1e-1, 9, 64);
    CHECK(tr.losses.back() < 1e-3);

    Rng rng(51);
    double worst = 0.0;
    for (int t = 1; t <= T / 2; ++t) {
        for (int rep = 0; rep < 3; ++rep) {
            ForwardSample fs = forward_sample(m, t, s, rng);
            Tensor x0 = posterior_mean_tensor(fs.x_t, t, s, *tr.model);
            worst = std::max(worst, max_abs_diff(x0, m));
        }
    }
    CHECK(worst < 0.1);
}

TEST_CASE("train_denoiser reports the diverging epoch") {
    std::vector<Tensor> dataset{Tensor::full({4}, 0.5)};
    NoiseSchedule s = make_schedule(20, 0.0);
    try {
        train_denoiser(dataset, s, 200, 1e9, 3, 32);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.epoch >= 0);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
    CHECK_THROWS_AS(train_denoiser({}, s, 10, 1e-3, 1, 16), ShapeError);
}

TEST_CASE("gaussian mixture validation") {
    GaussianMixture bad;
    bad.weights = {0.5, 0.4};
    bad.means = {Tensor::zeros({2}), Tensor::zeros({2})};
    bad.variances = {0.1, 0.1};
    CHECK_THROWS_AS(bad.validate(), ShapeError);  // weights sum != 1
    bad.weights = {0.5, 0.5};
    bad.variances = {0.1, 0.0};
    CHECK_THROWS_AS(bad.validate(), ShapeError);  // non-positive variance
}

TEST_CASE("shapes dataset is deterministic and in range") {
    auto a = make_shapes_dataset(32, 8, 7);
    auto b = make_shapes_dataset(32, 8, 7);
    REQUIRE(a.size() == 32);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(max_abs_diff(a[i], b[i]) == 0.0);
        for (int64_t j = 0; j < a[i].numel(); ++j) {
            CHECK(a[i][j] >= 0.0);
            CHECK(a[i][j] <= 1.0);
        }
    }
}
