#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "svimo/rng.hpp"
#include "svimo/schedule.hpp"

using namespace svimo;

TEST_CASE("single-step schedule is its own cumulative product") {
    NoiseSchedule s = build_schedule(1, 0.5, 0.5, ScheduleKind::kLinear);
    CHECK(s.alpha_bars.size() == 1);
    CHECK(s.alpha_bars[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("three-step linear schedule matches the hand-computed product") {
    NoiseSchedule s = build_schedule(3, 0.1, 0.3, ScheduleKind::kLinear);
    CHECK(s.betas[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.betas[1] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(s.betas[2] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.alpha_bars[1] == doctest::Approx(0.72).epsilon(1e-12));
    CHECK(s.alpha_bars[2] == doctest::Approx(0.504).epsilon(1e-12));
}

TEST_CASE("default schedule matches a brute-force product loop") {
    NoiseSchedule s = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::kLinear);
    auto brute = oracle::alpha_bars_bruteforce(s.betas);
    for (int64_t t : {0L, 499L, 999L}) {
        double rel = std::fabs(s.alpha_bars[static_cast<size_t>(t)] - brute[static_cast<size_t>(t)]) /
                     brute[static_cast<size_t>(t)];
        CHECK(rel < 1e-10);
    }
    // table invariants
    for (int64_t t = 0; t < s.T; ++t) {
        CHECK(s.betas[static_cast<size_t>(t)] > 0.0);
        CHECK(s.betas[static_cast<size_t>(t)] < 1.0);
        if (t > 0) {
            CHECK(s.betas[static_cast<size_t>(t)] >= s.betas[static_cast<size_t>(t - 1)]);
            CHECK(s.alpha_bars[static_cast<size_t>(t)] < s.alpha_bars[static_cast<size_t>(t - 1)]);
        }
    }
    CHECK(s.alpha_bars[0] == s.alphas[0]);
}

TEST_CASE("cosine schedule keeps the table invariants") {
    NoiseSchedule s = build_schedule(100, 1e-4, 0.999, ScheduleKind::kCosine);
    for (int64_t t = 0; t < s.T; ++t) {
        CHECK(s.betas[static_cast<size_t>(t)] > 0.0);
        CHECK(s.betas[static_cast<size_t>(t)] < 1.0);
        if (t > 0) CHECK(s.betas[static_cast<size_t>(t)] >= s.betas[static_cast<size_t>(t - 1)]);
    }
}

TEST_CASE("schedule construction rejects bad arguments") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2, ScheduleKind::kLinear), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2, ScheduleKind::kLinear), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2, ScheduleKind::kLinear), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 1.0, ScheduleKind::kLinear), ConfigError);
}

TEST_CASE("forward diffusion special cases") {
    NoiseSchedule s = build_schedule(10, 0.05, 0.4, ScheduleKind::kLinear);
    RngStream rng(5, "test");
    Tensor z0 = rng.normal_tensor({3, 4});
    Tensor zero(z0.shape());

    // zero noise: exactly sqrt(abar_t) z0
    for (int64_t t : {0L, 4L, 9L}) {
        Tensor out = forward_diffuse(z0, t, zero, s);
        double a = std::sqrt(s.alpha_bars[static_cast<size_t>(t)]);
        for (int64_t i = 0; i < z0.numel(); ++i) CHECK(out[i] == a * z0[i]);
    }
    // zero signal at abar = 0.25 -> 0.866025 eps
    int64_t t_quarter = -1;
    NoiseSchedule s2 = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::kLinear);
    for (int64_t t = 0; t < s2.T; ++t) {
        if (s2.alpha_bars[static_cast<size_t>(t)] <= 0.25) {
            t_quarter = t;
            break;
        }
    }
    REQUIRE(t_quarter >= 0);
    // nudge the table entry to exactly 0.25 for the arithmetic check
    NoiseSchedule s3 = s2;
    s3.alpha_bars[static_cast<size_t>(t_quarter)] = 0.25;
    Tensor eps = rng.normal_tensor({5});
    Tensor out = forward_diffuse(Tensor::zeros({5}), t_quarter, eps, s3);
    for (int64_t i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(0.8660254037 * eps[i]).epsilon(1e-6));

    CHECK_THROWS_AS(forward_diffuse(z0, 3, Tensor::zeros({2, 2}), s), ShapeError);
    CHECK_THROWS_AS(forward_diffuse(z0, 10, zero, s), ShapeError);
}

TEST_CASE("forward diffusion Monte-Carlo mean and variance sit in the 3-sigma band") {
    NoiseSchedule s = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::kLinear);
    RngStream rng(123, "test-mc");
    const int64_t draws = 10000;
    Tensor z0 = Tensor::full({1}, 0.7);
    for (int64_t t : {1L, 500L, 999L}) {
        double abar = s.alpha_bars[static_cast<size_t>(t)];
        double mean = 0.0, m2 = 0.0;
        for (int64_t i = 0; i < draws; ++i) {
            Tensor eps = rng.normal_tensor({1});
            double v = forward_diffuse(z0, t, eps, s)[0];
            mean += v;
            m2 += v * v;
        }
        mean /= static_cast<double>(draws);
        double var = m2 / static_cast<double>(draws) - mean * mean;
        double want_mean = std::sqrt(abar) * 0.7;
        double want_var = 1.0 - abar;
        double se_mean = std::sqrt(want_var / static_cast<double>(draws));
        double se_var = want_var * std::sqrt(2.0 / static_cast<double>(draws - 1));
        CHECK(std::fabs(mean - want_mean) < 3.0 * se_mean);
        CHECK(std::fabs(var - want_var) < 3.0 * se_var);
    }
}

TEST_CASE("posterior sampling: terminal step, mu oracle, sigma definition") {
    NoiseSchedule s = build_schedule(50, 1e-3, 0.1, ScheduleKind::kLinear);
    RngStream rng(9, "test");
    Tensor z1 = rng.normal_tensor({4});
    Tensor zhat0 = rng.normal_tensor({4});
    Tensor noise = rng.normal_tensor({4});

    // t = 1 collapses to zhat0 exactly, regardless of noise
    Tensor out = posterior_sample(z1, zhat0, 1, s, noise);
    for (int64_t i = 0; i < 4; ++i) CHECK(out[i] == zhat0[i]);
    CHECK(posterior_sigma2(1, 0, s) == 0.0);

    // generic t: independent scalar evaluation of the posterior mean
    for (int64_t t : {2L, 17L, 49L}) {
        double abar_t = s.alpha_bars[static_cast<size_t>(t)];
        double abar_p = s.alpha_bars[static_cast<size_t>(t - 1)];
        double alpha = s.alphas[static_cast<size_t>(t)];
        Tensor zt = rng.normal_tensor({3});
        Tensor x0 = zt;  // zhat0 = z_t case from the spec example
        Tensor got = posterior_sample(zt, x0, t, s, Tensor::zeros({3}));
        for (int64_t i = 0; i < 3; ++i) {
            double mu = std::sqrt(alpha) * (1.0 - abar_p) / (1.0 - abar_t) * zt[i] +
                        std::sqrt(abar_p) * (1.0 - alpha) / (1.0 - abar_t) * zt[i];
            CHECK(got[i] == doctest::Approx(mu).epsilon(1e-10));
        }
        double sigma2 = (1.0 - abar_p) * (1.0 - alpha) / (1.0 - abar_t);
        CHECK(posterior_sigma2(t, t - 1, s) == doctest::Approx(sigma2).epsilon(1e-12));
    }

    CHECK_THROWS_AS(posterior_sample(z1, zhat0, 0, s, noise), ShapeError);
}

TEST_CASE("noiseless chain with true z0 recovers z0") {
    NoiseSchedule s = build_schedule(200, 1e-4, 2e-2, ScheduleKind::kLinear);
    RngStream rng(77, "test");
    Tensor z0 = rng.normal_tensor({6});
    Tensor z = forward_diffuse(z0, s.T - 1, rng.normal_tensor({6}), s);
    Tensor zero = Tensor::zeros({6});
    for (int64_t t = s.T - 1; t >= 1; --t) z = posterior_sample(z, z0, t, s, zero);
    for (int64_t i = 0; i < 6; ++i) CHECK(std::fabs(z[i] - z0[i]) < 1e-6);
}

TEST_CASE("subsample: identity, stride arithmetic, determinism") {
    NoiseSchedule s = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::kLinear);

    SubSchedule full = subsample_schedule(s, 1000);
    REQUIRE(full.step_indices.size() == 1000);
    for (int64_t j = 0; j < 1000; ++j) CHECK(full.step_indices[static_cast<size_t>(j)] == j);

    SubSchedule fifty = subsample_schedule(s, 50);
    REQUIRE(fifty.step_indices.size() == 50);
    CHECK(fifty.step_indices.back() == 999);
    int64_t min_gap = 1 << 30, max_gap = 0;
    for (size_t j = 1; j < fifty.step_indices.size(); ++j) {
        int64_t gap = fifty.step_indices[j] - fifty.step_indices[j - 1];
        min_gap = std::min(min_gap, gap);
        max_gap = std::max(max_gap, gap);
    }
    CHECK(max_gap - min_gap <= 1);
    // effective abar values come straight from the parent table
    for (size_t j = 0; j < fifty.step_indices.size(); ++j) {
        CHECK(s.alpha_bars[static_cast<size_t>(fifty.step_indices[j])] ==
              fifty.parent->alpha_bars[static_cast<size_t>(fifty.step_indices[j])]);
    }

    NoiseSchedule s10 = build_schedule(10, 1e-3, 1e-2, ScheduleKind::kLinear);
    SubSchedule two_a = subsample_schedule(s10, 2);
    SubSchedule two_b = subsample_schedule(s10, 2);
    REQUIRE(two_a.step_indices.size() == 2);
    CHECK(two_a.step_indices == two_b.step_indices);
    CHECK(two_a.step_indices.back() == 9);

    CHECK_THROWS_AS(subsample_schedule(s10, 11), ConfigError);
    CHECK_THROWS_AS(subsample_schedule(s10, 0), ConfigError);
}

TEST_CASE("full-schedule trajectories are bit-identical through the subsample path") {
    NoiseSchedule s = build_schedule(40, 1e-3, 5e-2, ScheduleKind::kLinear);
    SubSchedule full = subsample_schedule(s, 40);
    RngStream rng(31, "test");
    Tensor z0 = rng.normal_tensor({5});

    Tensor za = rng.normal_tensor({5});
    Tensor zb = za;
    RngStream noise_a(99, "noise");
    RngStream noise_b(99, "noise");
    for (int64_t t = s.T - 1; t >= 1; --t) {
        za = posterior_sample(za, z0, t, s, noise_a.normal_tensor({5}));
    }
    for (size_t j = full.step_indices.size() - 1; j >= 1; --j) {
        zb = posterior_sample_pair(zb, z0, full.step_indices[j], full.step_indices[j - 1], s,
                                   noise_b.normal_tensor({5}));
    }
    for (int64_t i = 0; i < 5; ++i) CHECK(za[i] == zb[i]);
}

TEST_CASE("strided transitions use the effective alpha ratio") {
    NoiseSchedule s = build_schedule(10, 1e-3, 1e-2, ScheduleKind::kLinear);
    int64_t hi = 9, lo = 4;
    double abar_hi = s.alpha_bars[static_cast<size_t>(hi)];
    double abar_lo = s.alpha_bars[static_cast<size_t>(lo)];
    double alpha_eff = abar_hi / abar_lo;
    double want = (1.0 - abar_lo) * (1.0 - alpha_eff) / (1.0 - abar_hi);
    CHECK(posterior_sigma2(hi, lo, s) == doctest::Approx(want).epsilon(1e-14));
}
