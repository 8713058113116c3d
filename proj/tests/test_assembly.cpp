#include <doctest.h>

#include <bit>
#include <cmath>

#include "chemputer/assembly.hpp"

using namespace chemputer;
using namespace chemputer::assembly;

TEST_CASE("flawless fraction after twenty steps at five percent") {
    double s = survival_fraction(0.05, 20);
    CHECK(s == doctest::Approx(0.358486).epsilon(1e-6 / 0.358486));
    CHECK(s < 0.40);
    CHECK(survival_fraction(0.3, 0) == 1.0);
    CHECK_THROWS_AS(survival_fraction(1.0, 3), PreconditionError);
    CHECK_THROWS_AS(survival_fraction(0.1, -1), PreconditionError);
}

TEST_CASE("n_min matches the closed form") {
    for (double phi : {1e6, 1e8}) {
        for (double eps : {0.0, 0.01, 0.05, 0.2}) {
            for (int a : {1, 20, 120}) {
                auto r = n_min(DetectabilitySpec::constant(phi, a, eps));
                double oracle = phi * std::exp(-a * std::log1p(-eps));
                CHECK_FALSE(r.infinite);
                CHECK(std::abs(r.value - oracle) <= 1e-12 * oracle);
            }
        }
    }
}

TEST_CASE("n_min with per-step errors is the product form") {
    DetectabilitySpec spec{1e6, {0.1, 0.2, 0.5}};
    CHECK(spec.assembly_index() == 3);
    CHECK(n_min(spec).value == doctest::Approx(1e6 / (0.9 * 0.8 * 0.5)));
    DetectabilitySpec tiny{1.0, std::vector<double>(2000, 0.5)};
    auto r = n_min(tiny);
    CHECK(r.infinite);
    CHECK(std::isinf(r.value));
    CHECK_THROWS_AS(n_min(DetectabilitySpec{0.0, {0.1}}), PreconditionError);
    CHECK_THROWS_AS(n_min(DetectabilitySpec{1e6, {1.0}}), PreconditionError);
    CHECK_THROWS_AS(n_min(DetectabilitySpec{1e6, {-0.1}}), PreconditionError);
}

TEST_CASE("max_error_for inverts n_min") {
    for (double phi : {1e6, 1e8}) {
        for (double eps : {0.01, 0.05, 0.2}) {
            for (int a : {1, 20, 120}) {
                double n = n_min(DetectabilitySpec::constant(phi, a, eps)).value;
                double back = max_error_for(phi, a, n);
                CHECK(std::abs(back - eps) <= 1e-9 * eps);
            }
        }
    }
    CHECK(max_error_for(1e6, 10, 1e6) == 0.0);
    CHECK_THROWS_AS(max_error_for(1e6, 10, 5e5), NotDetectable);
    CHECK_THROWS_AS(max_error_for(1e6, 0, 1e7), PreconditionError);
}

TEST_CASE("assembly bounds") {
    CHECK(assembly_bounds(2).min == 1);
    CHECK(assembly_bounds(2).max == 1);
    CHECK(assembly_bounds(8).min == 3);
    CHECK(assembly_bounds(8).max == 7);
    CHECK(assembly_bounds(9).min == 4);
    for (std::int64_t b = 2; b <= (1 << 16); ++b) {
        auto r = assembly_bounds(b);
        int oracle = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(b - 1)));
        if (r.min != oracle || r.max != b - 1 || r.min > r.max) {
            FAIL("bounds wrong at B = " << b);
        }
    }
    CHECK_THROWS_AS(assembly_bounds(1), PreconditionError);
}

TEST_CASE("realisability") {
    CHECK(check_realisable(true, 2e6, 1e6).realisable);
    auto both = check_realisable(false, 10, 1e6);
    CHECK_FALSE(both.realisable);
    CHECK(both.failed == std::vector<std::string>{"unstable", "below_detection_threshold"});
    CHECK(check_realisable(true, 1e6, 1e6).realisable);
}

TEST_CASE("Monte Carlo default configuration") {
    MonteCarloConfig cfg;
    cfg.seed = 42;
    auto res = monte_carlo(cfg);
    REQUIRE(res.mean_N.size() == 10);
    CHECK(res.ai_max == 120);
    for (std::size_t r = 0; r < res.mean_N.size(); ++r) {
        REQUIRE(res.mean_N[r].size() == 120);
        CHECK(res.mean_N[r][0] <= cfg.n0);
        for (std::size_t a = 1; a < 120; ++a) CHECK(res.mean_N[r][a] <= res.mean_N[r][a - 1]);
        if (r > 0) {
            for (std::size_t a = 0; a < 120; ++a) CHECK(res.mean_N[r][a] <= res.mean_N[r - 1][a]);
        }
    }
    CHECK(mc_to_csv(res) == mc_to_csv(monte_carlo(cfg)));
    CHECK(mc_to_svg(res) == mc_to_svg(monte_carlo(cfg)));
    cfg.seed = 43;
    CHECK(mc_to_csv(monte_carlo(cfg)) != mc_to_csv(res));
}

TEST_CASE("Monte Carlo without noise follows the analytic law") {
    MonteCarloConfig cfg;
    cfg.n0 = 1e6;
    cfg.eps0 = {0.01, 0.05, 0.2};
    cfg.systematic_sd = 0.0;
    cfg.ai_max = 40;
    cfg.trajectories = 16;
    cfg.seed = 7;
    for (double k : {0.0, 0.02}) {
        cfg.k_growth = k;
        auto res = monte_carlo(cfg);
        for (std::size_t r = 0; r < cfg.eps0.size(); ++r) {
            double n = cfg.n0;
            for (int a = 1; a <= cfg.ai_max; ++a) {
                n *= 1.0 - std::min(1.0, cfg.eps0[r] * std::exp(k * (a - 1)));
                CHECK(std::abs(res.mean_N[r][a - 1] - n) <= 1e-12 * n);
            }
        }
    }
    CHECK(baseline_error(0.05, 0.0, 50) == 0.05);
    CHECK(baseline_error(0.05, 0.02, 11) == doctest::Approx(0.05 * std::exp(0.2)));
}

TEST_CASE("Monte Carlo configuration checks") {
    MonteCarloConfig cfg;
    cfg.trajectories = 0;
    CHECK_THROWS_AS(monte_carlo(cfg), PreconditionError);
    cfg = {};
    cfg.eps0 = {};
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
    cfg = {};
    cfg.eps0 = {1.0};
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
    cfg = {};
    cfg.systematic_sd = -1;
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
}
