#include "sflr/model_selection.hpp"

#include "sflr/simulation.hpp"

#include <doctest.h>

#include <algorithm>

using namespace sflr;

TEST_SUITE_BEGIN("model_selection");

namespace {

SparseFTS curved_surface_data(int T, std::uint64_t seed) {
    // Latent curves with a strongly curved covariance: y_tj = a_t f(x) with
    // f nonlinear, plus noise.
    Rng rng(seed);
    SparseFTS data;
    data.obs.resize(static_cast<std::size_t>(T));
    for (auto& curve : data.obs) {
        const double a = rng.normal();
        const int n = 3 + rng.uniform_int(3);
        for (int j = 0; j < n; ++j) {
            const double x = rng.uniform();
            const double f = std::sin(2.0 * 3.14159265358979323846 * x);
            curve.push_back({x, a * f + 0.1 * rng.normal()});
        }
    }
    return data;
}

}  // namespace

TEST_CASE("single candidates are returned unchanged") {
    const SpatialGrid grid(21);
    const SparseFTS data = curved_surface_data(60, 1);
    CVPlan plan = CVPlan::defaults();
    plan.bandwidth_grid = {0.33};
    const BandwidthChoice bw = cv_bandwidths(data, grid, plan);
    CHECK(bw.B_R == doctest::Approx(0.33));
    CHECK(bw.B_V == doctest::Approx(0.33));

    ScalarTS z;
    z.z.assign(60, 0.0);
    Rng rng(2);
    for (auto& v : z.z) v = rng.normal();
    CHECK(cv_cross_bandwidth(data, z, grid, plan) == doctest::Approx(0.33));
}

TEST_CASE("oversmoothing loses to the selected bandwidth on curved data") {
    const SpatialGrid grid(21);
    const SparseFTS data = curved_surface_data(80, 3);
    CVPlan plan = CVPlan::defaults();
    plan.bandwidth_grid = {0.1, 10.0};
    CVTrace trace;
    const BandwidthChoice bw = cv_bandwidths(data, grid, plan, &trace);
    CHECK(bw.B_R == doctest::Approx(0.1));
    double score_small = 0, score_global = 0;
    for (const auto& row : trace)
        if (row.what == "B_R") (row.candidate < 1.0 ? score_small : score_global) = row.score;
    CHECK(score_global > score_small);
}

TEST_CASE("fold assignment is deterministic given the seed") {
    const SpatialGrid grid(21);
    const SparseFTS data = curved_surface_data(60, 5);
    CVPlan plan = CVPlan::defaults();
    plan.bandwidth_grid = {0.1, 0.2, 0.4};
    CVTrace t1, t2;
    const BandwidthChoice a = cv_bandwidths(data, grid, plan, &t1);
    const BandwidthChoice b = cv_bandwidths(data, grid, plan, &t2);
    CHECK(a.B_R == b.B_R);
    CHECK(a.B_V == b.B_V);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].score == t2[i].score);
}

TEST_CASE("holdout selection: singleton grid and argmin property") {
    const SpatialGrid grid(21);
    const FrequencyGrid fgrid(64);
    SimConfig cfg;
    cfg.T = 80;
    cfg.N_max = 8;
    cfg.seed = 11;
    cfg.scheme = Scheme::reg1;
    cfg.shape = Shape::B;
    const SimulatedDataset d = simulate_dataset(cfg, grid);

    HoldoutInputs inputs{d.x, d.z, grid, fgrid, 4, 0.25, 0.15, 0.15, 4, 8};
    const HoldoutState state = prepare_holdout(inputs);

    CVPlan plan = CVPlan::defaults();
    SUBCASE("single candidate comes straight back") {
        plan.reg_fractions = {0.05};
        const double got =
            holdout_regularization(state, Regularization::tikhonov, grid, fgrid, plan);
        CHECK(got == doctest::Approx(0.05 * state.eig.sup_lambda1()).epsilon(1e-12));
    }

    SUBCASE("the selection scores no worse than the grid endpoints") {
        CVTrace trace;
        const double got =
            holdout_regularization(state, Regularization::tikhonov, grid, fgrid, plan, &trace);
        double selected_score = 0, lo_score = 0, hi_score = 0;
        double lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (const auto& row : trace) {
            if (row.candidate < lo) {
                lo = row.candidate;
                lo_score = row.score;
            }
            if (row.candidate > hi) {
                hi = row.candidate;
                hi_score = row.score;
            }
            if (row.candidate == got) selected_score = row.score;
        }
        CHECK(selected_score <= lo_score);
        CHECK(selected_score <= hi_score);
    }
}

TEST_CASE("pure-noise responses prefer maximal shrinkage") {
    const SpatialGrid grid(21);
    const FrequencyGrid fgrid(64);
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig cfg;
        cfg.T = 80;
        cfg.N_max = 8;
        cfg.seed = seed;
        const SimulatedDataset d = simulate_dataset(cfg, grid);
        ScalarTS noise;
        noise.z.resize(d.z.z.size());
        Rng rng(derive_seed(seed, 99));
        for (auto& v : noise.z) v = rng.normal();

        HoldoutInputs inputs{d.x, noise, grid, fgrid, 4, 0.25, 0.15, 0.15, 4, 6};
        const HoldoutState state = prepare_holdout(inputs);
        CVPlan plan = CVPlan::defaults();
        plan.reg_fractions = {1e-4, 1e-3, 1e-2, 0.1, 0.5};
        const double got =
            holdout_regularization(state, Regularization::tikhonov, grid, fgrid, plan);
        if (got == doctest::Approx(0.5 * state.eig.sup_lambda1()).epsilon(1e-9)) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("degenerate candidate grids raise") {
    const SpatialGrid grid(21);
    CVPlan plan = CVPlan::defaults();
    plan.bandwidth_grid.clear();
    SparseFTS data = curved_surface_data(60, 8);
    CHECK_THROWS_AS(cv_bandwidths(data, grid, plan), ConfigError);
}

TEST_SUITE_END();
