#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "latree/errors.hpp"
#include "latree/harness.hpp"

using namespace latree;

TEST(Config, ParsesKeysCommentsAndLists) {
    std::istringstream in(
        "# sweep\n"
        "n = 64, 128\n"
        "delta=3,5   # two degrees\n"
        "trials=4\nseed=9\n"
        "epsilon_policy=fraction_of_ell\nepsilon=0,0.1\nnoise=uniform\n"
        "\n"
        "delta_slack=1\nthreads=2\noutput=out.csv\n");
    const auto c = parse_config(in);
    EXPECT_EQ(c.n_grid, (std::vector<std::size_t>{64, 128}));
    EXPECT_EQ(c.delta_grid, (std::vector<int>{3, 5}));
    EXPECT_EQ(c.trials, 4);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.epsilon_policy, EpsilonPolicy::fraction_of_ell);
    EXPECT_EQ(c.epsilon_grid, (std::vector<double>{0.0, 0.1}));
    EXPECT_EQ(c.noise_mode, NoiseMode::uniform);
    EXPECT_EQ(c.delta_slack, 1);
    EXPECT_EQ(c.threads, 2);
    EXPECT_EQ(c.output, "out.csv");
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, Errors) {
    std::istringstream unknown("colour=blue\n");
    EXPECT_THROW(parse_config(unknown), ParseError);
    std::istringstream no_eq("n 5\n");
    EXPECT_THROW(parse_config(no_eq), ParseError);
    std::istringstream bad_num("trials=lots\n");
    EXPECT_THROW(parse_config(bad_num), ParseError);
    ExperimentConfig c;
    c.delta_grid = {2};
    EXPECT_THROW(validate(c), InvalidArgument);
    c = {};
    c.n_grid = {1};
    EXPECT_THROW(validate(c), InvalidArgument);
    c = {};
    c.epsilon_policy = EpsilonPolicy::fraction_of_ell;
    EXPECT_THROW(validate(c), InvalidArgument);
}

TEST(Bounds, Arithmetic) {
    EXPECT_NEAR(bound_19(81, 3), 19.0 * 3 * 81 * 4, 1e-9);
    EXPECT_NEAR(compbound(81, 3), 81 * 3 + (3 + 81 * 22) * 8.0, 1e-9);
    EXPECT_EQ(naive_pairs(2000), 1999000u);
    EXPECT_EQ(naive_pairs(2), 1u);
    EXPECT_EQ(trial_seed(6, 3), 5u);
}

TEST(ExactTrial, TwoNodes) {
    ExperimentConfig c;
    const auto r = run_exact_trial(2, 3, 0, c);
    EXPECT_TRUE(r.recovered) << r.error;
    EXPECT_EQ(r.queries, 1u);
}

TEST(ExactTrial, SmallGrid) {
    ExperimentConfig c;
    c.n_grid = {3, 10, 60};
    c.delta_grid = {3, 4};
    c.trials = 3;
    const auto recs = simulate(c);
    ASSERT_EQ(recs.size(), 18u);
    for (const auto& r : recs) {
        EXPECT_TRUE(r.recovered) << r.n << " " << r.delta << ": " << r.error;
        EXPECT_LE(r.queries, r.naive_pairs);
    }
    const auto cells = summarize(recs);
    ASSERT_EQ(cells.size(), 6u);
    for (const auto& cell : cells) EXPECT_DOUBLE_EQ(cell.recovery_rate(), 1.0);
}

TEST(Simulate, ReproducibleAcrossThreadCounts) {
    ExperimentConfig c;
    c.n_grid = {50, 90};
    c.delta_grid = {3, 5};
    c.trials = 4;
    c.seed = 17;
    std::ostringstream a, b;
    write_records_csv(a, simulate(c));
    c.threads = 3;
    write_records_csv(b, simulate(c));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, 2), "n,");
}

TEST(SimulateNoisy, ZeroFractionMatchesExactAndSweepDegrades) {
    ExperimentConfig c;
    c.n_grid = {80};
    c.delta_grid = {3};
    c.trials = 5;
    c.epsilon_policy = EpsilonPolicy::fraction_of_ell;
    c.epsilon_grid = {0.0, 0.5};
    const auto recs = simulate_noisy(c);
    ASSERT_EQ(recs.size(), 10u);
    const auto exact = simulate({.n_grid = {80}, .delta_grid = {3}, .trials = 5});
    int zero = 0, half_recovered = 0;
    for (const auto& r : recs) {
        if (r.epsilon_ratio == 0.0) {
            EXPECT_TRUE(r.recovered) << r.error;
            EXPECT_TRUE(r.within_guarantee);
            EXPECT_EQ(r.queries, exact[r.trial].queries);
            ++zero;
        } else {
            EXPECT_FALSE(r.within_guarantee);
            half_recovered += r.recovered;
        }
    }
    EXPECT_EQ(zero, 5);
    EXPECT_LT(half_recovered, 5);
    std::ostringstream out;
    write_summary_csv(out, summarize(recs));
    EXPECT_NE(out.str().find("recovery_rate"), std::string::npos);
}

TEST(SimulateNoisy, TheoremBoundCell) {
    ExperimentConfig c;
    c.n_grid = {100};
    c.delta_grid = {4};
    c.trials = 5;
    c.epsilon_policy = EpsilonPolicy::theorem_bound;
    for (const auto& r : simulate_noisy(c)) {
        EXPECT_TRUE(r.recovered) << r.error;
        EXPECT_TRUE(r.within_guarantee);
        EXPECT_EQ(r.matches_noiseless, 1);
        EXPECT_GE(r.latent_error_ratio, 0.0);
        EXPECT_LE(r.latent_error_ratio, 1.0 + 1e-9);
    }
}
