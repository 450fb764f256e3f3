#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "latree/errors.hpp"
#include "latree/noisy_recovery.hpp"

using namespace latree;
using fixtures::R;

namespace {

// Bag members with representatives collapsed to a tag, for comparing runs whose latent ids differ.
std::vector<std::set<std::uint32_t>> shape(const std::vector<Bag>& bags) {
    std::vector<std::set<std::uint32_t>> out;
    for (const auto& b : bags) {
        std::set<std::uint32_t> s;
        for (auto v : b.members) s.insert(v.is_regular() ? v.value() : 0u);
        out.push_back(s);
    }
    return out;
}

// rho = 1, alpha = 2, members 3..5 with D values 0, gap, 2 * gap.
DistanceMatrix chain_matrix(double gap) {
    const std::vector<std::uint32_t> labels{1, 2, 3, 4, 5};
    std::vector<double> v(25, 5.0);
    for (int i = 0; i < 5; ++i) v[i * 5 + i] = 0.0;
    auto set = [&](int a, int b, double x) { v[(a - 1) * 5 + (b - 1)] = v[(b - 1) * 5 + (a - 1)] = x; };
    set(1, 2, 10.0);
    set(2, 4, 5.0 + gap);
    set(2, 5, 5.0 + 2 * gap);
    return DistanceMatrix(labels, v);
}

} // namespace

TEST(PerturbationBound, Examples) {
    const std::vector<double> four{1, 1, -1, -1};
    EXPECT_DOUBLE_EQ(perturbation_bound(four, 0.1), 0.4);
    const std::vector<double> halves{0.5, 0.5, -0.5};
    EXPECT_DOUBLE_EQ(perturbation_bound(halves, 0.1), 0.15000000000000002);
    EXPECT_DOUBLE_EQ(latent_error_bound(1, 0.1), 0.15000000000000002);
    EXPECT_DOUBLE_EQ(latent_error_bound(4, 0.2), 0.6000000000000001);
}

TEST(TheoremEpsilon, Values) {
    EXPECT_NEAR(theorem_epsilon(1.0, 9, 3), 1.0 / 12.0, 1e-15);
    EXPECT_DOUBLE_EQ(theorem_epsilon(2.0, 1, 4), 0.5);
    EXPECT_EQ(default_round_budget(81, 3), 8);
    EXPECT_EQ(default_round_budget(1000, 10), 6);
    EXPECT_EQ(default_round_budget(2, 3), 2);
}

TEST(BasicNoisy, ZeroNoiseMatchesExact) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = random_tree({.n = 25, .max_degree = 3, .latent_fraction = 0.5, .seed = seed});
        ExactOracle a(t), b(t);
        std::vector<NodeId> members;
        for (auto l : t.regular_labels()) members.push_back(R(l));
        const Bag bag = make_bag(members, R(1));
        const auto x = basic(bag, R(2), a);
        const auto y = basic_noisy(bag, R(2), 0.0, b);
        ASSERT_EQ(x.bags.size(), y.bags.size());
        for (std::size_t i = 0; i < x.bags.size(); ++i) EXPECT_EQ(x.bags[i].members, y.bags[i].members);
        ASSERT_EQ(x.edges.size(), y.edges.size());
        for (std::size_t i = 0; i < x.edges.size(); ++i) EXPECT_EQ(x.edges[i].length, y.edges[i].length);
    }
}

namespace {

void expect_quartet_matches_noiseless(double eps) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ExactOracle clean(fixtures::quartet());
        auto noisy = noisy_oracle(exact_oracle(fixtures::quartet()), eps, NoiseMode::adversarial_max, seed);
        const Bag bag = make_bag({R(1), R(2), R(3), R(4)}, R(1));
        const auto want = basic(bag, R(3), clean);
        const auto got = basic_noisy(bag, R(3), eps, *noisy);
        EXPECT_EQ(shape(got.bags), shape(want.bags)) << "seed " << seed;
        ASSERT_EQ(got.edges.size(), want.edges.size());
        for (std::size_t i = 0; i < got.edges.size(); ++i)
            EXPECT_LE(std::abs(got.edges[i].length - want.edges[i].length), 4 * eps);
    }
}

} // namespace

// ell = 3.5 (closest regular pair), epsilon = ell / 5. The shortest edges are 1
// and 2, so the true grouping gap (4) and on-path slack (2) sit inside the
// widened thresholds and some sign patterns flip a decision.
TEST(BasicNoisy, QuartetAdversarialAtFifthOfClosestPair) { expect_quartet_matches_noiseless(0.7); }

// A fifth of the shortest edge keeps every decision stable.
TEST(BasicNoisy, QuartetAdversarialAtFifthOfShortestEdge) { expect_quartet_matches_noiseless(0.2); }

TEST(BasicNoisy, SingleLinkageChains) {
    const double eps = 0.1;
    MatrixOracle chained(chain_matrix(3.9 * eps));
    const auto res = basic_noisy(make_bag({R(1), R(2), R(3), R(4), R(5)}, R(1)), R(2), eps, chained);
    ASSERT_EQ(res.bags.size(), 3u);
    EXPECT_EQ(shape({res.bags[1]}).front(), (std::set<std::uint32_t>{3, 4, 5}));

    MatrixOracle split(chain_matrix(4.1 * eps));
    EXPECT_EQ(basic_noisy(make_bag({R(1), R(2), R(3), R(4), R(5)}, R(1)), R(2), eps, split).bags.size(), 5u);
}

TEST(BasicNoisy, WideGroupIsDiagnosed) {
    const double eps = 0.1;
    MatrixOracle chained(chain_matrix(3.9 * eps));
    const Bag bag = make_bag({R(1), R(2), R(3), R(4), R(5)}, R(1));
    EXPECT_THROW(basic_noisy(bag, R(2), eps, chained, 0.1), NoiseTooLarge);
    MatrixOracle again(chain_matrix(3.9 * eps));
    EXPECT_NO_THROW(basic_noisy(bag, R(2), eps, again, 1.0));
}

TEST(ExplodeNoisy, StarUnderNoise) {
    std::vector<NodeId> nodes{R(1)};
    std::vector<Edge> edges;
    for (std::uint32_t i = 2; i <= 4; ++i) {
        nodes.push_back(R(i));
        edges.push_back({R(1), R(i), 1.0});
    }
    const SemiLabeledTree star(nodes, edges);
    const Bag bag = make_bag({R(1), R(2), R(3), R(4)}, R(1));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto noisy = noisy_oracle(exact_oracle(star), 0.2, NoiseMode::adversarial_max, seed);
        const auto parts = explode_noisy(bag, 0.2, *noisy);
        EXPECT_EQ(parts.size(), 3u);
    }
    ExactOracle a(star), b(star);
    EXPECT_EQ(shape(explode_noisy(bag, 0.0, a)), shape(explode(bag, b)));
}

TEST(RecoverNoisy, ZeroNoiseMatchesExact) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto t = random_tree({.n = 80, .max_degree = 4, .latent_fraction = 0.5, .seed = seed});
        ExactOracle a(t), b(t);
        const auto x = recover(a, 4, {.seed = seed});
        const auto y = recover_noisy(b, {.epsilon = 0.0, .ell = 1.0, .delta = 4}, {.seed = seed});
        EXPECT_TRUE(trees_isomorphic(x.tree, y.tree, 0.0));
        EXPECT_EQ(x.stats.query_count, y.stats.query_count);
    }
}

TEST(RecoverNoisy, TheoremEpsilonRecoversTopologyAndBoundsLatentError) {
    const double inf = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int delta = 3 + static_cast<int>(seed % 3);
        const auto t = random_tree({.n = 120, .max_degree = static_cast<std::uint32_t>(delta), .latent_fraction = 0.5, .seed = seed});
        const double ell = full_metric(t).min_off_diagonal();
        const double eps = theorem_epsilon(ell, 120, delta);
        ExactOracle clean(t);
        const auto reference = recover(clean, delta, {.seed = seed});
        auto noisy = noisy_oracle(exact_oracle(t), eps, NoiseMode::adversarial_max, seed + 100);
        const auto res = recover_noisy(*noisy, {.epsilon = eps, .ell = ell, .delta = delta}, {.seed = seed});
        ASSERT_TRUE(trees_isomorphic(res.tree, t, inf)) << "seed " << seed;
        EXPECT_TRUE(trees_isomorphic(res.tree, reference.tree, inf));

        const auto worst = latent_error_by_depth(*noisy, clean);
        for (std::size_t depth = 1; depth < worst.size(); ++depth)
            EXPECT_LE(worst[depth], latent_error_bound(static_cast<int>(depth), eps) * (1 + 1e-9)) << "depth " << depth;
    }
}

TEST(RecoverNoisy, RoundBudget) {
    const auto t = random_tree({.n = 200, .max_degree = 3, .latent_fraction = 0.5, .seed = 2});
    ExactOracle o(t);
    EXPECT_THROW(recover_noisy(o, {.epsilon = 0.0, .ell = 1.0, .delta = 3, .round_budget = 1}), RoundBudgetExceeded);
    ExactOracle p(t);
    EXPECT_NO_THROW(recover_noisy(p, {.epsilon = 0.0, .ell = 1.0, .delta = 3}));
}

TEST(LatentErrorByDepth, MismatchedRunsRejected) {
    ExactOracle a(fixtures::quartet()), b(fixtures::quartet());
    a.store(a.make_latent(1), R(1), 1.0);
    EXPECT_THROW(latent_error_by_depth(a, b), InvalidArgument);
}
