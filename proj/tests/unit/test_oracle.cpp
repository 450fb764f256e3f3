#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "latree/errors.hpp"
#include "latree/oracle.hpp"

using namespace latree;
using fixtures::H;
using fixtures::R;

TEST(ExactOracle, QuartetQueryAndMemo) {
    ExactOracle o(fixtures::quartet());
    EXPECT_DOUBLE_EQ(o.query(R(1), R(3)), 9.5);
    EXPECT_EQ(o.query_count(), 1u);
    EXPECT_DOUBLE_EQ(o.query(R(3), R(1)), 9.5);
    EXPECT_EQ(o.query_count(), 1u);
    EXPECT_DOUBLE_EQ(o.query(R(2), R(2)), 0.0);
    EXPECT_EQ(o.query_count(), 1u);
}

TEST(ExactOracle, AllPairsCount) {
    ExactOracle o(random_tree({.n = 10, .max_degree = 3, .latent_fraction = 0.3, .seed = 4}));
    for (std::uint32_t a = 1; a <= 10; ++a)
        for (std::uint32_t b = 1; b <= 10; ++b) o.query(R(a), R(b));
    EXPECT_EQ(o.query_count(), 45u);
}

TEST(ExactOracle, UnknownNode) {
    ExactOracle o(fixtures::quartet());
    EXPECT_THROW(o.query(R(1), R(42)), UnknownNode);
    EXPECT_THROW(o.query(R(1), H(0)), UnknownNode);
}

TEST(MatrixOracle, QuartetAndEquivalence) {
    MatrixOracle m(DistanceMatrix({1, 2, 3, 4}, fixtures::quartet_matrix_values()));
    EXPECT_DOUBLE_EQ(m.query(R(2), R(4)), 9.5);
    EXPECT_DOUBLE_EQ(m.query(R(4), R(4)), 0.0);
    EXPECT_THROW(m.query(R(2), R(5)), UnknownNode);

    const auto t = random_tree({.n = 25, .max_degree = 4, .latent_fraction = 0.5, .seed = 8});
    MatrixOracle mo(full_metric(t));
    ExactOracle eo(t);
    for (std::uint32_t a = 1; a <= 25; ++a)
        for (std::uint32_t b = 1; b <= 25; ++b) EXPECT_DOUBLE_EQ(mo.query(R(a), R(b)), eo.query(R(a), R(b)));
    EXPECT_EQ(mo.query_count(), eo.query_count());
}

TEST(StoredDistances, NeverCountedNeverOverwriteNative) {
    ExactOracle o(fixtures::quartet());
    const NodeId w = o.make_latent(1);
    o.store(w, R(1), 2.0);
    EXPECT_DOUBLE_EQ(o.query(R(1), w), 2.0);
    EXPECT_EQ(o.query_count(), 0u);
    EXPECT_THROW(o.store(R(1), R(2), 1.0), InvalidArgument);
    EXPECT_THROW(o.store(H(99), R(1), 1.0), UnknownNode);
    EXPECT_EQ(o.derivation_depth(w), 1);
    EXPECT_EQ(o.derivation_depth(R(1)), 0);
    EXPECT_EQ(o.stored_distances().size(), 1u);
}

TEST(Oracle, RandomQuerySequenceInvariants) {
    const auto t = random_tree({.n = 30, .max_degree = 4, .latent_fraction = 0.5, .seed = 2});
    auto base = exact_oracle(t);
    auto noisy = noisy_oracle(exact_oracle(t), 0.05, NoiseMode::uniform, 3);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::uint32_t> pick(1, 30);
    for (DistanceOracle* o : {static_cast<DistanceOracle*>(base.get()), static_cast<DistanceOracle*>(noisy.get())}) {
        std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
        for (int i = 0; i < 2000; ++i) {
            const auto a = pick(rng), b = pick(rng);
            const double x = o->query(R(a), R(b));
            EXPECT_EQ(x, o->query(R(b), R(a)));
            if (a != b) seen.insert({std::min(a, b), std::max(a, b)});
            else EXPECT_EQ(x, 0.0);
        }
        EXPECT_EQ(o->query_count(), seen.size());
    }
}

TEST(NoisyOracle, ZeroEpsilonIsBase) {
    const auto t = fixtures::quartet();
    auto n = noisy_oracle(exact_oracle(t), 0.0, NoiseMode::adversarial_max, 1);
    EXPECT_DOUBLE_EQ(n->query(R(1), R(3)), 9.5);
}

TEST(NoisyOracle, AdversarialMagnitudeAndBound) {
    const auto t = random_tree({.n = 100, .max_degree = 5, .latent_fraction = 0.5, .seed = 12});
    const auto truth = full_metric(t);
    auto adv = noisy_oracle(exact_oracle(t), 0.1, NoiseMode::adversarial_max, 5);
    auto uni = noisy_oracle(exact_oracle(t), 0.1, NoiseMode::uniform, 5);
    int positive = 0;
    for (std::uint32_t a = 1; a <= 100; ++a)
        for (std::uint32_t b = a + 1; b <= 100; ++b) {
            const double dev = adv->query(R(a), R(b)) - truth.between(a, b);
            EXPECT_NEAR(std::abs(dev), 0.1, 1e-12);
            positive += dev > 0;
            EXPECT_LE(std::abs(uni->query(R(a), R(b)) - truth.between(a, b)), 0.1 + 1e-12);
        }
    // Both signs occur.
    EXPECT_GT(positive, 1000);
    EXPECT_LT(positive, 4950 - 1000);
}

TEST(NoisyOracle, QuartetAdversarial) {
    auto n = noisy_oracle(exact_oracle(fixtures::quartet()), 0.1, NoiseMode::adversarial_max, 9);
    const auto m = full_metric(fixtures::quartet());
    for (std::uint32_t a = 1; a <= 4; ++a)
        for (std::uint32_t b = a + 1; b <= 4; ++b) EXPECT_NEAR(std::abs(n->query(R(a), R(b)) - m.between(a, b)), 0.1, 1e-12);
}

TEST(NoisyOracle, PerturbationIndependentOfQueryOrder) {
    const auto t = random_tree({.n = 20, .max_degree = 3, .latent_fraction = 0.5, .seed = 1});
    auto a = noisy_oracle(exact_oracle(t), 0.2, NoiseMode::uniform, 17);
    auto b = noisy_oracle(exact_oracle(t), 0.2, NoiseMode::uniform, 17);
    const double first = a->query(R(3), R(9));
    for (std::uint32_t x = 1; x <= 20; ++x) b->query(R(1), R(x));
    EXPECT_EQ(b->query(R(9), R(3)), first);
    EXPECT_THROW(noisy_oracle(exact_oracle(t), -1.0, NoiseMode::uniform, 0), InvalidArgument);
}

TEST(NoiseBudget, Feasibility) {
    const auto m = full_metric(fixtures::quartet());
    const auto b = make_noise_budget(0.5, m);
    EXPECT_DOUBLE_EQ(b.ell, 3.5);
    EXPECT_DOUBLE_EQ(b.u_max, 11.0);
    EXPECT_TRUE(b.feasible());
    EXPECT_FALSE(make_noise_budget(0.875, m).feasible());
    EXPECT_THROW(make_noise_budget(0.1, 5.0, 1.0), InvalidArgument);
}
