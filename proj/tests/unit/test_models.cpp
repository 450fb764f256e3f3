#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "latree/errors.hpp"
#include "latree/models.hpp"
#include "latree/transforms.hpp"

using namespace latree;
using fixtures::R;

namespace {

SemiLabeledTree small_tree() {
    return random_tree({.n = 6, .max_degree = 3, .length_lo = 0.2, .length_hi = 0.6, .latent_fraction = 0.5, .seed = 3});
}

double brute_kendall(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    long long s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = (x[i] - x[j]) * (y[i] - y[j]);
            s += a > 0 ? 1 : (a < 0 ? -1 : 0);
        }
    return static_cast<double>(s) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

} // namespace

TEST(CorrelationTree, PathProducts) {
    const CorrelationTree ct(fixtures::quartet());
    EXPECT_NEAR(ct.correlation(1, 3), std::exp(-9.5), 1e-15);
    EXPECT_DOUBLE_EQ(ct.correlation(2, 2), 1.0);
    const auto m = path_correlation(ct);
    EXPECT_NEAR(m(1, 3), std::exp(-9.5), 1e-15);
}

TEST(Samplers, GaussianMatchesPathCorrelation) {
    const CorrelationTree ct(small_tree());
    const auto target = path_correlation(ct);
    const auto s = sample_gaussian(ct, 200000, 7);
    const Eigen::MatrixXd m = s.data().transpose() * s.data() / static_cast<double>(s.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) EXPECT_NEAR(m(i, j), target(i, j), 0.01);
}

TEST(Samplers, IsingMatchesPathCorrelation) {
    const CorrelationTree ct(small_tree());
    const auto target = path_correlation(ct);
    const auto s = sample_ising(ct, 200000, 8);
    EXPECT_TRUE((s.data().array().abs() == 1.0).all());
    const Eigen::MatrixXd m = s.data().transpose() * s.data() / static_cast<double>(s.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) EXPECT_NEAR(m(i, j), target(i, j), 0.01);
}

TEST(Samplers, Deterministic) {
    const CorrelationTree ct(small_tree());
    EXPECT_EQ(sample_gaussian(ct, 100, 1).data(), sample_gaussian(ct, 100, 1).data());
    EXPECT_NE(sample_gaussian(ct, 100, 1).data(), sample_gaussian(ct, 100, 2).data());
}

TEST(SamplesCsv, RoundTrip) {
    const auto s = sample_gaussian(CorrelationTree(small_tree()), 20, 4);
    std::stringstream ss;
    write_samples_csv(ss, s);
    const auto back = read_samples_csv(ss);
    EXPECT_EQ(back.labels(), s.labels());
    EXPECT_EQ(back.data(), s.data());
    std::stringstream bad("1,2\n0.5\n");
    EXPECT_THROW(read_samples_csv(bad), ParseError);
}

TEST(MedianOfMeans, OutlierIsIgnored) {
    std::vector<double> v(99, 0.0);
    v.push_back(1e6);
    EXPECT_DOUBLE_EQ(median_of_means(v, 9), 0.0);
    EXPECT_DOUBLE_EQ(median_of_means(v, 1), 1e4);
    const std::vector<double> w{1, 2, 3, 4, 5, 6};
    EXPECT_DOUBLE_EQ(median_of_means(w, 3), 3.5);
    EXPECT_THROW(median_of_means(w, 7), InvalidArgument);
    EXPECT_THROW(median_of_means(w, 0), InvalidArgument);
    EXPECT_EQ(default_block_count(0.05), 24u);
}

TEST(Kendall, MatchesQuadraticCount) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> small(0, 6);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 50 + rep * 7;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Half the cases have heavy ties.
            x[i] = rep % 2 ? small(rng) : z(rng);
            y[i] = rep % 2 ? small(rng) + 0.5 * x[i] : x[i] + z(rng);
        }
        EXPECT_NEAR(empirical_kendall(x, y), brute_kendall(x, y), 1e-12);
    }
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    EXPECT_DOUBLE_EQ(empirical_kendall(a, a), 1.0);
    EXPECT_DOUBLE_EQ(empirical_kendall(a, b), -1.0);
}

TEST(SampleOracle, CorrAndKendallEstimates) {
    const SemiLabeledTree edge({R(1), R(2)}, {{R(1), R(2), -std::log(0.8)}});
    auto s = std::make_shared<const SampleMatrix>(sample_gaussian(CorrelationTree(edge), 100000, 11));
    SampleOracle plain(s, {});
    EXPECT_NEAR(plain.query(R(1), R(2)), -std::log(0.8), 0.05);
    SampleOracle mom(s, {.estimator = Estimator::median_of_means, .blocks = 24});
    EXPECT_NEAR(mom.query(R(1), R(2)), -std::log(0.8), 0.05);
    SampleOracle tau(s, {.transform = Transform::kendall});
    EXPECT_NEAR(tau.query(R(1), R(2)), -std::log(0.8), 0.07);
    EXPECT_EQ(plain.query_count(), 1u);
}

TEST(SampleOracle, DegenerateColumns) {
    Eigen::MatrixXd d(4, 3);
    d << 1, 1, 0, -1, -1, 0, 2, 2, 0, 0.5, 0.5, 0;
    auto s = std::make_shared<const SampleMatrix>(SampleMatrix({1, 2, 3}, d));
    SampleOracle o(s, {});
    EXPECT_DOUBLE_EQ(o.query(R(1), R(2)), 0.0);
    EXPECT_THROW(o.query(R(1), R(3)), EstimateDegenerate);
}

TEST(BlockMoments, SingleBlockIsScatterMean) {
    const auto s = sample_gaussian(CorrelationTree(small_tree()), 1000, 5);
    const auto bm = block_moments(s, 1);
    ASSERT_EQ(bm.second_moments.size(), 1u);
    const Eigen::MatrixXd expect = s.data().transpose() * s.data() / 1000.0;
    EXPECT_LT((bm.second_moments[0] - expect).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(bm.block_sizes, (std::vector<std::uint64_t>{1000}));
}

TEST(GaussianBlockMoments, WishartMeanAndVariance) {
    const CorrelationTree ct(small_tree());
    const auto sigma = path_correlation(ct);
    const std::size_t blocks = 4000, m = 40;
    const auto bm = gaussian_block_moments(ct, blocks * m, blocks, 13);
    ASSERT_EQ(bm.second_moments.size(), blocks);
    const auto k = sigma.rows();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j) {
            double mean = 0, sq = 0;
            for (const auto& s : bm.second_moments) {
                mean += s(i, j);
                sq += s(i, j) * s(i, j);
            }
            mean /= blocks;
            const double var = sq / blocks - mean * mean;
            // Wishart moments of the mean scatter: E = Sigma_ij, Var = (Sigma_ij^2 + Sigma_ii Sigma_jj) / m.
            const double want_var = (sigma(i, j) * sigma(i, j) + sigma(i, i) * sigma(j, j)) / m;
            EXPECT_NEAR(mean, sigma(i, j), 5 * std::sqrt(want_var / blocks));
            EXPECT_NEAR(var / want_var, 1.0, 0.15);
        }
}

TEST(MomentOracle, MatchesSampleOracleOnSameBlocks) {
    const auto s = std::make_shared<const SampleMatrix>(sample_gaussian(CorrelationTree(small_tree()), 5000, 6));
    auto bm1 = std::make_shared<const BlockMoments>(block_moments(*s, 1));
    MomentOracle mo(bm1);
    SampleOracle so(s, {});
    for (auto a : s->labels())
        for (auto b : s->labels())
            if (a < b) EXPECT_NEAR(mo.query(R(a), R(b)), so.query(R(a), R(b)), 1e-9);
}

TEST(RequiredSampleSize, ValueAndMonotonicity) {
    EXPECT_EQ(required_sample_size(3, 1, 0.1, 0.05, 50), 1082169u);
    EXPECT_GT(required_sample_size(3, 1, 0.05, 0.05, 50), required_sample_size(3, 1, 0.1, 0.05, 50));
    EXPECT_GT(required_sample_size(9, 1, 0.1, 0.05, 50), required_sample_size(3, 1, 0.1, 0.05, 50));
    EXPECT_GT(required_sample_size(3, 2, 0.1, 0.05, 50), required_sample_size(3, 1, 0.1, 0.05, 50));
    EXPECT_GT(required_sample_size(3, 1, 0.1, 0.01, 50), required_sample_size(3, 1, 0.1, 0.05, 50));
    EXPECT_THROW(required_sample_size(3, 1, 0.0, 0.05, 50), InvalidArgument);
    EXPECT_THROW(required_sample_size(3, 1, 0.1, 1.0, 50), InvalidArgument);
}
