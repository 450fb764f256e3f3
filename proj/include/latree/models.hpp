#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "latree/oracle.hpp"
#include "latree/tree.hpp"

namespace latree {

/// Tree with edge correlations exp(-length). Correlations of regular pairs
/// are products of edge correlations along the path.
class CorrelationTree {
public:
    explicit CorrelationTree(SemiLabeledTree tree);

    const SemiLabeledTree& tree() const { return tree_; }
    /// exp(-length) of the i-th edge of tree().edges().
    double edge_corr(std::size_t edge_index) const;
    /// Product of edge correlations along the path between two regular labels.
    double correlation(std::uint32_t a, std::uint32_t b) const;

private:
    SemiLabeledTree tree_;
};

/// Correlation matrix over the regular labels in increasing order.
Eigen::MatrixXd path_correlation(const CorrelationTree& ct);

/// N observations (rows) of the regular coordinates (columns).
class SampleMatrix {
public:
    SampleMatrix(std::vector<std::uint32_t> labels, Eigen::MatrixXd data);

    std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
    std::size_t cols() const { return labels_.size(); }
    const std::vector<std::uint32_t>& labels() const { return labels_; }
    const Eigen::MatrixXd& data() const { return data_; }
    std::size_t column_index(std::uint32_t label) const;
    std::span<const double> column(std::uint32_t label) const;

private:
    std::vector<std::uint32_t> labels_;
    Eigen::MatrixXd data_;  // column-major, so columns are contiguous
};

/// Header of labels, then one comma-separated row per observation.
void write_samples_csv(std::ostream& out, const SampleMatrix& samples);
SampleMatrix read_samples_csv(std::istream& in);

/// Ancestral sampling from the root at the smallest label: a child is
/// corr * parent + sqrt(1 - corr^2) * fresh standard normal.
SampleMatrix sample_gaussian(const CorrelationTree& ct, std::size_t n_samples, std::uint64_t seed);

/// Symmetric +-1 tree model: root uniform, a child copies its parent with
/// probability (1 + corr) / 2 and flips otherwise.
SampleMatrix sample_ising(const CorrelationTree& ct, std::size_t n_samples, std::uint64_t seed);

/// Median of the means of num_blocks contiguous near-equal blocks.
double median_of_means(std::span<const double> values, std::size_t num_blocks);

/// ceil(8 log(1 / eta)).
std::size_t default_block_count(double eta);

/// Kendall rank correlation (concordant minus discordant over all pairs),
/// O(N log N) by merge-sort inversion counting.
double empirical_kendall(std::span<const double> x, std::span<const double> y);

enum class Estimator { plugin_mean, median_of_means };
enum class Transform { corr, kendall };

struct EstimatorConfig {
    Estimator estimator = Estimator::plugin_mean;
    std::size_t blocks = 1;
    Transform transform = Transform::corr;
};

/*
 * Distance oracle estimating each pair lazily from samples on first query.
 * corr: rho = m_ij / sqrt(m_ii m_jj) where m are (median-of-)means of the
 * raw products, distance -log|rho|. kendall: sin transform of the rank
 * correlation. Raises EstimateDegenerate for a zero or non-finite estimate.
 */
class SampleOracle final : public DistanceOracle {
public:
    SampleOracle(std::shared_ptr<const SampleMatrix> samples, EstimatorConfig config);

    /// Estimate for a pair, without memoization or counting.
    double estimate(std::uint32_t a, std::uint32_t b) const;
    const EstimatorConfig& config() const { return config_; }

protected:
    double native_distance(std::uint32_t a, std::uint32_t b) override;

private:
    double moment(std::span<const double> products) const;

    std::shared_ptr<const SampleMatrix> samples_;
    EstimatorConfig config_;
};

/// Per-block second-moment matrices (mean of x x^T over each block).
struct BlockMoments {
    std::vector<std::uint32_t> labels;
    std::vector<Eigen::MatrixXd> second_moments;
    std::vector<std::uint64_t> block_sizes;
};

/// From raw samples, split into contiguous blocks as median_of_means does.
BlockMoments block_moments(const SampleMatrix& samples, std::size_t num_blocks);

/*
 * Exact sampling distribution of the block second moments of Gaussian data
 * from ct with total_samples observations: each block's scatter matrix is
 * Wishart(m, Sigma), drawn by the Bartlett decomposition. Lets estimators run
 * at sample sizes far beyond what can be materialized. Needs m >= n per block.
 */
BlockMoments gaussian_block_moments(const CorrelationTree& ct, std::uint64_t total_samples, std::size_t num_blocks,
                                    std::uint64_t seed);

/// Correlation-transform oracle over block moments: median over blocks of the
/// block moments (the mean when there is one block), then -log|rho|.
class MomentOracle final : public DistanceOracle {
public:
    explicit MomentOracle(std::shared_ptr<const BlockMoments> moments);
    double estimate(std::uint32_t a, std::uint32_t b) const;

protected:
    double native_distance(std::uint32_t a, std::uint32_t b) override;

private:
    double median_entry(std::size_t i, std::size_t j) const;

    std::shared_ptr<const BlockMoments> moments_;
    std::unordered_map<std::uint32_t, std::size_t> index_;  // label -> matrix row
};

/*
 * Sample size guaranteeing sup-norm distance error epsilon with probability
 * 1 - eta under a fourth-moment bound kappa4:
 * ceil(64 kappa4 log(n / eta) / (exp(-2 u_max) delta^2)), delta = 1 - exp(-epsilon).
 */
std::uint64_t required_sample_size(double kappa4, double u_max, double epsilon, double eta, std::size_t n);

} // namespace latree
