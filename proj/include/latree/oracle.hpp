#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "latree/node_id.hpp"
#include "latree/tree.hpp"

namespace latree {

/*
 * Query-counted source of pairwise distances.
 *
 * Distances between two regular nodes are native: the backend answers them,
 * the answer is memoized, and the counter increments on the first access of
 * each unordered pair only. Distances involving a latent node are derived by
 * the caller and published with store(); stored values never count as queries
 * and may never shadow a native pair.
 */
class DistanceOracle {
public:
    struct StoredDistance {
        NodeId a;
        NodeId b;
        double value;
    };

    explicit DistanceOracle(std::vector<std::uint32_t> labels);
    virtual ~DistanceOracle() = default;

    DistanceOracle(const DistanceOracle&) = delete;
    DistanceOracle& operator=(const DistanceOracle&) = delete;

    double query(NodeId u, NodeId v);
    void store(NodeId u, NodeId v, double value);
    /// Memoized or stored value, without touching the backend or the counter.
    std::optional<double> lookup(NodeId u, NodeId v) const;

    std::uint64_t query_count() const { return query_count_; }

    /// Allocates a fresh latent node. depth is the number of chained
    /// synthesis steps its stored distances went through (1 when derived
    /// purely from native values).
    NodeId make_latent(int depth = 1);
    /// 0 for regular nodes.
    int derivation_depth(NodeId v) const;
    std::size_t latent_count() const { return latent_depth_.size(); }

    const std::vector<std::uint32_t>& labels() const { return labels_; }
    /// Regular labels followed by every latent node allocated so far.
    std::vector<NodeId> known_nodes() const;
    std::vector<StoredDistance> stored_distances() const;
    /// Every native pair answered so far, unordered.
    std::vector<StoredDistance> queried_distances() const;

protected:
    /// Backend distance between two distinct regular labels.
    virtual double native_distance(std::uint32_t a, std::uint32_t b) = 0;

private:
    std::vector<std::uint32_t> labels_;
    std::unordered_map<std::uint64_t, double> native_;
    std::unordered_map<std::uint64_t, double> stored_;
    std::vector<int> latent_depth_;
    std::uint64_t query_count_ = 0;
};

/// Answers from the path metric of a known tree.
class ExactOracle final : public DistanceOracle {
public:
    explicit ExactOracle(SemiLabeledTree tree);
    const SemiLabeledTree& tree() const { return tree_; }

protected:
    double native_distance(std::uint32_t a, std::uint32_t b) override;

private:
    SemiLabeledTree tree_;
    PathMetric metric_;
};

class MatrixOracle final : public DistanceOracle {
public:
    explicit MatrixOracle(DistanceMatrix matrix);
    const DistanceMatrix& matrix() const { return matrix_; }

protected:
    double native_distance(std::uint32_t a, std::uint32_t b) override;

private:
    DistanceMatrix matrix_;
};

enum class NoiseMode {
    uniform,         // perturbation uniform on [-epsilon, epsilon]
    adversarial_max  // perturbation of magnitude exactly epsilon, random sign
};

/*
 * Adds a fixed per-pair perturbation of magnitude at most epsilon to a base
 * oracle. The perturbation of a pair depends only on (seed, pair), never on
 * query order.
 */
class NoisyOracle final : public DistanceOracle {
public:
    NoisyOracle(std::shared_ptr<DistanceOracle> base, double epsilon, NoiseMode mode, std::uint64_t seed);

    double epsilon() const { return epsilon_; }
    NoiseMode mode() const { return mode_; }
    /// Perturbation applied to the pair (a, b).
    double perturbation(std::uint32_t a, std::uint32_t b) const;
    DistanceOracle& base() { return *base_; }

protected:
    double native_distance(std::uint32_t a, std::uint32_t b) override;

private:
    std::shared_ptr<DistanceOracle> base_;
    double epsilon_;
    NoiseMode mode_;
    std::uint64_t seed_;
};

std::shared_ptr<ExactOracle> exact_oracle(SemiLabeledTree tree);
std::shared_ptr<MatrixOracle> matrix_oracle(DistanceMatrix matrix);
std::shared_ptr<NoisyOracle> noisy_oracle(std::shared_ptr<DistanceOracle> base, double epsilon, NoiseMode mode,
                                          std::uint64_t seed);

/// Noise level together with the extremes of the underlying metric.
struct NoiseBudget {
    double epsilon = 0.0;
    double ell = 0.0;    // smallest regular-pair distance
    double u_max = 0.0;  // largest regular-pair distance

    /// Noisy decisions coincide with noiseless ones when epsilon < ell / 4.
    bool feasible() const { return epsilon < ell / 4.0; }
};

NoiseBudget make_noise_budget(double epsilon, double ell, double u_max);
NoiseBudget make_noise_budget(double epsilon, const DistanceMatrix& metric);

} // namespace latree
