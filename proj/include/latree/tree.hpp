#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "latree/node_id.hpp"

namespace latree {

/// Absolute tolerance used for metric equality throughout the library.
inline constexpr double kDefaultTolerance = 1e-9;

struct Edge {
    NodeId a;
    NodeId b;
    double length = 0.0;
};

/*
 * Weighted tree whose regular nodes carry labels and whose latent nodes are
 * anonymous internal vertices of degree at least three. Immutable once built;
 * the constructor rejects anything that is not a valid semi-labeled tree.
 */
class SemiLabeledTree {
public:
    struct Neighbor {
        std::size_t node;
        double length;
    };

    SemiLabeledTree(std::vector<NodeId> nodes, std::vector<Edge> edges);

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t regular_count() const { return regular_count_; }
    std::span<const NodeId> nodes() const { return nodes_; }
    std::span<const Edge> edges() const { return edges_; }

    /// Regular labels in increasing order.
    std::vector<std::uint32_t> regular_labels() const;

    bool contains(NodeId id) const { return index_.contains(id); }
    std::size_t index_of(NodeId id) const;
    NodeId node_at(std::size_t index) const { return nodes_[index]; }
    std::span<const Neighbor> neighbors(std::size_t index) const { return adjacency_[index]; }
    std::size_t degree(NodeId id) const { return adjacency_[index_of(id)].size(); }
    std::size_t max_degree() const;

private:
    std::vector<NodeId> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::size_t regular_count_ = 0;
};

/// Sum of edge lengths along the unique path between u and v, by direct search.
double path_distance(const SemiLabeledTree& tree, NodeId u, NodeId v);

/*
 * Constant-time path distances via an Euler tour and a sparse-table range
 * minimum over depths. Used by oracles that answer many queries on one tree.
 */
class PathMetric {
public:
    explicit PathMetric(const SemiLabeledTree& tree);

    double distance(std::size_t i, std::size_t j) const;
    double distance(NodeId u, NodeId v) const { return distance(tree_->index_of(u), tree_->index_of(v)); }
    const SemiLabeledTree& tree() const { return *tree_; }

private:
    std::size_t lca(std::size_t i, std::size_t j) const;

    const SemiLabeledTree* tree_;
    std::vector<double> root_distance_;
    std::vector<std::uint32_t> level_;
    std::vector<std::uint32_t> first_visit_;
    std::vector<std::vector<std::uint32_t>> sparse_;  // node indices, minimal level per 2^k window
};

/// Symmetric matrix of pairwise distances over an ordered list of regular labels.
class DistanceMatrix {
public:
    /// values is row-major |labels| x |labels|; validated for symmetry,
    /// zero diagonal, finiteness and nonnegativity.
    DistanceMatrix(std::vector<std::uint32_t> labels, std::vector<double> values);

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::uint32_t>& labels() const { return labels_; }
    double at(std::size_t i, std::size_t j) const { return values_[i * labels_.size() + j]; }
    double between(std::uint32_t a, std::uint32_t b) const { return at(index_of(a), index_of(b)); }
    std::size_t index_of(std::uint32_t label) const;
    bool has_label(std::uint32_t label) const { return index_.contains(label); }
    const std::vector<double>& values() const { return values_; }

    /// Smallest and largest off-diagonal entries.
    double min_off_diagonal() const;
    double max_off_diagonal() const;

private:
    std::vector<std::uint32_t> labels_;
    std::vector<double> values_;
    std::unordered_map<std::uint32_t, std::size_t> index_;
};

/// Distance matrix over the regular nodes of a tree, labels in increasing order.
DistanceMatrix full_metric(const SemiLabeledTree& tree);

struct FourPointOptions {
    std::size_t exhaustive_limit = 60;
    std::uint64_t sampled_quadruples = 1'000'000;
    std::uint64_t seed = 0;
};

struct FourPointReport {
    bool ok = true;
    /// Labels (i, j, k, l) of the first violating quadruple found.
    std::optional<std::array<std::uint32_t, 4>> witness;
    /// Largest observed d(i,j)+d(k,l) - max(d(i,k)+d(j,l), d(i,l)+d(j,k)), less a
    /// rounding allowance of 64 ulps of the larger side.
    double worst_excess = 0.0;
    std::uint64_t quadruples_checked = 0;
    bool exhaustive = true;
};

/// Four-point condition over all quadruples (with repetition) up to the
/// exhaustive limit, otherwise over a seeded random sample of quadruples.
FourPointReport check_four_point(const DistanceMatrix& matrix, double tolerance,
                                 const FourPointOptions& options = {});

struct RandomTreeParams {
    std::size_t n = 2;
    std::size_t max_degree = 3;
    double length_lo = 1.0;
    double length_hi = 2.0;
    double latent_fraction = 0.0;
    std::uint64_t seed = 0;
};

/*
 * Random semi-labeled tree with exactly n regular nodes labeled 1..n.
 * The shape is grown by attaching each new node to a uniformly chosen node
 * with spare degree capacity; floor(latent_fraction * n) nodes are then made
 * latent, and latent nodes left with degree <= 2 are pruned or contracted.
 * Edge lengths are drawn i.i.d. uniform on [length_lo, length_hi] afterwards.
 */
SemiLabeledTree random_tree(const RandomTreeParams& params);

/// fraction, lowered when floor(fraction * n) would exceed the n - 2 latent
/// nodes a tree on n regular nodes can hold.
double capped_latent_fraction(double fraction, std::size_t n);

/// True iff a label-preserving isomorphism exists that matches edge lengths
/// within length_tolerance. Pass infinity to compare topology only.
bool trees_isomorphic(const SemiLabeledTree& a, const SemiLabeledTree& b,
                      double length_tolerance = kDefaultTolerance);

/// Largest absolute edge-length difference over matched edges, or nullopt
/// when the topologies differ.
std::optional<double> max_length_difference(const SemiLabeledTree& a, const SemiLabeledTree& b);

} // namespace latree
