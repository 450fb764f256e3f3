#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "latree/node_id.hpp"
#include "latree/oracle.hpp"
#include "latree/tree.hpp"

namespace latree {

/// Working set of nodes with a distinguished representative. members always
/// contains the representative, which is listed first.
struct Bag {
    std::vector<NodeId> members;
    NodeId representative;

    std::size_t size() const { return members.size(); }
    bool contains(NodeId v) const;
};

/// Validates non-emptiness and membership of the representative, and moves
/// the representative to the front.
Bag make_bag(std::vector<NodeId> members, NodeId representative);

struct SkeletonEdge {
    NodeId a;
    NodeId b;
    double length = 0.0;
};

using Skeleton = std::vector<SkeletonEdge>;

struct BasicResult {
    /// Ordered along the path from the probe (first) to the representative (last).
    std::vector<Bag> bags;
    /// Path edges between consecutive bag representatives.
    Skeleton edges;
};

/// One pass of the bigsplit while-loop: the input bag size and the largest bag
/// after exploding.
struct BigsplitIteration {
    std::size_t bag_size = 0;
    std::size_t largest = 0;
    int delta = 0;

    /// largest <= bag_size / sqrt(delta), the loop's exit condition.
    bool accepted() const;
    /// largest >= 1 + bag_size / sqrt(delta).
    bool large_bag_event() const;
};

struct BigsplitResult {
    Skeleton edges;
    std::vector<Bag> bags;
    int retries = 0;
    std::vector<BigsplitIteration> iterations;
};

struct RecoveryStats {
    std::uint64_t query_count = 0;
    /// Number of bigsplit levels the queue went through.
    int rounds = 0;
    /// One entry per bigsplit call: number of while-loop iterations.
    std::vector<int> bigsplit_retries;
    /// Largest bag entering each level, level 1 first.
    std::vector<std::size_t> max_bag_trajectory;
    std::vector<BigsplitIteration> iterations;
    /// Sizes of the bags reconstructed directly (size >= 2).
    std::vector<std::size_t> final_bag_sizes;
    int max_derivation_depth = 0;
};

struct RecoverOptions {
    /// Seeds the probe stream. The stream is only consumed by probe sampling.
    std::uint64_t seed = 0;
    /// Absolute tolerance for metric equalities.
    double tolerance = kDefaultTolerance;
    /// Exact mode only: check the result against every queried distance and
    /// raise NotATreeMetric on disagreement beyond verify_tolerance.
    bool verify = true;
    double verify_tolerance = 1e-6;
    int max_bigsplit_retries = 10000;
};

struct RecoveryResult {
    SemiLabeledTree tree;
    RecoveryStats stats;
};

/*
 * Splits a bag along the path from the probe alpha to the representative.
 * Members are grouped by D(v) = d(v, alpha) - d(v, rho); each group becomes a
 * bag whose representative is its member on the path, or a new latent node
 * whose distances to the group are stored in the oracle. Needs the
 * representative's distances to all members; queries at most 2|B| - 3 new
 * pairs when those are already known.
 */
BasicResult basic(const Bag& bag, NodeId alpha, DistanceOracle& oracle, double tolerance = kDefaultTolerance);

/// Partitions bag members by the subtree hanging off the representative. Every
/// output bag keeps the input representative. Throws InvalidDelta when more
/// than max_subtrees subtrees are found (a value <= 0 disables the check).
std::vector<Bag> explode(const Bag& bag, DistanceOracle& oracle, int max_subtrees = 0,
                         double tolerance = kDefaultTolerance);

/// Repeats basic-per-probe followed by explode, resampling probes from rng,
/// until the largest output bag has at most |B| / sqrt(delta) members.
BigsplitResult bigsplit(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle, int delta,
                        std::mt19937_64& rng, const RecoverOptions& options = {});

/// Full skeleton of the tree induced by a bag, built by inserting members one
/// at a time at their attachment point. Queries every pair in the bag.
Skeleton small_bag_reconstruct(const Bag& bag, DistanceOracle& oracle, double tolerance = kDefaultTolerance);

/// Tree from a skeleton; contracts latent nodes of degree two by summing lengths.
SemiLabeledTree assemble(const Skeleton& skeleton);

/// Randomized divide-and-conquer recovery of the semi-labeled tree behind an
/// oracle whose native distances form a tree metric of maximum degree <= delta.
RecoveryResult recover(DistanceOracle& oracle, std::span<const std::uint32_t> labels, int delta,
                       const RecoverOptions& options = {});
RecoveryResult recover(DistanceOracle& oracle, int delta, const RecoverOptions& options = {});

/// Uniform sample of k distinct non-representative members.
std::vector<NodeId> sample_probes(const Bag& bag, std::size_t k, std::mt19937_64& rng);

} // namespace latree
