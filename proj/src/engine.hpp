#pragma once

// Recovery engine shared by the exact and noisy entry points. Every threshold
// is derived from the worst-case error of the distances it combines; with
// epsilon = 0 they all collapse to the plain tolerance.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "latree/recovery.hpp"

namespace latree::detail {

struct NoiseModel {
    double epsilon = 0.0;
    double tolerance = kDefaultTolerance;
    /// Smallest regular-pair distance; only used for diagnostics, 0 disables them.
    double ell = 0.0;
    bool noisy = false;

    /// Sup-norm error bound of distances from v: epsilon for regular nodes,
    /// (1 + depth / 2) * epsilon for latent nodes after depth synthesis steps.
    double node_error(const DistanceOracle& oracle, NodeId v) const;
};

[[noreturn]] void inconsistent(const NoiseModel& noise, const std::string& what);

BasicResult basic_impl(const Bag& bag, NodeId alpha, DistanceOracle& oracle, const NoiseModel& noise);
std::vector<Bag> explode_impl(const Bag& bag, DistanceOracle& oracle, int max_subtrees, const NoiseModel& noise);
BigsplitResult bigsplit_impl(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle, int delta,
                             std::mt19937_64& rng, int max_retries, const NoiseModel& noise);
Skeleton small_bag_impl(const Bag& bag, DistanceOracle& oracle, const NoiseModel& noise);

/// round_budget <= 0 disables the budget check.
RecoveryResult recover_impl(DistanceOracle& oracle, std::span<const std::uint32_t> labels, int delta,
                            const RecoverOptions& options, const NoiseModel& noise, int round_budget);

} // namespace latree::detail
