#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "latree/oracle.hpp"
#include "latree/recovery.hpp"

namespace latree {

struct NoisyConfig {
    /// Sup-norm bound on native distance errors.
    double epsilon = 0.0;
    /// Smallest regular-pair distance of the underlying metric (caller supplied).
    double ell = 0.0;
    int delta = 3;
    /// Maximum number of bigsplit levels; <= 0 means ceil(2 log_delta n).
    int round_budget = 0;
    double tolerance = kDefaultTolerance;

    bool feasible() const { return epsilon < ell / 4.0; }
};

/// ell / (4 (1 + log_delta n)), the largest noise level with a full-run guarantee.
double theorem_epsilon(double ell, std::size_t n, int delta);

/// ceil(2 log_delta n), at least 1.
int default_round_budget(std::size_t n, int delta);

/// ||a||_1 * epsilon: worst-case error of a signed combination of noisy distances.
double perturbation_bound(std::span<const double> coefficients, double epsilon);

/// (1 + depth / 2) * epsilon: error bound on distances stored for a latent node
/// synthesized after depth chained steps.
double latent_error_bound(int depth, double epsilon);

/*
 * Noise-tolerant variants. Decisions use thresholds widened by the worst-case
 * error of the distances involved: with a regular representative the grouping
 * gap is 4 epsilon, the on-path test 3 epsilon and the explode slack 3 epsilon;
 * a latent representative of depth r widens each by r * epsilon.
 * When ell > 0, a grouping chain spanning more than threshold + 2 ell raises
 * NoiseTooLarge.
 */
BasicResult basic_noisy(const Bag& bag, NodeId alpha, double epsilon, DistanceOracle& oracle, double ell = 0.0,
                        double tolerance = kDefaultTolerance);
std::vector<Bag> explode_noisy(const Bag& bag, double epsilon, DistanceOracle& oracle, int max_subtrees = 0,
                               double tolerance = kDefaultTolerance);
BigsplitResult bigsplit_noisy(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle,
                              const NoisyConfig& config, std::mt19937_64& rng, int max_retries = 10000);

/// Main loop with noisy decisions. Does not refuse infeasible epsilon; failures
/// surface as NoiseTooLarge, RoundBudgetExceeded or a wrong tree.
RecoveryResult recover_noisy(DistanceOracle& oracle, std::span<const std::uint32_t> labels, const NoisyConfig& config,
                             const RecoverOptions& options = {});
RecoveryResult recover_noisy(DistanceOracle& oracle, const NoisyConfig& config, const RecoverOptions& options = {});

/*
 * Compares the stored latent distances of a noisy run with those of a paired
 * noiseless run that made the same decisions (so latent ids line up). Returns
 * the largest absolute error per derivation depth (index 0 unused). Throws
 * InvalidArgument when the two runs stored different pairs.
 */
std::vector<double> latent_error_by_depth(const DistanceOracle& noisy, const DistanceOracle& reference);

} // namespace latree
