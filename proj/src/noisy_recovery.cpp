#include "latree/noisy_recovery.hpp"

#include <algorithm>
#include <cmath>

#include "engine.hpp"
#include "latree/errors.hpp"

namespace latree {

namespace {

detail::NoiseModel noisy_model(double epsilon, double ell, double tolerance) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and >= 0");
    if (!(ell >= 0.0)) throw InvalidArgument("ell must be >= 0");
    detail::NoiseModel noise;
    noise.epsilon = epsilon;
    noise.ell = ell;
    noise.tolerance = tolerance;
    noise.noisy = true;
    return noise;
}

double log_base(double x, int base) { return std::log(x) / std::log(static_cast<double>(base)); }

} // namespace

double theorem_epsilon(double ell, std::size_t n, int delta) {
    if (delta < 2 || n < 1) throw InvalidArgument("theorem_epsilon needs n >= 1 and delta >= 2");
    return ell / (4.0 * (1.0 + log_base(static_cast<double>(n), delta)));
}

int default_round_budget(std::size_t n, int delta) {
    if (delta < 2) throw InvalidArgument("delta must be at least 2");
    if (n < 2) return 1;
    // Guard against log ratios landing a hair above an integer.
    const double r = 2.0 * log_base(static_cast<double>(n), delta);
    return std::max(1, static_cast<int>(std::ceil(r - 1e-12)));
}

double perturbation_bound(std::span<const double> coefficients, double epsilon) {
    double norm = 0.0;
    for (double a : coefficients) norm += std::abs(a);
    return norm * epsilon;
}

double latent_error_bound(int depth, double epsilon) { return (1.0 + 0.5 * depth) * epsilon; }

BasicResult basic_noisy(const Bag& bag, NodeId alpha, double epsilon, DistanceOracle& oracle, double ell,
                        double tolerance) {
    return detail::basic_impl(bag, alpha, oracle, noisy_model(epsilon, ell, tolerance));
}

std::vector<Bag> explode_noisy(const Bag& bag, double epsilon, DistanceOracle& oracle, int max_subtrees,
                               double tolerance) {
    return detail::explode_impl(bag, oracle, max_subtrees, noisy_model(epsilon, 0.0, tolerance));
}

BigsplitResult bigsplit_noisy(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle,
                              const NoisyConfig& config, std::mt19937_64& rng, int max_retries) {
    return detail::bigsplit_impl(bag, std::move(probes), oracle, config.delta, rng, max_retries,
                                 noisy_model(config.epsilon, config.ell, config.tolerance));
}

RecoveryResult recover_noisy(DistanceOracle& oracle, std::span<const std::uint32_t> labels, const NoisyConfig& config,
                             const RecoverOptions& options) {
    const int budget =
        config.round_budget > 0 ? config.round_budget : default_round_budget(labels.size(), std::max(2, config.delta));
    return detail::recover_impl(oracle, labels, config.delta, options,
                                noisy_model(config.epsilon, config.ell, config.tolerance), budget);
}

RecoveryResult recover_noisy(DistanceOracle& oracle, const NoisyConfig& config, const RecoverOptions& options) {
    return recover_noisy(oracle, oracle.labels(), config, options);
}

std::vector<double> latent_error_by_depth(const DistanceOracle& noisy, const DistanceOracle& reference) {
    const auto a = noisy.stored_distances();
    const auto b = reference.stored_distances();
    if (a.size() != b.size()) throw InvalidArgument("paired runs stored different numbers of latent distances");
    std::vector<double> worst(1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (pair_key(a[i].a, a[i].b) != pair_key(b[i].a, b[i].b)) {
            throw InvalidArgument("paired runs stored different latent pairs");
        }
        int depth = 0;
        for (NodeId v : {a[i].a, a[i].b}) depth = std::max(depth, noisy.derivation_depth(v));
        if (worst.size() <= static_cast<std::size_t>(depth)) worst.resize(depth + 1, 0.0);
        worst[depth] = std::max(worst[depth], std::abs(a[i].value - b[i].value));
    }
    return worst;
}

} // namespace latree
