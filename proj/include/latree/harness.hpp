#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "latree/oracle.hpp"

namespace latree {

enum class EpsilonPolicy {
    none,             // exact oracle
    fraction_of_ell,  // epsilon = f * ell for every f in epsilon_grid
    theorem_bound     // epsilon = ell / (4 (1 + log_delta n))
};

struct ExperimentConfig {
    std::vector<std::size_t> n_grid{128};
    std::vector<int> delta_grid{4};
    int trials = 1;
    std::uint64_t seed = 0;
    EpsilonPolicy epsilon_policy = EpsilonPolicy::none;
    std::vector<double> epsilon_grid{};
    NoiseMode noise_mode = NoiseMode::adversarial_max;
    double latent_fraction = 0.5;
    double length_lo = 1.0;
    double length_hi = 2.0;
    /// Added to the generator's max degree to get the delta passed to recovery.
    int delta_slack = 0;
    /// Worker threads for trials; 0 picks the hardware concurrency.
    int threads = 1;
    std::string output;
};

/// Simple key=value lines; '#' starts a comment; lists are comma-separated.
/// Keys: n, delta, trials, seed, epsilon_policy, epsilon, noise,
/// latent_fraction, length_lo, length_hi, delta_slack, threads, output.
ExperimentConfig parse_config(std::istream& in);
/// Applies one key=value setting; throws InvalidArgument on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& config);

struct TrialRecord {
    std::size_t n = 0;
    int delta = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    std::uint64_t queries = 0;
    int rounds = 0;
    int bigsplit_calls = 0;
    int bigsplit_retries_total = 0;
    int bigsplit_max_retries = 0;
    /// While-loop iterations of each bigsplit call (not written to CSV).
    std::vector<int> bigsplit_retry_counts;
    int bigsplit_iterations = 0;
    /// Iterations whose largest bag reached 1 + |B| / sqrt(delta).
    int large_bag_events = 0;
    bool recovered = false;
    double bound_19 = 0.0;
    std::uint64_t naive_pairs = 0;
    // Noisy runs only.
    double ell = 0.0;
    double epsilon = 0.0;
    double epsilon_ratio = 0.0;  // epsilon / ell
    bool within_guarantee = true;
    /// -1 when no paired noiseless run, else 1 when both runs returned the same topology.
    int matches_noiseless = -1;
    /// Largest (stored latent error / (1 + depth / 2) epsilon); -1 when not measured.
    double latent_error_ratio = -1.0;
    std::string error;
};

double bound_19(std::size_t n, int delta);
/// n delta + (delta + n (4 + 6 delta)) * 2 log_delta n.
double compbound(std::size_t n, int delta);
std::uint64_t naive_pairs(std::size_t n);

/// Seed of trial t: base ^ t.
std::uint64_t trial_seed(std::uint64_t base, int trial);

/// Generate, recover with an exact oracle, compare against the generator tree.
TrialRecord run_exact_trial(std::size_t n, int delta, int trial, const ExperimentConfig& config);
/// Same with a noisy oracle at the given epsilon fraction (ignored for theorem_bound),
/// plus a paired noiseless run sharing the probe stream.
TrialRecord run_noisy_trial(std::size_t n, int delta, int trial, double fraction, const ExperimentConfig& config);

/// Records ordered by cell then trial index, independent of thread count.
std::vector<TrialRecord> simulate(const ExperimentConfig& config);
std::vector<TrialRecord> simulate_noisy(const ExperimentConfig& config);

struct CellSummary {
    std::size_t n = 0;
    int delta = 0;
    double epsilon_ratio = 0.0;
    int trials = 0;
    int recovered = 0;
    double mean_queries = 0.0;
    std::uint64_t max_queries = 0;
    double mean_ratio_bound_19 = 0.0;
    double mean_ratio_naive = 0.0;
    double compbound = 0.0;
    int bigsplit_calls = 0;
    double mean_retries = 0.0;
    int max_retries = 0;
    /// "retries:count" pairs separated by ';'.
    std::string retry_histogram;
    int iterations = 0;
    double large_bag_fraction = 0.0;
    double max_latent_error_ratio = -1.0;
    int noiseless_mismatches = 0;

    double recovery_rate() const { return trials ? static_cast<double>(recovered) / trials : 0.0; }
};

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records);

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& summaries);

} // namespace latree
