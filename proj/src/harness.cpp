#include "latree/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "latree/errors.hpp"
#include "latree/io.hpp"
#include "latree/noisy_recovery.hpp"
#include "latree/recovery.hpp"
#include "latree/tree.hpp"

namespace latree {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream ss(text);
    T value{};
    ss >> value;
    if (!ss || !(ss >> std::ws).eof()) throw InvalidArgument("bad value '" + text + "' for " + key);
    return value;
}

double log_base(double x, int base) { return std::log(x) / std::log(static_cast<double>(base)); }

RandomTreeParams tree_params(std::size_t n, int delta, std::uint64_t seed, const ExperimentConfig& config) {
    RandomTreeParams p;
    p.n = n;
    p.max_degree = static_cast<std::size_t>(delta);
    p.length_lo = config.length_lo;
    p.length_hi = config.length_hi;
    p.seed = seed;
    p.latent_fraction = capped_latent_fraction(config.latent_fraction, n);
    return p;
}

void fill_stats(TrialRecord& rec, const RecoveryStats& stats) {
    rec.queries = stats.query_count;
    rec.rounds = stats.rounds;
    rec.bigsplit_calls = static_cast<int>(stats.bigsplit_retries.size());
    rec.bigsplit_retry_counts = stats.bigsplit_retries;
    for (int r : stats.bigsplit_retries) {
        rec.bigsplit_retries_total += r;
        rec.bigsplit_max_retries = std::max(rec.bigsplit_max_retries, r);
    }
    rec.bigsplit_iterations = static_cast<int>(stats.iterations.size());
    for (const auto& it : stats.iterations) rec.large_bag_events += it.large_bag_event() ? 1 : 0;
}

// Runs fn(i) for i in [0, count) on the configured number of threads.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

void apply_setting(ExperimentConfig& config, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "n") {
        config.n_grid.clear();
        for (const auto& v : split_list(value)) config.n_grid.push_back(parse_number<std::size_t>(key, v));
    } else if (key == "delta") {
        config.delta_grid.clear();
        for (const auto& v : split_list(value)) config.delta_grid.push_back(parse_number<int>(key, v));
    } else if (key == "trials") {
        config.trials = parse_number<int>(key, value);
    } else if (key == "seed") {
        config.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "epsilon_policy") {
        if (value == "none") config.epsilon_policy = EpsilonPolicy::none;
        else if (value == "fraction_of_ell") config.epsilon_policy = EpsilonPolicy::fraction_of_ell;
        else if (value == "theorem_bound") config.epsilon_policy = EpsilonPolicy::theorem_bound;
        else throw InvalidArgument("unknown epsilon_policy '" + value + "'");
    } else if (key == "epsilon") {
        config.epsilon_grid.clear();
        for (const auto& v : split_list(value)) config.epsilon_grid.push_back(parse_number<double>(key, v));
    } else if (key == "noise") {
        if (value == "uniform") config.noise_mode = NoiseMode::uniform;
        else if (value == "adversarial_max") config.noise_mode = NoiseMode::adversarial_max;
        else throw InvalidArgument("unknown noise mode '" + value + "'");
    } else if (key == "latent_fraction") {
        config.latent_fraction = parse_number<double>(key, value);
    } else if (key == "length_lo") {
        config.length_lo = parse_number<double>(key, value);
    } else if (key == "length_hi") {
        config.length_hi = parse_number<double>(key, value);
    } else if (key == "delta_slack") {
        config.delta_slack = parse_number<int>(key, value);
    } else if (key == "threads") {
        config.threads = parse_number<int>(key, value);
    } else if (key == "output") {
        config.output = value;
    } else {
        throw InvalidArgument("unknown config key '" + key + "'");
    }
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line_no, 1);
        try {
            apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
        } catch (const InvalidArgument& e) {
            throw ParseError(e.what(), line_no, eq + 2);
        }
    }
    return config;
}

void validate(const ExperimentConfig& config) {
    if (config.trials < 1) throw InvalidArgument("trials must be >= 1");
    if (config.n_grid.empty() || config.delta_grid.empty()) throw InvalidArgument("n and delta grids must be non-empty");
    for (auto n : config.n_grid) {
        if (n < 2) throw InvalidArgument("every n must be >= 2");
    }
    for (int d : config.delta_grid) {
        if (d < 3) throw InvalidArgument("every delta must be >= 3");
    }
    if (config.delta_slack < 0) throw InvalidArgument("delta_slack must be >= 0");
    if (!(config.length_lo > 0.0 && config.length_lo <= config.length_hi)) {
        throw InvalidArgument("need 0 < length_lo <= length_hi");
    }
    if (!(config.latent_fraction >= 0.0 && config.latent_fraction <= 1.0)) {
        throw InvalidArgument("latent_fraction must be in [0, 1]");
    }
    if (config.epsilon_policy == EpsilonPolicy::fraction_of_ell) {
        if (config.epsilon_grid.empty()) throw InvalidArgument("fraction_of_ell needs an epsilon list");
        for (double f : config.epsilon_grid) {
            if (!(f >= 0.0)) throw InvalidArgument("epsilon fractions must be >= 0");
        }
    }
}

double bound_19(std::size_t n, int delta) {
    return 19.0 * delta * static_cast<double>(n) * log_base(static_cast<double>(n), delta);
}

double compbound(std::size_t n, int delta) {
    const double nd = static_cast<double>(n);
    return nd * delta + (delta + nd * (4.0 + 6.0 * delta)) * 2.0 * log_base(nd, delta);
}

std::uint64_t naive_pairs(std::size_t n) { return static_cast<std::uint64_t>(n) * (n - 1) / 2; }

std::uint64_t trial_seed(std::uint64_t base, int trial) { return base ^ static_cast<std::uint64_t>(trial); }

TrialRecord run_exact_trial(std::size_t n, int delta, int trial, const ExperimentConfig& config) {
    TrialRecord rec;
    rec.n = n;
    rec.trial = trial;
    rec.seed = trial_seed(config.seed, trial);
    rec.delta = delta + config.delta_slack;
    rec.bound_19 = bound_19(n, rec.delta);
    rec.naive_pairs = naive_pairs(n);
    try {
        const SemiLabeledTree truth = random_tree(tree_params(n, delta, rec.seed, config));
        ExactOracle oracle(truth);
        RecoverOptions options;
        options.seed = mix(rec.seed ^ 1u);
        const RecoveryResult result = recover(oracle, rec.delta, options);
        fill_stats(rec, result.stats);
        rec.recovered = trees_isomorphic(truth, result.tree, kDefaultTolerance);
        if (!rec.recovered) rec.error = "recovered tree differs from the generator tree";
    } catch (const Error& e) {
        rec.error = e.what();
    }
    return rec;
}

TrialRecord run_noisy_trial(std::size_t n, int delta, int trial, double fraction, const ExperimentConfig& config) {
    TrialRecord rec;
    rec.n = n;
    rec.trial = trial;
    rec.seed = trial_seed(config.seed, trial);
    rec.delta = delta + config.delta_slack;
    rec.bound_19 = bound_19(n, rec.delta);
    rec.naive_pairs = naive_pairs(n);
    try {
        const SemiLabeledTree truth = random_tree(tree_params(n, delta, rec.seed, config));
        rec.ell = full_metric(truth).min_off_diagonal();
        const double limit = theorem_epsilon(rec.ell, n, rec.delta);
        rec.epsilon = config.epsilon_policy == EpsilonPolicy::theorem_bound ? limit
                      : config.epsilon_policy == EpsilonPolicy::none       ? 0.0
                                                                           : fraction * rec.ell;
        rec.epsilon_ratio = rec.epsilon / rec.ell;
        rec.within_guarantee = rec.epsilon <= limit * (1.0 + 1e-12);

        RecoverOptions options;
        options.seed = mix(rec.seed ^ 1u);
        ExactOracle reference(truth);
        const RecoveryResult clean = recover(reference, rec.delta, options);

        auto noisy = noisy_oracle(exact_oracle(truth), rec.epsilon, config.noise_mode, mix(rec.seed ^ 2u));
        NoisyConfig cfg;
        cfg.epsilon = rec.epsilon;
        cfg.ell = rec.ell;
        cfg.delta = rec.delta;
        const double inf = std::numeric_limits<double>::infinity();
        try {
            const RecoveryResult result = recover_noisy(*noisy, cfg, options);
            fill_stats(rec, result.stats);
            rec.recovered = trees_isomorphic(truth, result.tree, inf);
            rec.matches_noiseless = trees_isomorphic(clean.tree, result.tree, inf) ? 1 : 0;
            if (!rec.recovered) rec.error = "recovered topology differs from the generator tree";
            try {
                const auto worst = latent_error_by_depth(*noisy, reference);
                double ratio = 0.0;
                for (std::size_t depth = 1; depth < worst.size(); ++depth) {
                    const double bound = latent_error_bound(static_cast<int>(depth), rec.epsilon);
                    ratio = std::max(ratio, bound > 0.0 ? worst[depth] / bound : (worst[depth] > 1e-9 ? inf : 0.0));
                }
                rec.latent_error_ratio = ratio;
            } catch (const InvalidArgument&) {
                rec.latent_error_ratio = -1.0;  // runs diverged, latent ids do not line up
            }
        } catch (const Error& e) {
            fill_stats(rec, RecoveryStats{});
            rec.queries = noisy->query_count();
            rec.matches_noiseless = 0;
            rec.error = e.what();
        }
    } catch (const Error& e) {
        rec.error = e.what();
    }
    return rec;
}

std::vector<TrialRecord> simulate(const ExperimentConfig& config) {
    validate(config);
    struct Task {
        std::size_t n;
        int delta;
        int trial;
    };
    std::vector<Task> tasks;
    for (auto n : config.n_grid) {
        for (int d : config.delta_grid) {
            for (int t = 0; t < config.trials; ++t) tasks.push_back({n, d, t});
        }
    }
    std::vector<TrialRecord> out(tasks.size());
    parallel_for(tasks.size(), config.threads,
                 [&](std::size_t i) { out[i] = run_exact_trial(tasks[i].n, tasks[i].delta, tasks[i].trial, config); });
    return out;
}

std::vector<TrialRecord> simulate_noisy(const ExperimentConfig& config) {
    validate(config);
    std::vector<double> fractions = config.epsilon_grid;
    if (config.epsilon_policy != EpsilonPolicy::fraction_of_ell) fractions = {0.0};
    struct Task {
        std::size_t n;
        int delta;
        double fraction;
        int trial;
    };
    std::vector<Task> tasks;
    for (auto n : config.n_grid) {
        for (int d : config.delta_grid) {
            for (double f : fractions) {
                for (int t = 0; t < config.trials; ++t) tasks.push_back({n, d, f, t});
            }
        }
    }
    std::vector<TrialRecord> out(tasks.size());
    parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
        out[i] = run_noisy_trial(tasks[i].n, tasks[i].delta, tasks[i].trial, tasks[i].fraction, config);
    });
    return out;
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records) {
    // Cells keep first-appearance order.
    std::vector<CellSummary> cells;
    std::map<std::tuple<std::size_t, int, long long>, std::size_t> index;
    std::vector<std::map<int, int>> histograms;
    std::vector<int> large_events;
    for (const auto& r : records) {
        const auto key = std::make_tuple(r.n, r.delta, std::llround(r.epsilon_ratio * 1e9));
        auto [it, inserted] = index.emplace(key, cells.size());
        if (inserted) {
            CellSummary c;
            c.n = r.n;
            c.delta = r.delta;
            c.epsilon_ratio = r.epsilon_ratio;
            c.compbound = compbound(r.n, r.delta);
            cells.push_back(c);
            histograms.emplace_back();
            large_events.push_back(0);
        }
        CellSummary& c = cells[it->second];
        ++c.trials;
        c.recovered += r.recovered ? 1 : 0;
        c.mean_queries += static_cast<double>(r.queries);
        c.max_queries = std::max(c.max_queries, r.queries);
        c.mean_ratio_bound_19 += static_cast<double>(r.queries) / r.bound_19;
        c.mean_ratio_naive += static_cast<double>(r.queries) / static_cast<double>(r.naive_pairs);
        c.bigsplit_calls += r.bigsplit_calls;
        c.mean_retries += r.bigsplit_retries_total;
        c.max_retries = std::max(c.max_retries, r.bigsplit_max_retries);
        c.iterations += r.bigsplit_iterations;
        large_events[it->second] += r.large_bag_events;
        c.max_latent_error_ratio = std::max(c.max_latent_error_ratio, r.latent_error_ratio);
        c.noiseless_mismatches += r.matches_noiseless == 0 ? 1 : 0;
        for (int retries : r.bigsplit_retry_counts) ++histograms[it->second][retries];
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CellSummary& c = cells[i];
        c.mean_queries /= c.trials;
        c.mean_ratio_bound_19 /= c.trials;
        c.mean_ratio_naive /= c.trials;
        c.mean_retries = c.bigsplit_calls ? c.mean_retries / c.bigsplit_calls : 0.0;
        c.large_bag_fraction = c.iterations ? static_cast<double>(large_events[i]) / c.iterations : 0.0;
        for (const auto& [retries, count] : histograms[i]) {
            if (!c.retry_histogram.empty()) c.retry_histogram += ';';
            c.retry_histogram += std::to_string(retries) + ":" + std::to_string(count);
        }
    }
    return cells;
}

namespace {

std::string fmt(double x) { return format_double(x); }

} // namespace

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
    out << "n,delta,trial,seed,queries,rounds,bigsplit_calls,bigsplit_retries_total,bigsplit_max_retries,"
           "bigsplit_iterations,large_bag_events,recovered,bound_19,naive_pairs,ell,epsilon,epsilon_ratio,"
           "within_guarantee,matches_noiseless,latent_error_ratio,error\n";
    for (const auto& r : records) {
        std::string error = r.error;
        std::replace(error.begin(), error.end(), '"', '\'');
        out << r.n << ',' << r.delta << ',' << r.trial << ',' << r.seed << ',' << r.queries << ',' << r.rounds << ','
            << r.bigsplit_calls << ',' << r.bigsplit_retries_total << ',' << r.bigsplit_max_retries << ','
            << r.bigsplit_iterations << ',' << r.large_bag_events << ',' << (r.recovered ? 1 : 0) << ','
            << fmt(r.bound_19) << ',' << r.naive_pairs << ',' << fmt(r.ell) << ',' << fmt(r.epsilon) << ','
            << fmt(r.epsilon_ratio) << ',' << (r.within_guarantee ? 1 : 0) << ',' << r.matches_noiseless << ','
            << fmt(r.latent_error_ratio) << ",\"" << error << "\"\n";
    }
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& summaries) {
    out << "n,delta,epsilon_ratio,trials,recovered,recovery_rate,mean_queries,max_queries,mean_ratio_bound_19,"
           "mean_ratio_naive,compbound,bigsplit_calls,mean_retries,max_retries,iterations,large_bag_fraction,"
           "max_latent_error_ratio,noiseless_mismatches,retry_histogram\n";
    for (const auto& c : summaries) {
        out << c.n << ',' << c.delta << ',' << fmt(c.epsilon_ratio) << ',' << c.trials << ',' << c.recovered << ','
            << fmt(c.recovery_rate()) << ',' << fmt(c.mean_queries) << ',' << c.max_queries << ','
            << fmt(c.mean_ratio_bound_19) << ',' << fmt(c.mean_ratio_naive) << ',' << fmt(c.compbound) << ','
            << c.bigsplit_calls << ',' << fmt(c.mean_retries) << ',' << c.max_retries << ',' << c.iterations << ','
            << fmt(c.large_bag_fraction) << ',' << fmt(c.max_latent_error_ratio) << ',' << c.noiseless_mismatches
            << ',' << c.retry_histogram << '\n';
    }
}

} // namespace latree
