// latree: generate trees, recover them from oracles, run experiment sweeps.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "latree/errors.hpp"
#include "latree/harness.hpp"
#include "latree/io.hpp"
#include "latree/models.hpp"
#include "latree/noisy_recovery.hpp"
#include "latree/oracle.hpp"
#include "latree/recovery.hpp"
#include "latree/tree.hpp"

using namespace latree;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kInputError = 2;

// Input problems map to exit code 2, recovery failures to 1.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_st("latree");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("LATREE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept real level names.
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
        else spdlog::warn("ignoring LATREE_LOG={}", env);
    }
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else write_file(path, text);
}

std::string matrix_text(const DistanceMatrix& m) {
    std::ostringstream out;
    write_matrix_csv(out, m);
    return out.str();
}

SemiLabeledTree load_tree(const std::string& path) { return parse(read_file(path)); }

DistanceMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_matrix_csv(in);
}

std::shared_ptr<const SampleMatrix> load_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return std::make_shared<const SampleMatrix>(read_samples_csv(in));
}

EstimatorConfig estimator_config(const std::string& estimator, std::size_t blocks, const std::string& transform) {
    EstimatorConfig c;
    c.estimator = estimator == "mom" ? Estimator::median_of_means : Estimator::plugin_mean;
    c.blocks = c.estimator == Estimator::median_of_means ? (blocks ? blocks : default_block_count(0.05)) : 1;
    c.transform = transform == "kendall" ? Transform::kendall : Transform::corr;
    return c;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::size_t n = 0;
    std::size_t max_degree = 3;
    double latent_fraction = 0.5;
    double length_lo = 1.0;
    double length_hi = 2.0;
    std::uint64_t seed = 0;
    std::string output;
    std::string format = "newick";
};

int run_generate(const GenerateArgs& a) {
    if (a.n < 2) throw InputError("--n must be at least 2");
    if (!(a.latent_fraction >= 0.0 && a.latent_fraction <= 1.0)) throw InputError("--latent-fraction must lie in [0, 1]");
    const auto tree = random_tree({.n = a.n,
                                   .max_degree = a.max_degree,
                                   .length_lo = a.length_lo,
                                   .length_hi = a.length_hi,
                                   .latent_fraction = capped_latent_fraction(a.latent_fraction, a.n),
                                   .seed = a.seed});
    const auto metric = full_metric(tree);
    emit(a.output, a.format == "csv" ? matrix_text(metric) : serialize(tree) + "\n");
    const json info = {{"regular_nodes", tree.regular_count()},
                       {"latent_nodes", tree.node_count() - tree.regular_count()},
                       {"max_degree", tree.max_degree()},
                       {"ell", metric.min_off_diagonal()},
                       {"u", metric.max_off_diagonal()}};
    // Keep stdout clean when the tree itself goes there.
    (a.output.empty() || a.output == "-" ? std::cerr : std::cout) << info.dump() << "\n";
    return kOk;
}

// ----------------------------------------------------------------- recover

struct RecoverArgs {
    std::string input;
    std::string kind = "tree";
    int delta = 0;
    double epsilon = 0.0;
    double ell = 0.0;
    std::string noise = "adversarial_max";
    std::string estimator = "mean";
    std::size_t blocks = 0;
    std::string transform = "corr";
    std::string truth;
    std::uint64_t seed = 0;
    std::string output;
    std::string format = "newick";
};

int run_recover(const RecoverArgs& a) {
    std::shared_ptr<DistanceOracle> oracle;
    std::optional<SemiLabeledTree> input_tree;
    int delta = a.delta;
    if (a.kind == "tree") {
        input_tree = load_tree(a.input);
        oracle = exact_oracle(*input_tree);
        if (delta == 0) delta = static_cast<int>(std::max<std::size_t>(3, input_tree->max_degree()));
    } else if (a.kind == "matrix") {
        oracle = matrix_oracle(load_matrix(a.input));
    } else {
        if (!(a.epsilon > 0.0)) throw InputError("--kind samples needs --epsilon > 0 for the noise thresholds");
        oracle = std::make_shared<SampleOracle>(load_samples(a.input), estimator_config(a.estimator, a.blocks, a.transform));
    }
    if (delta < 3) throw InputError("--delta must be at least 3");

    const bool noisy = a.epsilon > 0.0;
    if (noisy && a.kind != "samples") {
        const auto mode = a.noise == "uniform" ? NoiseMode::uniform : NoiseMode::adversarial_max;
        oracle = noisy_oracle(oracle, a.epsilon, mode, a.seed ^ 0x5eedu);
    }
    std::optional<SemiLabeledTree> truth;
    if (!a.truth.empty()) truth = load_tree(a.truth);

    json stats = {{"kind", a.kind}, {"n", oracle->labels().size()}, {"delta", delta}, {"epsilon", a.epsilon},
                  {"seed", a.seed}};
    RecoverOptions options;
    options.seed = a.seed;
    int code = kOk;
    try {
        NoisyConfig cfg;
        cfg.epsilon = a.epsilon;
        cfg.ell = a.ell;
        cfg.delta = delta;
        const RecoveryResult res = noisy ? recover_noisy(*oracle, cfg, options) : recover(*oracle, delta, options);
        const std::size_t n = oracle->labels().size();
        stats["recovered"] = true;
        stats["queries"] = res.stats.query_count;
        stats["naive_pairs"] = naive_pairs(n);
        stats["bound_19"] = n >= 2 ? bound_19(n, delta) : 0.0;
        stats["rounds"] = res.stats.rounds;
        stats["bigsplit_calls"] = res.stats.bigsplit_retries.size();
        int retries = 0;
        for (int r : res.stats.bigsplit_retries) retries += r;
        stats["bigsplit_retries_total"] = retries;
        stats["max_bag_trajectory"] = res.stats.max_bag_trajectory;
        stats["nodes"] = res.tree.node_count();
        stats["latent_nodes"] = res.tree.node_count() - res.tree.regular_count();
        if (truth) {
            const double tol = noisy ? std::numeric_limits<double>::infinity() : kDefaultTolerance;
            const bool match = trees_isomorphic(*truth, res.tree, tol);
            stats["truth_match"] = match;
            if (const auto diff = max_length_difference(*truth, res.tree)) stats["max_length_difference"] = *diff;
            if (!match) code = kMismatch;
        }
        emit(a.output, a.format == "csv" ? matrix_text(full_metric(res.tree)) : serialize(res.tree) + "\n");
    } catch (const InvalidArgument&) {
        throw;
    } catch (const Error& e) {
        stats["recovered"] = false;
        stats["queries"] = oracle->query_count();
        stats["error"] = e.what();
        spdlog::error("recovery failed: {}", e.what());
        code = kMismatch;
    }
    std::cout << stats.dump() << "\n";
    return code;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
    std::string n, delta, trials, seed, delta_slack, threads, latent_fraction, length_lo, length_hi;
    std::string epsilon_policy, epsilon, noise;
    std::string output;
    std::string summary;
};

ExperimentConfig build_config(const SimulateArgs& a, const CLI::App& cmd) {
    ExperimentConfig c;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw InputError("cannot open " + a.config);
        c = parse_config(in);
    }
    // Flags override the file.
    const std::vector<std::pair<std::string, const std::string*>> flags{
        {"n", &a.n},
        {"delta", &a.delta},
        {"trials", &a.trials},
        {"seed", &a.seed},
        {"delta_slack", &a.delta_slack},
        {"threads", &a.threads},
        {"latent_fraction", &a.latent_fraction},
        {"length_lo", &a.length_lo},
        {"length_hi", &a.length_hi},
        {"epsilon_policy", &a.epsilon_policy},
        {"epsilon", &a.epsilon},
        {"noise", &a.noise},
    };
    for (const auto& [key, value] : flags) {
        std::string opt = "--" + key;
        std::replace(opt.begin(), opt.end(), '_', '-');
        if (cmd.get_option_no_throw(opt) && cmd.count(opt) > 0) apply_setting(c, key, *value);
    }
    if (!a.output.empty()) c.output = a.output;
    validate(c);
    return c;
}

void write_outputs(const ExperimentConfig& c, const SimulateArgs& a, const std::vector<TrialRecord>& records) {
    std::ostringstream rec, sum;
    write_records_csv(rec, records);
    write_summary_csv(sum, summarize(records));
    if (!c.output.empty()) write_file(c.output, rec.str());
    if (!a.summary.empty()) write_file(a.summary, sum.str());
    if (a.summary.empty()) std::cout << sum.str();
}

int run_simulate(const SimulateArgs& a, const CLI::App& cmd) {
    const ExperimentConfig c = build_config(a, cmd);
    const auto records = simulate(c);
    write_outputs(c, a, records);
    int failed = 0;
    for (const auto& r : records) {
        if (!r.recovered) {
            ++failed;
            spdlog::warn("n={} delta={} trial={}: {}", r.n, r.delta, r.trial, r.error);
        }
    }
    spdlog::info("{} trials, {} failed", records.size(), failed);
    return failed ? kMismatch : kOk;
}

int run_simulate_noisy(const SimulateArgs& a, const CLI::App& cmd) {
    ExperimentConfig c = build_config(a, cmd);
    if (c.epsilon_policy == EpsilonPolicy::none) throw InputError("simulate-noisy needs --epsilon-policy");
    const auto records = simulate_noisy(c);
    write_outputs(c, a, records);
    int guaranteed_failures = 0;
    for (const auto& r : records) {
        if (!r.recovered && r.within_guarantee) {
            ++guaranteed_failures;
            spdlog::warn("n={} delta={} trial={} eps/ell={}: {}", r.n, r.delta, r.trial, r.epsilon_ratio, r.error);
        }
    }
    return guaranteed_failures ? kMismatch : kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string input;
    std::string pairs;
    bool all = false;
    std::string estimator = "mean";
    std::size_t blocks = 0;
    std::string transform = "corr";
    std::string output;
};

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_pairs(const std::string& text) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) throw InputError("pair '" + item + "' is not of the form a-b");
        try {
            out.emplace_back(static_cast<std::uint32_t>(std::stoul(item.substr(0, dash))),
                             static_cast<std::uint32_t>(std::stoul(item.substr(dash + 1))));
        } catch (const std::logic_error&) {
            throw InputError("pair '" + item + "' is not of the form a-b");
        }
    }
    return out;
}

int run_estimate(const EstimateArgs& a) {
    if (a.all == !a.pairs.empty()) throw InputError("give exactly one of --pairs or --all");
    const auto samples = load_samples(a.input);
    const SampleOracle oracle(samples, estimator_config(a.estimator, a.blocks, a.transform));
    const auto& labels = samples->labels();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    if (a.all) {
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t j = i + 1; j < labels.size(); ++j) pairs.emplace_back(labels[i], labels[j]);
    } else {
        pairs = parse_pairs(a.pairs);
        for (const auto& [x, y] : pairs) {
            samples->column_index(x);
            samples->column_index(y);
        }
    }

    std::ostringstream out;
    out << "a,b,distance,status\n";
    const std::size_t n = labels.size();
    std::vector<double> full(n * n, 0.0);
    int degenerate = 0;
    for (const auto& [x, y] : pairs) {
        try {
            const double d = oracle.estimate(x, y);
            out << x << ',' << y << ',' << format_double(d) << ",ok\n";
            const std::size_t i = samples->column_index(x), j = samples->column_index(y);
            full[i * n + j] = full[j * n + i] = d;
        } catch (const Error& e) {
            ++degenerate;
            out << x << ',' << y << ",," << '"' << e.what() << "\"\n";
        }
    }
    emit(a.output, out.str());

    if (a.all) {
        json check;
        if (degenerate) {
            check = {{"four_point", nullptr}, {"degenerate_pairs", degenerate}};
        } else {
            const auto rep = check_four_point(DistanceMatrix(labels, full), 0.0);
            check = {{"four_point_ok", rep.ok}, {"worst_excess", rep.worst_excess},
                     {"quadruples_checked", rep.quadruples_checked}, {"exhaustive", rep.exhaustive}};
            if (rep.witness) check["witness"] = *rep.witness;
        }
        (a.output.empty() || a.output == "-" ? std::cerr : std::cout) << check.dump() << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Recover latent trees from pairwise distance oracles"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a random semi-labeled tree");
    g->add_option("--n", gen.n, "Number of regular nodes")->required();
    g->add_option("--max-degree", gen.max_degree, "Maximum degree")->capture_default_str();
    g->add_option("--latent-fraction", gen.latent_fraction, "Latent nodes as a fraction of n")->capture_default_str();
    g->add_option("--length-lo", gen.length_lo)->capture_default_str();
    g->add_option("--length-hi", gen.length_hi)->capture_default_str();
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("-o,--output", gen.output, "Output file (default stdout)");
    g->add_option("--format", gen.format, "newick or csv (full distance matrix)")
        ->check(CLI::IsMember({"newick", "csv"}))
        ->capture_default_str();

    RecoverArgs rec;
    auto* r = app.add_subcommand("recover", "Recover a tree from a tree file, a distance matrix or samples");
    r->add_option("--input", rec.input, "Input file")->required()->check(CLI::ExistingFile);
    r->add_option("--kind", rec.kind)->check(CLI::IsMember({"tree", "matrix", "samples"}))->capture_default_str();
    r->add_option("--delta", rec.delta, "Maximum degree bound (default: input tree's max degree)");
    r->add_option("--epsilon", rec.epsilon, "Noise level; > 0 selects noisy recovery")->check(CLI::NonNegativeNumber);
    r->add_option("--ell", rec.ell, "Known lower bound on the closest regular pair (enables diagnostics)")
        ->check(CLI::NonNegativeNumber);
    r->add_option("--noise", rec.noise, "Synthetic noise for tree/matrix input")
        ->check(CLI::IsMember({"uniform", "adversarial_max"}))
        ->capture_default_str();
    r->add_option("--estimator", rec.estimator)->check(CLI::IsMember({"mean", "mom"}))->capture_default_str();
    r->add_option("--blocks", rec.blocks, "Median-of-means blocks (default from eta = 0.05)");
    r->add_option("--transform", rec.transform)->check(CLI::IsMember({"corr", "kendall"}))->capture_default_str();
    r->add_option("--truth", rec.truth, "Ground-truth tree to compare against")->check(CLI::ExistingFile);
    r->add_option("--seed", rec.seed)->capture_default_str();
    r->add_option("-o,--output", rec.output, "Output file (default stdout)");
    r->add_option("--format", rec.format)->check(CLI::IsMember({"newick", "csv"}))->capture_default_str();

    SimulateArgs sim, simn;
    auto add_sim_flags = [](CLI::App* s, SimulateArgs& a, bool noisy) {
        s->add_option("--config", a.config, "key=value config file")->check(CLI::ExistingFile);
        s->add_option("--n", a.n, "Comma-separated n grid");
        s->add_option("--delta", a.delta, "Comma-separated max-degree grid");
        s->add_option("--trials", a.trials);
        s->add_option("--seed", a.seed);
        s->add_option("--delta-slack", a.delta_slack, "Added to the generator degree for recovery");
        s->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
        s->add_option("--latent-fraction", a.latent_fraction);
        s->add_option("--length-lo", a.length_lo);
        s->add_option("--length-hi", a.length_hi);
        if (noisy) {
            s->add_option("--epsilon-policy", a.epsilon_policy, "fraction_of_ell or theorem_bound");
            s->add_option("--epsilon", a.epsilon, "Comma-separated eps/ell fractions");
            s->add_option("--noise", a.noise, "uniform or adversarial_max");
        }
        s->add_option("-o,--output", a.output, "Per-trial records CSV");
        s->add_option("--summary", a.summary, "Per-cell summary CSV (default stdout)");
    };
    auto* s = app.add_subcommand("simulate", "Exact-oracle experiment sweep");
    add_sim_flags(s, sim, false);
    auto* sn = app.add_subcommand("simulate-noisy", "Noisy-oracle experiment sweep");
    add_sim_flags(sn, simn, true);

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "Estimate distances from samples");
    e->add_option("--input", est.input, "Samples CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--pairs", est.pairs, "Comma-separated a-b pairs");
    e->add_flag("--all", est.all, "Every pair, plus a four-point check");
    e->add_option("--estimator", est.estimator)->check(CLI::IsMember({"mean", "mom"}))->capture_default_str();
    e->add_option("--blocks", est.blocks);
    e->add_option("--transform", est.transform)->check(CLI::IsMember({"corr", "kendall"}))->capture_default_str();
    e->add_option("-o,--output", est.output, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (g->parsed()) return run_generate(gen);
        if (r->parsed()) return run_recover(rec);
        if (s->parsed()) return run_simulate(sim, *s);
        if (sn->parsed()) return run_simulate_noisy(simn, *sn);
        if (e->parsed()) return run_estimate(est);
    } catch (const InputError& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    } catch (const ParseError& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    } catch (const InvalidArgument& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    } catch (const UnknownNode& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    } catch (const InvalidTree& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    } catch (const Error& err) {
        spdlog::error("{}", err.what());
        return kMismatch;
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    }
    return kInputError;
}
