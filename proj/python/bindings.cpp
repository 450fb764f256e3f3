#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <memory>
#include <sstream>

#include "latree/errors.hpp"
#include "latree/harness.hpp"
#include "latree/io.hpp"
#include "latree/models.hpp"
#include "latree/noisy_recovery.hpp"
#include "latree/oracle.hpp"
#include "latree/recovery.hpp"
#include "latree/transforms.hpp"
#include "latree/tree.hpp"

namespace py = pybind11;
using namespace latree;

namespace {

// Regular nodes as ints, latent nodes as "h<id>" strings.
py::object node_to_py(NodeId v) {
    if (v.is_regular()) return py::int_(v.value());
    return py::str(v.to_string());
}

DistanceMatrix to_matrix(const std::vector<std::uint32_t>& labels, const Eigen::MatrixXd& m) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (m.rows() != n || m.cols() != n) throw InvalidArgument("matrix shape does not match the label count");
    std::vector<double> values(labels.size() * labels.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) values[i * n + j] = m(i, j);
    return DistanceMatrix(labels, std::move(values));
}

Eigen::MatrixXd to_eigen(const DistanceMatrix& m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m.at(i, j);
    return out;
}

py::dict stats_dict(const RecoveryStats& s) {
    py::dict d;
    d["queries"] = s.query_count;
    d["rounds"] = s.rounds;
    d["bigsplit_retries"] = s.bigsplit_retries;
    d["max_bag_trajectory"] = s.max_bag_trajectory;
    d["final_bag_sizes"] = s.final_bag_sizes;
    d["max_derivation_depth"] = s.max_derivation_depth;
    return d;
}

py::tuple result_tuple(RecoveryResult r) { return py::make_tuple(std::move(r.tree), stats_dict(r.stats)); }

NoiseMode noise_mode(const std::string& name) {
    if (name == "uniform") return NoiseMode::uniform;
    if (name == "adversarial_max") return NoiseMode::adversarial_max;
    throw InvalidArgument("noise must be 'uniform' or 'adversarial_max'");
}

EstimatorConfig estimator_config(const std::string& estimator, std::size_t blocks, const std::string& transform) {
    EstimatorConfig c;
    if (estimator == "mom") c.estimator = Estimator::median_of_means;
    else if (estimator != "mean") throw InvalidArgument("estimator must be 'mean' or 'mom'");
    c.blocks = c.estimator == Estimator::median_of_means ? (blocks ? blocks : default_block_count(0.05)) : 1;
    if (transform == "kendall") c.transform = Transform::kendall;
    else if (transform != "corr") throw InvalidArgument("transform must be 'corr' or 'kendall'");
    return c;
}

ExperimentConfig experiment_config(const py::dict& settings) {
    ExperimentConfig c;
    for (const auto& [key, value] : settings) {
        std::string text;
        if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
            for (const auto& item : value) text += (text.empty() ? "" : ",") + py::str(item).cast<std::string>();
        } else {
            text = py::str(value).cast<std::string>();
        }
        apply_setting(c, key.cast<std::string>(), text);
    }
    validate(c);
    return c;
}

py::list records_list(const std::vector<TrialRecord>& records) {
    py::list out;
    for (const auto& r : records) {
        py::dict d;
        d["n"] = r.n;
        d["delta"] = r.delta;
        d["trial"] = r.trial;
        d["seed"] = r.seed;
        d["queries"] = r.queries;
        d["rounds"] = r.rounds;
        d["bigsplit_calls"] = r.bigsplit_calls;
        d["bigsplit_retries_total"] = r.bigsplit_retries_total;
        d["recovered"] = r.recovered;
        d["bound_19"] = r.bound_19;
        d["naive_pairs"] = r.naive_pairs;
        d["ell"] = r.ell;
        d["epsilon"] = r.epsilon;
        d["epsilon_ratio"] = r.epsilon_ratio;
        d["within_guarantee"] = r.within_guarantee;
        d["matches_noiseless"] = r.matches_noiseless;
        d["latent_error_ratio"] = r.latent_error_ratio;
        d["error"] = r.error;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_latree, m) {
    m.doc() = "Latent tree recovery from distance oracles";

    // Translators run newest first, so the base class goes in before its subclasses.
    auto base = py::register_exception<Error>(m, "LatreeError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<NotATreeMetric>(m, "NotATreeMetric", base);
    py::register_exception<InvalidDelta>(m, "InvalidDelta", base);
    py::register_exception<NoiseTooLarge>(m, "NoiseTooLarge", base);
    py::register_exception<RoundBudgetExceeded>(m, "RoundBudgetExceeded", base);
    py::register_exception<EstimateDegenerate>(m, "EstimateDegenerate", base);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InvalidArgument& e) {
            py::set_error(PyExc_ValueError, e.what());
        } catch (const UnknownNode& e) {
            py::set_error(PyExc_KeyError, e.what());
        }
    });

    py::class_<SemiLabeledTree>(m, "Tree")
        .def_static("from_newick", [](const std::string& text) { return parse(text); })
        .def("to_newick", [](const SemiLabeledTree& t) { return serialize(t); })
        .def_property_readonly("node_count", &SemiLabeledTree::node_count)
        .def_property_readonly("regular_count", &SemiLabeledTree::regular_count)
        .def_property_readonly("max_degree", &SemiLabeledTree::max_degree)
        .def("regular_labels", &SemiLabeledTree::regular_labels)
        .def("edges",
             [](const SemiLabeledTree& t) {
                 py::list out;
                 for (const auto& e : t.edges()) out.append(py::make_tuple(node_to_py(e.a), node_to_py(e.b), e.length));
                 return out;
             })
        .def("distance",
             [](const SemiLabeledTree& t, std::uint32_t a, std::uint32_t b) {
                 return path_distance(t, NodeId::regular(a), NodeId::regular(b));
             })
        .def("metric",
             [](const SemiLabeledTree& t) {
                 const auto dm = full_metric(t);
                 return py::make_tuple(dm.labels(), to_eigen(dm));
             },
             "(labels, distance matrix) over regular nodes")
        .def("__repr__", [](const SemiLabeledTree& t) { return "Tree(" + serialize(t) + ")"; });

    m.def(
        "random_tree",
        [](std::size_t n, std::size_t max_degree, double latent_fraction, double length_lo, double length_hi,
           std::uint64_t seed) {
            return random_tree({.n = n,
                                .max_degree = max_degree,
                                .length_lo = length_lo,
                                .length_hi = length_hi,
                                .latent_fraction = latent_fraction,
                                .seed = seed});
        },
        py::arg("n"), py::arg("max_degree") = 3, py::arg("latent_fraction") = 0.5, py::arg("length_lo") = 1.0,
        py::arg("length_hi") = 2.0, py::arg("seed") = 0);
    m.def("isomorphic", &trees_isomorphic, py::arg("a"), py::arg("b"),
          py::arg("length_tolerance") = kDefaultTolerance);
    m.def("max_length_difference", &max_length_difference);
    m.def(
        "check_four_point",
        [](const std::vector<std::uint32_t>& labels, const Eigen::MatrixXd& matrix, double tolerance) {
            const auto rep = check_four_point(to_matrix(labels, matrix), tolerance);
            py::dict d;
            d["ok"] = rep.ok;
            d["witness"] = rep.witness ? py::cast(*rep.witness) : py::none();
            d["worst_excess"] = rep.worst_excess;
            d["quadruples_checked"] = rep.quadruples_checked;
            d["exhaustive"] = rep.exhaustive;
            return d;
        },
        py::arg("labels"), py::arg("matrix"), py::arg("tolerance") = 0.0);

    m.def(
        "recover_matrix",
        [](const std::vector<std::uint32_t>& labels, const Eigen::MatrixXd& matrix, int delta, std::uint64_t seed) {
            MatrixOracle o(to_matrix(labels, matrix));
            return result_tuple(recover(o, delta, {.seed = seed}));
        },
        py::arg("labels"), py::arg("matrix"), py::arg("delta"), py::arg("seed") = 0,
        "Recover from a full distance matrix; returns (tree, stats)");
    m.def(
        "recover_noisy",
        [](const SemiLabeledTree& truth, int delta, double epsilon, double ell, const std::string& noise,
           std::uint64_t seed, std::uint64_t noise_seed) {
            auto o = noisy_oracle(exact_oracle(truth), epsilon, noise_mode(noise), noise_seed);
            NoisyConfig cfg;
            cfg.epsilon = epsilon;
            cfg.ell = ell;
            cfg.delta = delta;
            return result_tuple(recover_noisy(*o, cfg, {.seed = seed}));
        },
        py::arg("tree"), py::arg("delta"), py::arg("epsilon"), py::arg("ell") = 0.0,
        py::arg("noise") = "adversarial_max", py::arg("seed") = 0, py::arg("noise_seed") = 1,
        "Recover through a perturbed oracle over a known tree; returns (tree, stats)");
    m.def(
        "recover_samples",
        [](const std::vector<std::uint32_t>& labels, const Eigen::MatrixXd& data, int delta, double epsilon,
           double ell, const std::string& estimator, std::size_t blocks, const std::string& transform,
           std::uint64_t seed) {
            auto samples = std::make_shared<const SampleMatrix>(labels, data);
            SampleOracle o(samples, estimator_config(estimator, blocks, transform));
            NoisyConfig cfg;
            cfg.epsilon = epsilon;
            cfg.ell = ell;
            cfg.delta = delta;
            return result_tuple(recover_noisy(o, cfg, {.seed = seed}));
        },
        py::arg("labels"), py::arg("data"), py::arg("delta"), py::arg("epsilon"), py::arg("ell") = 0.0,
        py::arg("estimator") = "mean", py::arg("blocks") = 0, py::arg("transform") = "corr", py::arg("seed") = 0,
        "Noisy recovery from an (N, n) sample array; returns (tree, stats)");
    m.def(
        "recover_tree",
        [](const SemiLabeledTree& truth, int delta, std::uint64_t seed) {
            ExactOracle o(truth);
            return result_tuple(recover(o, delta, {.seed = seed}));
        },
        py::arg("tree"), py::arg("delta"), py::arg("seed") = 0,
        "Recover a known tree through its exact distance oracle; returns (tree, stats)");

    m.def(
        "sample_gaussian",
        [](const SemiLabeledTree& t, std::size_t n_samples, std::uint64_t seed) {
            const auto s = sample_gaussian(CorrelationTree(t), n_samples, seed);
            return py::make_tuple(s.labels(), s.data());
        },
        py::arg("tree"), py::arg("n_samples"), py::arg("seed") = 0);
    m.def(
        "sample_ising",
        [](const SemiLabeledTree& t, std::size_t n_samples, std::uint64_t seed) {
            const auto s = sample_ising(CorrelationTree(t), n_samples, seed);
            return py::make_tuple(s.labels(), s.data());
        },
        py::arg("tree"), py::arg("n_samples"), py::arg("seed") = 0);
    m.def(
        "estimate_distance",
        [](const std::vector<std::uint32_t>& labels, const Eigen::MatrixXd& data, std::uint32_t a, std::uint32_t b,
           const std::string& estimator, std::size_t blocks, const std::string& transform) {
            SampleOracle o(std::make_shared<const SampleMatrix>(labels, data),
                           estimator_config(estimator, blocks, transform));
            return o.estimate(a, b);
        },
        py::arg("labels"), py::arg("data"), py::arg("a"), py::arg("b"), py::arg("estimator") = "mean",
        py::arg("blocks") = 0, py::arg("transform") = "corr");
    m.def("empirical_kendall", [](const std::vector<double>& x, const std::vector<double>& y) {
        return empirical_kendall(x, y);
    });
    m.def("median_of_means", [](const std::vector<double>& v, std::size_t blocks) { return median_of_means(v, blocks); });
    m.def("required_sample_size", &required_sample_size, py::arg("kappa4"), py::arg("u_max"), py::arg("epsilon"),
          py::arg("eta"), py::arg("n"));
    m.def("corr_to_distance", &corr_to_distance);
    m.def("kendall_to_distance", &kendall_to_distance);
    m.def("gmm_tau", py::overload_cast<const Eigen::MatrixXd&>(&gmm_tau));
    m.def("linear_tau", &linear_tau);
    m.def("theorem_epsilon", &theorem_epsilon, py::arg("ell"), py::arg("n"), py::arg("delta"));

    m.def("bound_19", &bound_19);
    m.def("naive_pairs", &naive_pairs);
    m.def(
        "simulate",
        [](const py::dict& settings) {
            const auto c = experiment_config(settings);
            std::vector<TrialRecord> records;
            {
                py::gil_scoped_release release;
                records = simulate(c);
            }
            return records_list(records);
        },
        py::arg("settings"), "Exact sweep; settings use the config-file keys");
    m.def(
        "simulate_noisy",
        [](const py::dict& settings) {
            const auto c = experiment_config(settings);
            std::vector<TrialRecord> records;
            {
                py::gil_scoped_release release;
                records = simulate_noisy(c);
            }
            return records_list(records);
        },
        py::arg("settings"));
}
