#include "latree/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "canonical.hpp"
#include "latree/errors.hpp"
#include "latree/io.hpp"
#include "latree/transforms.hpp"

namespace latree {

namespace {

// Contiguous near-equal split of [0, n) into k blocks: block b is [start(b), start(b + 1)).
std::size_t block_start(std::size_t n, std::size_t k, std::size_t b) { return b * n / k; }

double median_in_place(std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

double rho_to_distance(double rho, std::uint32_t a, std::uint32_t b) {
    if (!std::isfinite(rho) || rho == 0.0) {
        throw EstimateDegenerate("degenerate correlation estimate for pair (" + std::to_string(a) + ", " +
                                 std::to_string(b) + ")");
    }
    return corr_to_distance(std::clamp(rho, -1.0, 1.0));
}

// Ancestral sampler shared by the Gaussian and Ising models. draw(parent, corr)
// produces a child value; the root is drawn by root().
template <class Root, class Child>
SampleMatrix ancestral(const CorrelationTree& ct, std::size_t n_samples, Root root, Child child) {
    if (n_samples < 1) throw InvalidArgument("need at least one sample");
    const SemiLabeledTree& tree = ct.tree();
    const detail::RootedOrder order = detail::rooted_order(tree);
    const std::vector<std::uint32_t> labels = tree.regular_labels();

    std::vector<double> corr(tree.node_count(), 1.0);
    for (std::size_t v = 0; v < tree.node_count(); ++v) {
        if (v != order.root) corr[v] = std::exp(-order.parent_length[v]);
    }
    std::vector<std::size_t> column(tree.node_count(), labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) column[tree.index_of(NodeId::regular(labels[c]))] = c;

    Eigen::MatrixXd data(n_samples, labels.size());
    std::vector<double> value(tree.node_count());
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t v : order.preorder) {
            value[v] = v == order.root ? root() : child(value[order.parent[v]], corr[v]);
            if (column[v] < labels.size()) data(s, column[v]) = value[v];
        }
    }
    return SampleMatrix(labels, std::move(data));
}

// Parses one CSV line into fields.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line, std::size_t column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + s + "'", line, column);
    }
    if (used != s.size()) throw ParseError("trailing characters in '" + s + "'", line, column);
    return v;
}

} // namespace

CorrelationTree::CorrelationTree(SemiLabeledTree tree) : tree_(std::move(tree)) {}

double CorrelationTree::edge_corr(std::size_t edge_index) const {
    return std::exp(-tree_.edges()[edge_index].length);
}

double CorrelationTree::correlation(std::uint32_t a, std::uint32_t b) const {
    return std::exp(-path_distance(tree_, NodeId::regular(a), NodeId::regular(b)));
}

Eigen::MatrixXd path_correlation(const CorrelationTree& ct) {
    const PathMetric metric(ct.tree());
    const auto labels = ct.tree().regular_labels();
    const auto n = static_cast<Eigen::Index>(labels.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            out(i, j) = out(j, i) = std::exp(-metric.distance(NodeId::regular(labels[i]), NodeId::regular(labels[j])));
        }
    }
    return out;
}

SampleMatrix::SampleMatrix(std::vector<std::uint32_t> labels, Eigen::MatrixXd data)
    : labels_(std::move(labels)), data_(std::move(data)) {
    if (static_cast<std::size_t>(data_.cols()) != labels_.size()) {
        throw InvalidArgument("sample matrix column count does not match the labels");
    }
    std::vector<std::uint32_t> sorted = labels_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidArgument("sample labels must be distinct");
    }
}

std::size_t SampleMatrix::column_index(std::uint32_t label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw UnknownNode("no sample column for label " + std::to_string(label));
    return static_cast<std::size_t>(it - labels_.begin());
}

std::span<const double> SampleMatrix::column(std::uint32_t label) const {
    const auto c = static_cast<Eigen::Index>(column_index(label));
    return {data_.col(c).data(), rows()};
}

void write_samples_csv(std::ostream& out, const SampleMatrix& samples) {
    for (std::size_t c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << samples.labels()[c];
    out << '\n';
    const Eigen::MatrixXd& d = samples.data();
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.cols(); ++c) out << (c ? "," : "") << format_double(d(r, c));
        out << '\n';
    }
}

SampleMatrix read_samples_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::uint32_t> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t col = 1;
        for (const auto& f : split_csv(line)) {
            const double v = parse_double(f, line_no, col);
            if (v < 0 || v != std::floor(v) || v > NodeId::kMaxValue) throw ParseError("invalid label '" + f + "'", line_no, col);
            labels.push_back(static_cast<std::uint32_t>(v));
            col += f.size() + 1;
        }
        break;
    }
    if (labels.empty()) throw ParseError("missing header", line_no + 1, 1);
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != labels.size()) {
            throw ParseError("expected " + std::to_string(labels.size()) + " fields", line_no, 1);
        }
        std::size_t col = 1;
        for (const auto& f : fields) {
            const double v = parse_double(f, line_no, col);
            if (!std::isfinite(v)) throw ParseError("non-finite sample value", line_no, col);
            values.push_back(v);
            col += f.size() + 1;
        }
        ++rows;
    }
    Eigen::MatrixXd data(rows, labels.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < labels.size(); ++c) data(r, c) = values[r * labels.size() + c];
    }
    return SampleMatrix(std::move(labels), std::move(data));
}

SampleMatrix sample_gaussian(const CorrelationTree& ct, std::size_t n_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    return ancestral(
        ct, n_samples, [&] { return normal(rng); },
        [&](double parent, double c) { return c * parent + std::sqrt(1.0 - c * c) * normal(rng); });
}

SampleMatrix sample_ising(const CorrelationTree& ct, std::size_t n_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return ancestral(
        ct, n_samples, [&] { return unit(rng) < 0.5 ? -1.0 : 1.0; },
        [&](double parent, double c) { return unit(rng) < 0.5 * (1.0 + c) ? parent : -parent; });
}

double median_of_means(std::span<const double> values, std::size_t num_blocks) {
    if (values.empty()) throw InvalidArgument("median_of_means of an empty list");
    if (num_blocks < 1 || num_blocks > values.size()) {
        throw InvalidArgument("num_blocks must be between 1 and the number of values");
    }
    std::vector<double> means(num_blocks);
    for (std::size_t b = 0; b < num_blocks; ++b) {
        const std::size_t lo = block_start(values.size(), num_blocks, b);
        const std::size_t hi = block_start(values.size(), num_blocks, b + 1);
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += values[i];
        means[b] = sum / static_cast<double>(hi - lo);
    }
    if (num_blocks == 1) return means[0];
    return median_in_place(means);
}

std::size_t default_block_count(double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must be in (0, 1)");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(8.0 * std::log(1.0 / eta))));
}

double empirical_kendall(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw InvalidArgument("Kendall tau needs columns of equal length");
    if (n < 2) throw InvalidArgument("Kendall tau needs at least two observations");

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    // Pairs tied in x, and tied in both.
    std::uint64_t tied_x = 0, tied_xy = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        tied_x += (j - i) * (j - i - 1) / 2;
        for (std::size_t k = i; k < j;) {
            std::size_t l = k;
            while (l < j && y[idx[l]] == y[idx[k]]) ++l;
            tied_xy += (l - k) * (l - k - 1) / 2;
            k = l;
        }
        i = j;
    }

    // Bottom-up merge sort of y in x order; swaps count discordant pairs.
    std::vector<double> a(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = y[idx[i]];
    std::uint64_t swaps = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (a[j] < a[i]) {
                    swaps += mid - i;
                    buf[k++] = a[j++];
                } else {
                    buf[k++] = a[i++];
                }
            }
            while (i < mid) buf[k++] = a[i++];
            while (j < hi) buf[k++] = a[j++];
        }
        std::swap(a, buf);
    }

    std::uint64_t tied_y = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && a[j] == a[i]) ++j;
        tied_y += (j - i) * (j - i - 1) / 2;
        i = j;
    }

    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (tied_x == total || tied_y == total) throw EstimateDegenerate("Kendall tau of a constant column is undefined");
    const double concordant_minus_discordant = static_cast<double>(total) - static_cast<double>(tied_x) -
                                               static_cast<double>(tied_y) + static_cast<double>(tied_xy) -
                                               2.0 * static_cast<double>(swaps);
    return concordant_minus_discordant / static_cast<double>(total);
}

SampleOracle::SampleOracle(std::shared_ptr<const SampleMatrix> samples, EstimatorConfig config)
    : DistanceOracle(samples ? samples->labels() : std::vector<std::uint32_t>{}),
      samples_(std::move(samples)), config_(config) {
    if (!samples_) throw InvalidArgument("sample oracle needs samples");
    if (samples_->rows() < 2) throw InvalidArgument("sample oracle needs at least two observations");
    if (config_.estimator == Estimator::median_of_means &&
        (config_.blocks < 1 || config_.blocks > samples_->rows())) {
        throw InvalidArgument("median-of-means block count must be between 1 and the sample size");
    }
}

double SampleOracle::moment(std::span<const double> products) const {
    if (config_.estimator == Estimator::plugin_mean) return median_of_means(products, 1);
    return median_of_means(products, config_.blocks);
}

double SampleOracle::estimate(std::uint32_t a, std::uint32_t b) const {
    const auto x = samples_->column(a);
    const auto y = samples_->column(b);
    if (config_.transform == Transform::kendall) {
        const double kappa = empirical_kendall(x, y);
        if (kappa == 0.0) {
            throw EstimateDegenerate("zero Kendall estimate for pair (" + std::to_string(a) + ", " +
                                     std::to_string(b) + ")");
        }
        return kendall_to_distance(kappa);
    }
    std::vector<double> xy(x.size()), xx(x.size()), yy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xy[i] = x[i] * y[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
    }
    const double scale = std::sqrt(moment(xx) * moment(yy));
    if (!(scale > 0.0)) throw EstimateDegenerate("zero second moment for label " + std::to_string(a) + " or " + std::to_string(b));
    return rho_to_distance(moment(xy) / scale, a, b);
}

double SampleOracle::native_distance(std::uint32_t a, std::uint32_t b) { return estimate(a, b); }

BlockMoments block_moments(const SampleMatrix& samples, std::size_t num_blocks) {
    const std::size_t n = samples.rows();
    if (num_blocks < 1 || num_blocks > n) throw InvalidArgument("block count must be between 1 and the sample size");
    BlockMoments out;
    out.labels = samples.labels();
    for (std::size_t b = 0; b < num_blocks; ++b) {
        const std::size_t lo = block_start(n, num_blocks, b), hi = block_start(n, num_blocks, b + 1);
        const auto block = samples.data().middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
        out.second_moments.push_back(block.transpose() * block / static_cast<double>(hi - lo));
        out.block_sizes.push_back(hi - lo);
    }
    return out;
}

BlockMoments gaussian_block_moments(const CorrelationTree& ct, std::uint64_t total_samples, std::size_t num_blocks,
                                    std::uint64_t seed) {
    const Eigen::MatrixXd sigma = path_correlation(ct);
    const auto dim = sigma.rows();
    if (num_blocks < 1) throw InvalidArgument("need at least one block");
    if (total_samples / num_blocks < static_cast<std::uint64_t>(dim)) {
        throw InvalidArgument("each block needs at least as many samples as variables");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("model covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    BlockMoments out;
    out.labels = ct.tree().regular_labels();
    for (std::size_t b = 0; b < num_blocks; ++b) {
        const std::uint64_t lo = b * total_samples / num_blocks, hi = (b + 1) * total_samples / num_blocks;
        const std::uint64_t m = hi - lo;
        // Bartlett: W = L A A^T L^T with A lower triangular, A_ii^2 ~ chi^2(m - i), A_ij ~ N(0, 1).
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            std::chi_squared_distribution<double> chi2(static_cast<double>(m - static_cast<std::uint64_t>(i)));
            a(i, i) = std::sqrt(chi2(rng));
            for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
        }
        const Eigen::MatrixXd la = chol * a;
        out.second_moments.push_back(la * la.transpose() / static_cast<double>(m));
        out.block_sizes.push_back(m);
    }
    return out;
}

MomentOracle::MomentOracle(std::shared_ptr<const BlockMoments> moments)
    : DistanceOracle(moments ? moments->labels : std::vector<std::uint32_t>{}), moments_(std::move(moments)) {
    if (!moments_ || moments_->second_moments.empty()) throw InvalidArgument("moment oracle needs at least one block");
    for (std::size_t i = 0; i < moments_->labels.size(); ++i) index_.emplace(moments_->labels[i], i);
}

double MomentOracle::median_entry(std::size_t i, std::size_t j) const {
    std::vector<double> v;
    v.reserve(moments_->second_moments.size());
    for (const auto& m : moments_->second_moments) v.push_back(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    return median_in_place(v);
}

double MomentOracle::estimate(std::uint32_t a, std::uint32_t b) const {
    auto ia = index_.find(a), ib = index_.find(b);
    if (ia == index_.end() || ib == index_.end()) throw UnknownNode("label missing from the block moments");
    const double scale = std::sqrt(median_entry(ia->second, ia->second) * median_entry(ib->second, ib->second));
    if (!(scale > 0.0)) throw EstimateDegenerate("zero second moment");
    return rho_to_distance(median_entry(ia->second, ib->second) / scale, a, b);
}

double MomentOracle::native_distance(std::uint32_t a, std::uint32_t b) { return estimate(a, b); }

std::uint64_t required_sample_size(double kappa4, double u_max, double epsilon, double eta, std::size_t n) {
    if (!(kappa4 >= 1.0)) throw InvalidArgument("kappa4 must be >= 1");
    if (!(u_max >= 0.0) || !std::isfinite(u_max)) throw InvalidArgument("u_max must be finite and >= 0");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must be in (0, 1)");
    if (n < 2) throw InvalidArgument("n must be >= 2");
    const double delta = std::isinf(epsilon) ? 1.0 : -std::expm1(-epsilon);
    const double bound = 64.0 * kappa4 * std::log(static_cast<double>(n) / eta) / (std::exp(-2.0 * u_max) * delta * delta);
    if (!(bound < 9.2e18)) throw InvalidArgument("required sample size overflows");
    return static_cast<std::uint64_t>(std::ceil(bound));
}

} // namespace latree
