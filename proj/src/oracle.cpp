#include "latree/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latree/errors.hpp"

namespace latree {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

DistanceOracle::DistanceOracle(std::vector<std::uint32_t> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end()) {
        throw InvalidArgument("oracle labels must be distinct");
    }
}

double DistanceOracle::query(NodeId u, NodeId v) {
    if (u == v) return 0.0;
    const std::uint64_t key = pair_key(u, v);
    if (u.is_regular() && v.is_regular()) {
        if (auto it = native_.find(key); it != native_.end()) return it->second;
        const double d = native_distance(u.value(), v.value());
        native_.emplace(key, d);
        ++query_count_;
        return d;
    }
    if (auto it = stored_.find(key); it != stored_.end()) return it->second;
    throw UnknownNode("no stored distance between " + u.to_string() + " and " + v.to_string());
}

void DistanceOracle::store(NodeId u, NodeId v, double value) {
    if (u.is_regular() && v.is_regular()) {
        throw InvalidArgument("cannot store over the native pair " + u.to_string() + ", " + v.to_string());
    }
    if (u == v) return;
    for (NodeId x : {u, v}) {
        if (x.is_latent() && x.value() >= latent_depth_.size()) {
            throw UnknownNode("latent node " + x.to_string() + " was not allocated by this oracle");
        }
    }
    stored_[pair_key(u, v)] = value;
}

std::optional<double> DistanceOracle::lookup(NodeId u, NodeId v) const {
    if (u == v) return 0.0;
    const std::uint64_t key = pair_key(u, v);
    const auto& table = (u.is_regular() && v.is_regular()) ? native_ : stored_;
    if (auto it = table.find(key); it != table.end()) return it->second;
    return std::nullopt;
}

NodeId DistanceOracle::make_latent(int depth) {
    const auto id = static_cast<std::uint32_t>(latent_depth_.size());
    latent_depth_.push_back(depth);
    return NodeId::latent(id);
}

int DistanceOracle::derivation_depth(NodeId v) const {
    if (v.is_regular()) return 0;
    if (v.value() >= latent_depth_.size()) throw UnknownNode("unknown latent node " + v.to_string());
    return latent_depth_[v.value()];
}

std::vector<NodeId> DistanceOracle::known_nodes() const {
    std::vector<NodeId> out;
    out.reserve(labels_.size() + latent_depth_.size());
    for (auto l : labels_) out.push_back(NodeId::regular(l));
    for (std::uint32_t i = 0; i < latent_depth_.size(); ++i) out.push_back(NodeId::latent(i));
    return out;
}

std::vector<DistanceOracle::StoredDistance> DistanceOracle::stored_distances() const {
    std::vector<StoredDistance> out;
    out.reserve(stored_.size());
    for (const auto& [key, value] : stored_) {
        out.push_back({NodeId::from_raw(static_cast<std::uint32_t>(key >> 32)),
                       NodeId::from_raw(static_cast<std::uint32_t>(key & 0xffffffffu)), value});
    }
    std::sort(out.begin(), out.end(), [](const StoredDistance& x, const StoredDistance& y) {
        return pair_key(x.a, x.b) < pair_key(y.a, y.b);
    });
    return out;
}

std::vector<DistanceOracle::StoredDistance> DistanceOracle::queried_distances() const {
    std::vector<StoredDistance> out;
    out.reserve(native_.size());
    for (const auto& [key, value] : native_) {
        out.push_back({NodeId::from_raw(static_cast<std::uint32_t>(key >> 32)),
                       NodeId::from_raw(static_cast<std::uint32_t>(key & 0xffffffffu)), value});
    }
    return out;
}

ExactOracle::ExactOracle(SemiLabeledTree tree)
    : DistanceOracle(tree.regular_labels()), tree_(std::move(tree)), metric_(tree_) {}

double ExactOracle::native_distance(std::uint32_t a, std::uint32_t b) {
    return metric_.distance(NodeId::regular(a), NodeId::regular(b));
}

MatrixOracle::MatrixOracle(DistanceMatrix matrix) : DistanceOracle(matrix.labels()), matrix_(std::move(matrix)) {}

double MatrixOracle::native_distance(std::uint32_t a, std::uint32_t b) { return matrix_.between(a, b); }

NoisyOracle::NoisyOracle(std::shared_ptr<DistanceOracle> base, double epsilon, NoiseMode mode, std::uint64_t seed)
    : DistanceOracle(base ? base->labels() : std::vector<std::uint32_t>{}),
      base_(std::move(base)), epsilon_(epsilon), mode_(mode), seed_(seed) {
    if (!base_) throw InvalidArgument("noisy oracle needs a base oracle");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and >= 0");
}

double NoisyOracle::perturbation(std::uint32_t a, std::uint32_t b) const {
    if (epsilon_ == 0.0) return 0.0;
    const std::uint64_t bits = splitmix64(seed_ ^ splitmix64(pair_key(NodeId::regular(a), NodeId::regular(b))));
    if (mode_ == NoiseMode::adversarial_max) return (bits & 1u) ? epsilon_ : -epsilon_;
    const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
    return (2.0 * unit - 1.0) * epsilon_;
}

double NoisyOracle::native_distance(std::uint32_t a, std::uint32_t b) {
    return base_->query(NodeId::regular(a), NodeId::regular(b)) + perturbation(a, b);
}

std::shared_ptr<ExactOracle> exact_oracle(SemiLabeledTree tree) { return std::make_shared<ExactOracle>(std::move(tree)); }

std::shared_ptr<MatrixOracle> matrix_oracle(DistanceMatrix matrix) {
    return std::make_shared<MatrixOracle>(std::move(matrix));
}

std::shared_ptr<NoisyOracle> noisy_oracle(std::shared_ptr<DistanceOracle> base, double epsilon, NoiseMode mode,
                                          std::uint64_t seed) {
    return std::make_shared<NoisyOracle>(std::move(base), epsilon, mode, seed);
}

NoiseBudget make_noise_budget(double epsilon, double ell, double u_max) {
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
    if (!(ell > 0.0) || !(ell <= u_max)) throw InvalidArgument("noise budget needs 0 < ell <= u_max");
    return NoiseBudget{epsilon, ell, u_max};
}

NoiseBudget make_noise_budget(double epsilon, const DistanceMatrix& metric) {
    return make_noise_budget(epsilon, metric.min_off_diagonal(), metric.max_off_diagonal());
}

} // namespace latree
