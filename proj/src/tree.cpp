#include "latree/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "canonical.hpp"
#include "latree/errors.hpp"

namespace latree {

SemiLabeledTree::SemiLabeledTree(std::vector<NodeId> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    if (nodes_.empty()) throw InvalidTree("tree has no nodes");
    index_.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i], i).second) {
            throw InvalidTree("duplicate node " + nodes_[i].to_string());
        }
        if (nodes_[i].is_regular()) ++regular_count_;
    }
    if (edges_.size() + 1 != nodes_.size()) {
        throw InvalidTree("a tree on " + std::to_string(nodes_.size()) + " nodes needs " +
                          std::to_string(nodes_.size() - 1) + " edges, got " + std::to_string(edges_.size()));
    }
    adjacency_.resize(nodes_.size());
    for (const Edge& e : edges_) {
        auto ia = index_.find(e.a);
        auto ib = index_.find(e.b);
        if (ia == index_.end() || ib == index_.end()) {
            throw InvalidTree("edge references unknown node");
        }
        if (ia->second == ib->second) throw InvalidTree("self loop at " + e.a.to_string());
        if (!(e.length > 0.0) || !std::isfinite(e.length)) {
            throw InvalidTree("edge " + e.a.to_string() + "-" + e.b.to_string() +
                              " has non-positive length");
        }
        adjacency_[ia->second].push_back({ib->second, e.length});
        adjacency_[ib->second].push_back({ia->second, e.length});
    }

    // |E| = |V| - 1 plus connectivity implies acyclic.
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (const Neighbor& nb : adjacency_[v]) {
            if (!seen[nb.node]) {
                seen[nb.node] = 1;
                ++reached;
                stack.push_back(nb.node);
            }
        }
    }
    if (reached != nodes_.size()) throw InvalidTree("tree is not connected");

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].is_latent() && adjacency_[i].size() < 3) {
            throw InvalidTree("latent node " + nodes_[i].to_string() + " has degree " +
                              std::to_string(adjacency_[i].size()) + " < 3");
        }
    }
    if (regular_count_ == 0) throw InvalidTree("tree has no regular nodes");
}

std::vector<std::uint32_t> SemiLabeledTree::regular_labels() const {
    std::vector<std::uint32_t> labels;
    labels.reserve(regular_count_);
    for (NodeId id : nodes_) {
        if (id.is_regular()) labels.push_back(id.value());
    }
    std::sort(labels.begin(), labels.end());
    return labels;
}

std::size_t SemiLabeledTree::index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode("node " + id.to_string() + " is not in the tree");
    return it->second;
}

std::size_t SemiLabeledTree::max_degree() const {
    std::size_t best = 0;
    for (const auto& adj : adjacency_) best = std::max(best, adj.size());
    return best;
}

double path_distance(const SemiLabeledTree& tree, NodeId u, NodeId v) {
    const std::size_t source = tree.index_of(u);
    const std::size_t target = tree.index_of(v);
    if (source == target) return 0.0;
    std::vector<double> dist(tree.node_count(), -1.0);
    std::vector<std::size_t> stack{source};
    dist[source] = 0.0;
    while (!stack.empty()) {
        std::size_t x = stack.back();
        stack.pop_back();
        if (x == target) return dist[x];
        for (const auto& nb : tree.neighbors(x)) {
            if (dist[nb.node] < 0.0) {
                dist[nb.node] = dist[x] + nb.length;
                stack.push_back(nb.node);
            }
        }
    }
    return dist[target];
}

PathMetric::PathMetric(const SemiLabeledTree& tree) : tree_(&tree) {
    const std::size_t n = tree.node_count();
    root_distance_.assign(n, 0.0);
    level_.assign(n, 0);
    first_visit_.assign(n, 0);

    std::vector<std::uint32_t> euler;
    euler.reserve(2 * n);
    // Iterative DFS emitting the Euler tour: a node is emitted on entry and
    // again after each child returns.
    struct Frame {
        std::size_t node;
        std::size_t parent;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({0, n, 0});
    first_visit_[0] = 0;
    euler.push_back(0);
    while (!stack.empty()) {
        Frame& f = stack.back();
        auto nbs = tree.neighbors(f.node);
        if (f.next < nbs.size()) {
            const auto nb = nbs[f.next++];
            if (nb.node == f.parent) continue;
            root_distance_[nb.node] = root_distance_[f.node] + nb.length;
            level_[nb.node] = level_[f.node] + 1;
            first_visit_[nb.node] = static_cast<std::uint32_t>(euler.size());
            euler.push_back(static_cast<std::uint32_t>(nb.node));
            stack.push_back({nb.node, f.node, 0});
        } else {
            stack.pop_back();
            if (!stack.empty()) euler.push_back(static_cast<std::uint32_t>(stack.back().node));
        }
    }

    const std::size_t m = euler.size();
    const std::size_t levels = std::bit_width(m);
    sparse_.resize(levels);
    sparse_[0] = std::move(euler);
    for (std::size_t k = 1; k < levels; ++k) {
        const std::size_t span = std::size_t{1} << k;
        const std::size_t half = span >> 1;
        sparse_[k].resize(m - span + 1);
        const auto& prev = sparse_[k - 1];
        for (std::size_t i = 0; i + span <= m; ++i) {
            const std::uint32_t a = prev[i];
            const std::uint32_t b = prev[i + half];
            sparse_[k][i] = level_[a] <= level_[b] ? a : b;
        }
    }
}

std::size_t PathMetric::lca(std::size_t i, std::size_t j) const {
    std::size_t lo = first_visit_[i];
    std::size_t hi = first_visit_[j];
    if (lo > hi) std::swap(lo, hi);
    const std::size_t k = std::bit_width(hi - lo + 1) - 1;
    const std::uint32_t a = sparse_[k][lo];
    const std::uint32_t b = sparse_[k][hi + 1 - (std::size_t{1} << k)];
    return level_[a] <= level_[b] ? a : b;
}

double PathMetric::distance(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return root_distance_[i] + root_distance_[j] - 2.0 * root_distance_[lca(i, j)];
}

DistanceMatrix::DistanceMatrix(std::vector<std::uint32_t> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
    const std::size_t n = labels_.size();
    if (values_.size() != n * n) {
        throw InvalidArgument("distance matrix over " + std::to_string(n) + " labels needs " +
                              std::to_string(n * n) + " values");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!index_.emplace(labels_[i], i).second) {
            throw InvalidArgument("duplicate label " + std::to_string(labels_[i]));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (at(i, i) != 0.0) throw InvalidArgument("nonzero diagonal entry for label " + std::to_string(labels_[i]));
        for (std::size_t j = i + 1; j < n; ++j) {
            const double x = at(i, j);
            if (!std::isfinite(x) || x < 0.0) {
                throw InvalidArgument("negative or non-finite distance between " + std::to_string(labels_[i]) +
                                      " and " + std::to_string(labels_[j]));
            }
            if (x != at(j, i)) {
                throw InvalidArgument("asymmetric entries for " + std::to_string(labels_[i]) + " and " +
                                      std::to_string(labels_[j]));
            }
        }
    }
}

std::size_t DistanceMatrix::index_of(std::uint32_t label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw UnknownNode("label " + std::to_string(label) + " is not in the matrix");
    return it->second;
}

double DistanceMatrix::min_off_diagonal() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = i + 1; j < size(); ++j) best = std::min(best, at(i, j));
    return best;
}

double DistanceMatrix::max_off_diagonal() const {
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = i + 1; j < size(); ++j) best = std::max(best, at(i, j));
    return best;
}

DistanceMatrix full_metric(const SemiLabeledTree& tree) {
    const PathMetric metric(tree);
    std::vector<std::uint32_t> labels = tree.regular_labels();
    const std::size_t n = labels.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = tree.index_of(NodeId::regular(labels[i]));
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = metric.distance(idx[i], idx[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    return DistanceMatrix(std::move(labels), std::move(values));
}

FourPointReport check_four_point(const DistanceMatrix& matrix, double tolerance, const FourPointOptions& options) {
    if (tolerance < 0.0) throw InvalidArgument("tolerance must be nonnegative");
    FourPointReport report;
    const std::size_t n = matrix.size();
    // Excess net of a rounding allowance proportional to the sums compared, so
    // tolerance 0 means exact up to floating-point error in the entries.
    constexpr double kGuard = 64 * std::numeric_limits<double>::epsilon();
    auto excess = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        const double lhs = matrix.at(i, j) + matrix.at(k, l);
        const double rhs = std::max(matrix.at(i, k) + matrix.at(j, l), matrix.at(i, l) + matrix.at(j, k));
        return lhs - rhs - kGuard * std::max(lhs, rhs);
    };
    auto record = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        const double e = excess(i, j, k, l);
        report.worst_excess = std::max(report.worst_excess, e);
        if (e > tolerance && !report.witness) {
            report.ok = false;
            const auto& lb = matrix.labels();
            report.witness = std::array<std::uint32_t, 4>{lb[i], lb[j], lb[k], lb[l]};
        }
    };

    if (n <= options.exhaustive_limit) {
        report.exhaustive = true;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t l = 0; l < n; ++l) record(i, j, k, l);
        report.quadruples_checked = static_cast<std::uint64_t>(n) * n * n * n;
    } else {
        report.exhaustive = false;
        std::mt19937_64 rng(options.seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::uint64_t s = 0; s < options.sampled_quadruples; ++s) {
            const std::size_t i = pick(rng), j = pick(rng), k = pick(rng), l = pick(rng);
            record(i, j, k, l);
        }
        report.quadruples_checked = options.sampled_quadruples;
    }
    return report;
}

double capped_latent_fraction(double fraction, std::size_t n) {
    if (n < 2) return 0.0;
    if (std::floor(fraction * static_cast<double>(n)) <= static_cast<double>(n) - 2.0) return fraction;
    return (static_cast<double>(n - 2) + 0.5) / static_cast<double>(n);
}

SemiLabeledTree random_tree(const RandomTreeParams& p) {
    if (p.n < 2) throw InvalidArgument("random_tree needs n >= 2");
    if (p.max_degree < 3) throw InvalidArgument("random_tree needs max_degree >= 3");
    if (!(p.length_lo > 0.0) || !(p.length_lo <= p.length_hi) || !std::isfinite(p.length_hi)) {
        throw InvalidArgument("length range must satisfy 0 < lo <= hi");
    }
    if (!(p.latent_fraction >= 0.0 && p.latent_fraction <= 1.0)) {
        throw InvalidArgument("latent_fraction must lie in [0, 1]");
    }
    const std::size_t latent_target = static_cast<std::size_t>(std::floor(p.latent_fraction * static_cast<double>(p.n)));
    // A semi-labeled tree on n regular nodes has at most n - 2 latent nodes.
    if (latent_target + 2 > p.n) {
        throw InvalidArgument("latent_fraction " + std::to_string(p.latent_fraction) + " asks for " +
                              std::to_string(latent_target) + " latent nodes, at most " +
                              std::to_string(p.n - 2) + " fit with n = " + std::to_string(p.n));
    }

    std::mt19937_64 rng(p.seed);
    const std::size_t m = p.n + latent_target;
    std::vector<std::vector<std::size_t>> adj(m);
    std::vector<std::size_t> open{0};  // nodes with degree < max_degree
    for (std::size_t v = 1; v < m; ++v) {
        std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
        const std::size_t slot = pick(rng);
        const std::size_t parent = open[slot];
        adj[parent].push_back(v);
        adj[v].push_back(parent);
        if (adj[parent].size() >= p.max_degree) {
            open[slot] = open.back();
            open.pop_back();
        }
        open.push_back(v);
    }

    // Latent nodes are drawn first from nodes that already branch.
    std::vector<std::size_t> branching, other;
    for (std::size_t v = 0; v < m; ++v) (adj[v].size() >= 3 ? branching : other).push_back(v);
    std::shuffle(branching.begin(), branching.end(), rng);
    std::shuffle(other.begin(), other.end(), rng);
    std::vector<char> latent(m, 0);
    std::size_t assigned = 0;
    for (std::size_t v : branching) {
        if (assigned == latent_target) break;
        latent[v] = 1;
        ++assigned;
    }
    for (std::size_t v : other) {
        if (assigned == latent_target) break;
        latent[v] = 1;
        ++assigned;
    }

    // Repair: drop latent leaves, contract latent nodes of degree two.
    std::vector<char> removed(m, 0);
    auto unlink = [&](std::size_t a, std::size_t b) {
        adj[a].erase(std::find(adj[a].begin(), adj[a].end(), b));
        adj[b].erase(std::find(adj[b].begin(), adj[b].end(), a));
    };
    std::vector<std::size_t> work;
    for (std::size_t v = 0; v < m; ++v)
        if (latent[v] && adj[v].size() <= 2) work.push_back(v);
    while (!work.empty()) {
        const std::size_t v = work.back();
        work.pop_back();
        if (removed[v] || adj[v].size() > 2) continue;
        if (adj[v].size() == 1) {
            const std::size_t u = adj[v][0];
            unlink(v, u);
            removed[v] = 1;
            if (latent[u] && adj[u].size() <= 2) work.push_back(u);
        } else if (adj[v].size() == 2) {
            const std::size_t a = adj[v][0];
            const std::size_t b = adj[v][1];
            unlink(v, a);
            unlink(v, b);
            adj[a].push_back(b);
            adj[b].push_back(a);
            removed[v] = 1;
        } else {
            removed[v] = 1;
        }
    }

    std::vector<std::uint32_t> labels(p.n);
    std::iota(labels.begin(), labels.end(), 1u);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<NodeId> ids(m);
    std::vector<NodeId> nodes;
    std::size_t next_label = 0;
    std::uint32_t next_latent = 1;
    for (std::size_t v = 0; v < m; ++v) {
        if (removed[v]) continue;
        ids[v] = latent[v] ? NodeId::latent(next_latent++) : NodeId::regular(labels[next_label++]);
        nodes.push_back(ids[v]);
    }

    std::uniform_real_distribution<double> length(p.length_lo, p.length_hi);
    std::vector<Edge> edges;
    edges.reserve(nodes.size() - 1);
    for (std::size_t v = 0; v < m; ++v) {
        if (removed[v]) continue;
        for (std::size_t u : adj[v]) {
            if (u > v) {
                const double len = p.length_lo == p.length_hi ? p.length_lo : length(rng);
                edges.push_back({ids[v], ids[u], len});
            }
        }
    }
    return SemiLabeledTree(std::move(nodes), std::move(edges));
}

namespace detail {

RootedOrder rooted_order(const SemiLabeledTree& tree) {
    const std::size_t n = tree.node_count();
    RootedOrder order;
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = 0; i < n; ++i) {
        const NodeId id = tree.node_at(i);
        if (id.is_regular() && id.value() <= best) {
            best = id.value();
            order.root = i;
        }
    }
    order.parent.assign(n, n);
    order.parent_length.assign(n, 0.0);
    order.children.assign(n, {});

    // BFS order gives parents; reverse BFS order gives subtree minima.
    std::vector<std::size_t> bfs{order.root};
    order.parent[order.root] = order.root;
    for (std::size_t head = 0; head < bfs.size(); ++head) {
        const std::size_t v = bfs[head];
        for (const auto& nb : tree.neighbors(v)) {
            if (order.parent[nb.node] == n) {
                order.parent[nb.node] = v;
                order.parent_length[nb.node] = nb.length;
                order.children[v].push_back(nb.node);
                bfs.push_back(nb.node);
            }
        }
    }
    std::vector<std::uint32_t> min_label(n, std::numeric_limits<std::uint32_t>::max());
    for (auto it = bfs.rbegin(); it != bfs.rend(); ++it) {
        const std::size_t v = *it;
        const NodeId id = tree.node_at(v);
        if (id.is_regular()) min_label[v] = std::min(min_label[v], id.value());
        if (v != order.root) {
            const std::size_t p = order.parent[v];
            min_label[p] = std::min(min_label[p], min_label[v]);
        }
    }
    for (auto& ch : order.children) {
        std::sort(ch.begin(), ch.end(), [&](std::size_t a, std::size_t b) { return min_label[a] < min_label[b]; });
    }
    std::vector<std::size_t> stack{order.root};
    order.preorder.reserve(n);
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        order.preorder.push_back(v);
        const auto& ch = order.children[v];
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return order;
}

} // namespace detail

namespace {

// Walks both canonical preorders in lockstep; returns nullopt on any
// structural or label mismatch, otherwise the largest length difference.
std::optional<double> compare_canonical(const SemiLabeledTree& a, const SemiLabeledTree& b) {
    if (a.node_count() != b.node_count() || a.regular_count() != b.regular_count()) return std::nullopt;
    const auto oa = detail::rooted_order(a);
    const auto ob = detail::rooted_order(b);
    double worst = 0.0;
    for (std::size_t k = 0; k < oa.preorder.size(); ++k) {
        const std::size_t va = oa.preorder[k];
        const std::size_t vb = ob.preorder[k];
        const NodeId ia = a.node_at(va);
        const NodeId ib = b.node_at(vb);
        if (ia.is_regular() != ib.is_regular()) return std::nullopt;
        if (ia.is_regular() && ia.value() != ib.value()) return std::nullopt;
        if (oa.children[va].size() != ob.children[vb].size()) return std::nullopt;
        worst = std::max(worst, std::abs(oa.parent_length[va] - ob.parent_length[vb]));
    }
    return worst;
}

} // namespace

bool trees_isomorphic(const SemiLabeledTree& a, const SemiLabeledTree& b, double length_tolerance) {
    const auto diff = compare_canonical(a, b);
    return diff && *diff <= length_tolerance;
}

std::optional<double> max_length_difference(const SemiLabeledTree& a, const SemiLabeledTree& b) {
    return compare_canonical(a, b);
}

} // namespace latree
