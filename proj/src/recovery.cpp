#include "latree/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "engine.hpp"
#include "latree/errors.hpp"

namespace latree {

bool Bag::contains(NodeId v) const { return std::find(members.begin(), members.end(), v) != members.end(); }

Bag make_bag(std::vector<NodeId> members, NodeId representative) {
    if (members.empty()) throw InvalidArgument("bag must be non-empty");
    auto it = std::find(members.begin(), members.end(), representative);
    if (it == members.end()) throw InvalidArgument("bag representative " + representative.to_string() + " is not a member");
    std::rotate(members.begin(), it, it + 1);
    std::unordered_set<NodeId> seen(members.begin(), members.end());
    if (seen.size() != members.size()) throw InvalidArgument("bag members must be distinct");
    return Bag{std::move(members), representative};
}

bool BigsplitIteration::accepted() const {
    const double m = static_cast<double>(largest);
    const double b = static_cast<double>(bag_size);
    return m * m * delta <= b * b;
}

bool BigsplitIteration::large_bag_event() const {
    if (largest == 0) return false;
    const double m = static_cast<double>(largest) - 1.0;
    const double b = static_cast<double>(bag_size);
    return m * m * delta >= b * b;
}

std::vector<NodeId> sample_probes(const Bag& bag, std::size_t k, std::mt19937_64& rng) {
    std::vector<NodeId> pool;
    pool.reserve(bag.members.size());
    for (NodeId v : bag.members) {
        if (v != bag.representative) pool.push_back(v);
    }
    if (k > pool.size()) throw InvalidArgument("not enough members to sample probes from");
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

namespace detail {

double NoiseModel::node_error(const DistanceOracle& oracle, NodeId v) const {
    if (epsilon == 0.0) return 0.0;
    return (1.0 + 0.5 * oracle.derivation_depth(v)) * epsilon;
}

void inconsistent(const NoiseModel& noise, const std::string& what) {
    if (noise.noisy) throw NoiseTooLarge(what);
    throw NotATreeMetric(what);
}

BasicResult basic_impl(const Bag& bag, NodeId alpha, DistanceOracle& oracle, const NoiseModel& noise) {
    const NodeId rho = bag.representative;
    if (alpha == rho) throw InvalidArgument("probe equals the bag representative");
    if (!alpha.is_regular()) throw InvalidArgument("probe must be a regular node");
    if (!bag.contains(alpha)) throw InvalidArgument("probe " + alpha.to_string() + " is not in the bag");

    const std::size_t m = bag.members.size();
    std::vector<double> da(m), dr(m), key(m);
    for (std::size_t i = 0; i < m; ++i) {
        da[i] = oracle.query(bag.members[i], alpha);
        dr[i] = oracle.query(bag.members[i], rho);
        key[i] = da[i] - dr[i];
    }
    const double d_ar = oracle.query(alpha, rho);

    const double e_rho = noise.node_error(oracle, rho);
    const double eps = noise.epsilon;
    const double tol = noise.tolerance;
    const double group_threshold = 2.0 * eps + 2.0 * e_rho + tol;
    const double path_threshold = eps + 2.0 * e_rho + tol;
    const int child_depth = oracle.derivation_depth(rho) + 1;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key[x] < key[y]; });

    // Single-linkage on the line: a new group starts where the gap exceeds the threshold.
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t pos = 0; pos < m; ++pos) {
        const std::size_t i = order[pos];
        if (pos == 0 || key[i] - key[order[pos - 1]] > group_threshold) groups.emplace_back();
        groups.back().push_back(i);
    }
    if (noise.noisy && noise.ell > 0.0) {
        for (const auto& g : groups) {
            const double span = key[g.back()] - key[g.front()];
            if (span > group_threshold + 2.0 * noise.ell) {
                throw NoiseTooLarge("grouping chain spans " + std::to_string(span) + ", beyond the noise threshold");
            }
        }
    }

    BasicResult result;
    result.bags.reserve(groups.size());
    std::vector<double> position;
    position.reserve(groups.size());
    for (auto& g : groups) {
        std::sort(g.begin(), g.end());  // original bag order
        bool has_alpha = false, has_rho = false;
        for (std::size_t i : g) {
            has_alpha |= bag.members[i] == alpha;
            has_rho |= bag.members[i] == rho;
        }
        if (has_alpha && has_rho) inconsistent(noise, "probe and representative fall into one group");

        std::size_t u = g.front();
        for (std::size_t i : g) {
            if (da[i] < da[u]) u = i;
        }
        if (has_alpha) u = std::distance(bag.members.begin(), std::find(bag.members.begin(), bag.members.end(), alpha));
        if (has_rho) u = 0;

        Bag out;
        out.members.reserve(g.size() + 1);
        if (has_alpha || has_rho || std::abs(dr[u] + da[u] - d_ar) <= path_threshold) {
            const NodeId rep = bag.members[u];
            out.representative = rep;
            out.members.push_back(rep);
            for (std::size_t i : g) {
                if (i == u) continue;
                out.members.push_back(bag.members[i]);
                // Distances from the new representative; alpha and rho already have theirs.
                if (!has_alpha && !has_rho) oracle.query(bag.members[i], rep);
            }
            position.push_back(has_rho ? d_ar : da[u]);
        } else {
            const NodeId w = oracle.make_latent(child_depth);
            out.representative = w;
            out.members.push_back(w);
            double to_u = 0.0;
            for (std::size_t i : g) {
                const double value = 0.5 * (da[i] + dr[i] - d_ar);
                if (!(value > (noise.noisy ? 0.0 : tol))) {
                    inconsistent(noise, "non-positive synthesized distance to " + bag.members[i].to_string());
                }
                oracle.store(w, bag.members[i], value);
                out.members.push_back(bag.members[i]);
                if (i == u) to_u = value;
            }
            position.push_back(da[u] - to_u);
        }
        result.bags.push_back(std::move(out));
    }

    result.edges.reserve(result.bags.size() - 1);
    for (std::size_t i = 0; i + 1 < result.bags.size(); ++i) {
        const double length = position[i + 1] - position[i];
        if (!(length > (noise.noisy ? 0.0 : tol))) {
            inconsistent(noise, "non-positive path edge length " + std::to_string(length));
        }
        result.edges.push_back({result.bags[i].representative, result.bags[i + 1].representative, length});
    }
    return result;
}

std::vector<Bag> explode_impl(const Bag& bag, DistanceOracle& oracle, int max_subtrees, const NoiseModel& noise) {
    const NodeId rho = bag.representative;
    std::vector<NodeId> rest;
    rest.reserve(bag.members.size());
    for (NodeId v : bag.members) {
        if (v != rho) rest.push_back(v);
    }
    std::vector<double> to_rho(rest.size());
    for (std::size_t i = 0; i < rest.size(); ++i) to_rho[i] = oracle.query(rest[i], rho);

    const double threshold = 2.0 * noise.node_error(oracle, rho) + noise.epsilon + noise.tolerance;
    std::vector<char> taken(rest.size(), 0);
    std::vector<Bag> out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (taken[i]) continue;
        taken[i] = 1;
        Bag b;
        b.representative = rho;
        b.members = {rho, rest[i]};
        for (std::size_t j = i + 1; j < rest.size(); ++j) {
            if (taken[j]) continue;
            const double slack = to_rho[i] + to_rho[j] - oracle.query(rest[i], rest[j]);
            if (slack > threshold) {
                taken[j] = 1;
                b.members.push_back(rest[j]);
            }
        }
        out.push_back(std::move(b));
        if (max_subtrees > 0 && out.size() > static_cast<std::size_t>(max_subtrees)) {
            throw InvalidDelta("node " + rho.to_string() + " has more than " + std::to_string(max_subtrees) +
                               " subtrees");
        }
    }
    return out;
}

BigsplitResult bigsplit_impl(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle, int delta,
                             std::mt19937_64& rng, int max_retries, const NoiseModel& noise) {
    if (delta < 2) throw InvalidArgument("delta must be at least 2");
    const std::size_t kappa = probes.size();
    if (kappa == 0) throw InvalidArgument("bigsplit needs at least one probe");
    if (bag.size() < kappa + 1) throw InvalidArgument("bag is too small for the number of probes");
    {
        std::unordered_set<NodeId> distinct(probes.begin(), probes.end());
        if (distinct.size() != kappa) throw InvalidArgument("probes must be distinct");
        for (NodeId p : probes) {
            if (p == bag.representative || !bag.contains(p)) {
                throw InvalidArgument("probe " + p.to_string() + " must be a non-representative bag member");
            }
        }
    }

    BigsplitResult result;
    for (;;) {
        if (++result.retries > max_retries) throw Error("bigsplit exceeded its retry limit");
        std::vector<Bag> current{bag};
        Skeleton edges;
        for (NodeId p : probes) {
            auto owner = std::find_if(current.begin(), current.end(), [&](const Bag& b) { return b.contains(p); });
            if (owner == current.end()) throw Error("probe lost during bigsplit");
            if (owner->representative == p) continue;
            BasicResult split = basic_impl(*owner, p, oracle, noise);
            current.erase(owner);
            for (auto& b : split.bags) current.push_back(std::move(b));
            edges.insert(edges.end(), split.edges.begin(), split.edges.end());
        }
        std::vector<Bag> exploded;
        for (const Bag& b : current) {
            if (b.size() < 2) continue;
            for (auto& part : explode_impl(b, oracle, delta, noise)) exploded.push_back(std::move(part));
        }
        std::size_t largest = 0;
        for (const Bag& b : exploded) largest = std::max(largest, b.size());

        BigsplitIteration it{bag.size(), largest, delta};
        result.iterations.push_back(it);
        if (it.accepted()) {
            result.edges = std::move(edges);
            result.bags = std::move(exploded);
            return result;
        }
        probes = sample_probes(bag, kappa, rng);
    }
}

namespace {

// Mutable tree used while inserting the members of a small bag.
struct LocalTree {
    std::vector<NodeId> ids;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;

    std::size_t add(NodeId id) {
        ids.push_back(id);
        adj.emplace_back();
        return ids.size() - 1;
    }
    void link(std::size_t a, std::size_t b, double length) {
        adj[a].push_back({b, length});
        adj[b].push_back({a, length});
    }
    void unlink(std::size_t a, std::size_t b) {
        std::erase_if(adj[a], [&](const auto& e) { return e.first == b; });
        std::erase_if(adj[b], [&](const auto& e) { return e.first == a; });
    }
    // Node sequence from a to b with cumulative distances from a.
    void path(std::size_t a, std::size_t b, std::vector<std::size_t>& nodes, std::vector<double>& cum) const {
        std::vector<std::size_t> parent(ids.size(), ids.size());
        std::vector<double> plen(ids.size(), 0.0);
        std::vector<std::size_t> stack{a};
        parent[a] = a;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            if (x == b) break;
            for (auto [y, len] : adj[x]) {
                if (parent[y] != ids.size()) continue;
                parent[y] = x;
                plen[y] = len;
                stack.push_back(y);
            }
        }
        nodes.clear();
        std::vector<double> lens;
        for (std::size_t x = b; x != a; x = parent[x]) {
            nodes.push_back(x);
            lens.push_back(plen[x]);
        }
        nodes.push_back(a);
        std::reverse(nodes.begin(), nodes.end());
        std::reverse(lens.begin(), lens.end());
        cum.assign(nodes.size(), 0.0);
        for (std::size_t i = 1; i < nodes.size(); ++i) cum[i] = cum[i - 1] + lens[i - 1];
    }
};

} // namespace

Skeleton small_bag_impl(const Bag& bag, DistanceOracle& oracle, const NoiseModel& noise) {
    const std::size_t m = bag.members.size();
    if (m < 2) return {};
    const NodeId anchor = bag.representative;
    std::vector<NodeId> order;
    order.reserve(m);
    order.push_back(anchor);
    for (NodeId v : bag.members) {
        if (v != anchor) order.push_back(v);
    }
    // Query every pair up front.
    std::vector<double> d(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) d[i * m + j] = d[j * m + i] = oracle.query(order[i], order[j]);
    }
    auto dist = [&](std::size_t i, std::size_t j) { return d[i * m + j]; };

    const double snap = noise.noisy ? noise.epsilon + 2.0 * noise.node_error(oracle, anchor) + noise.tolerance
                                    : noise.tolerance;
    const int latent_depth = oracle.derivation_depth(anchor) + 1;

    LocalTree local;
    std::vector<std::size_t> slot(m);  // member index -> local node
    slot[0] = local.add(order[0]);
    if (!(dist(0, 1) > snap)) inconsistent(noise, "two bag members coincide");
    slot[1] = local.add(order[1]);
    local.link(slot[0], slot[1], dist(0, 1));

    std::vector<std::size_t> path_nodes;
    std::vector<double> cum;
    for (std::size_t x = 2; x < m; ++x) {
        double best_t = -std::numeric_limits<double>::infinity();
        std::size_t best_b = 1;
        for (std::size_t b = 1; b < x; ++b) {
            const double t = 0.5 * (dist(0, x) + dist(0, b) - dist(x, b));
            if (t > best_t) {
                best_t = t;
                best_b = b;
            }
        }
        local.path(slot[0], slot[best_b], path_nodes, cum);
        const double t = std::clamp(best_t, 0.0, cum.back());
        const double pendant = dist(0, x) - t;

        std::size_t at = path_nodes.size();  // index into path_nodes when snapping to a node
        std::size_t edge = 0;                // otherwise the edge (edge, edge + 1)
        for (std::size_t k = 0; k < path_nodes.size(); ++k) {
            if (std::abs(cum[k] - t) <= snap) {
                at = k;
                break;
            }
        }
        if (at == path_nodes.size()) {
            while (edge + 1 < path_nodes.size() && cum[edge + 1] < t) ++edge;
        }

        if (pendant <= snap) {
            if (at != path_nodes.size()) {
                const std::size_t p = path_nodes[at];
                if (local.ids[p].is_regular()) inconsistent(noise, "two bag members coincide");
                local.ids[p] = order[x];
                slot[x] = p;
            } else {
                const std::size_t a = path_nodes[edge], b = path_nodes[edge + 1];
                slot[x] = local.add(order[x]);
                local.unlink(a, b);
                local.link(a, slot[x], t - cum[edge]);
                local.link(slot[x], b, cum[edge + 1] - t);
            }
            continue;
        }
        std::size_t hub;
        if (at != path_nodes.size()) {
            hub = path_nodes[at];
        } else {
            const std::size_t a = path_nodes[edge], b = path_nodes[edge + 1];
            hub = local.add(oracle.make_latent(latent_depth));
            local.unlink(a, b);
            local.link(a, hub, t - cum[edge]);
            local.link(hub, b, cum[edge + 1] - t);
        }
        slot[x] = local.add(order[x]);
        local.link(hub, slot[x], pendant);
    }

    if (!noise.noisy) {
        // Every pairwise distance must be reproduced by the local tree.
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                local.path(slot[i], slot[j], path_nodes, cum);
                const double scale = std::max(1.0, dist(i, j));
                if (std::abs(cum.back() - dist(i, j)) > 1e3 * noise.tolerance * scale) {
                    throw NotATreeMetric("distances within a bag are not a tree metric (" + order[i].to_string() +
                                         ", " + order[j].to_string() + ")");
                }
            }
        }
    }

    Skeleton out;
    for (std::size_t a = 0; a < local.ids.size(); ++a) {
        for (auto [b, len] : local.adj[a]) {
            if (a < b) out.push_back({local.ids[a], local.ids[b], len});
        }
    }
    return out;
}

RecoveryResult recover_impl(DistanceOracle& oracle, std::span<const std::uint32_t> labels_in, int delta,
                            const RecoverOptions& options, const NoiseModel& noise, int round_budget) {
    if (delta < 2) throw InvalidArgument("delta must be at least 2");
    std::vector<std::uint32_t> labels(labels_in.begin(), labels_in.end());
    std::sort(labels.begin(), labels.end());
    if (labels.empty()) throw InvalidArgument("no labels to recover");
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
        throw InvalidArgument("labels must be distinct");
    }

    RecoveryStats stats;
    std::mt19937_64 rng(options.seed);
    const std::size_t kappa = static_cast<std::size_t>(delta);

    std::vector<NodeId> all;
    all.reserve(labels.size());
    for (auto l : labels) all.push_back(NodeId::regular(l));
    const NodeId root = all.front();

    Skeleton skeleton;
    std::deque<std::pair<Bag, int>> queue;
    queue.emplace_back(Bag{std::move(all), root}, 1);
    while (!queue.empty()) {
        auto [bag, level] = std::move(queue.front());
        queue.pop_front();
        if (stats.max_bag_trajectory.size() < static_cast<std::size_t>(level)) stats.max_bag_trajectory.resize(level, 0);
        stats.max_bag_trajectory[level - 1] = std::max(stats.max_bag_trajectory[level - 1], bag.size());

        if (bag.size() <= kappa) {
            if (bag.size() >= 2) {
                Skeleton part = small_bag_impl(bag, oracle, noise);
                skeleton.insert(skeleton.end(), part.begin(), part.end());
                stats.final_bag_sizes.push_back(bag.size());
            }
            continue;
        }
        if (round_budget > 0 && level > round_budget) {
            throw RoundBudgetExceeded("recovery needs more than " + std::to_string(round_budget) + " rounds");
        }
        std::vector<NodeId> probes = sample_probes(bag, kappa, rng);
        BigsplitResult split =
            bigsplit_impl(bag, std::move(probes), oracle, delta, rng, options.max_bigsplit_retries, noise);
        stats.rounds = std::max(stats.rounds, level);
        stats.bigsplit_retries.push_back(split.retries);
        stats.iterations.insert(stats.iterations.end(), split.iterations.begin(), split.iterations.end());
        skeleton.insert(skeleton.end(), split.edges.begin(), split.edges.end());
        for (auto& b : split.bags) queue.emplace_back(std::move(b), level + 1);
    }

    std::optional<SemiLabeledTree> tree;
    if (skeleton.empty()) {
        tree.emplace(std::vector<NodeId>{root}, std::vector<Edge>{});
    } else {
        try {
            tree.emplace(assemble(skeleton));
        } catch (const InvalidTree& e) {
            inconsistent(noise, std::string("recovered skeleton is not a tree: ") + e.what());
        }
    }
    if (tree->regular_labels() != labels) inconsistent(noise, "recovered tree does not span every label");

    for (NodeId v : tree->nodes()) stats.max_derivation_depth = std::max(stats.max_derivation_depth, oracle.derivation_depth(v));

    if (!noise.noisy && options.verify) {
        const PathMetric metric(*tree);
        for (const auto& q : oracle.queried_distances()) {
            if (!tree->contains(q.a) || !tree->contains(q.b)) continue;
            if (std::abs(metric.distance(q.a, q.b) - q.value) > options.verify_tolerance) {
                throw NotATreeMetric("recovered tree disagrees with d(" + q.a.to_string() + ", " + q.b.to_string() +
                                     ")");
            }
        }
    }
    stats.query_count = oracle.query_count();
    return RecoveryResult{std::move(*tree), std::move(stats)};
}

} // namespace detail

namespace {

detail::NoiseModel exact_model(double tolerance) {
    detail::NoiseModel noise;
    noise.tolerance = tolerance;
    return noise;
}

} // namespace

BasicResult basic(const Bag& bag, NodeId alpha, DistanceOracle& oracle, double tolerance) {
    return detail::basic_impl(bag, alpha, oracle, exact_model(tolerance));
}

std::vector<Bag> explode(const Bag& bag, DistanceOracle& oracle, int max_subtrees, double tolerance) {
    return detail::explode_impl(bag, oracle, max_subtrees, exact_model(tolerance));
}

BigsplitResult bigsplit(const Bag& bag, std::vector<NodeId> probes, DistanceOracle& oracle, int delta,
                        std::mt19937_64& rng, const RecoverOptions& options) {
    return detail::bigsplit_impl(bag, std::move(probes), oracle, delta, rng, options.max_bigsplit_retries,
                                 exact_model(options.tolerance));
}

Skeleton small_bag_reconstruct(const Bag& bag, DistanceOracle& oracle, double tolerance) {
    return detail::small_bag_impl(bag, oracle, exact_model(tolerance));
}

SemiLabeledTree assemble(const Skeleton& skeleton) {
    if (skeleton.empty()) throw InvalidTree("empty skeleton");
    std::vector<NodeId> ids;
    std::unordered_map<NodeId, std::size_t> index;
    auto slot = [&](NodeId v) {
        auto [it, inserted] = index.emplace(v, ids.size());
        if (inserted) ids.push_back(v);
        return it->second;
    };
    std::vector<std::array<std::size_t, 2>> ends;
    std::vector<double> lengths;
    for (const auto& e : skeleton) {
        if (e.a == e.b) throw InvalidTree("skeleton contains a self-loop at " + e.a.to_string());
        ends.push_back({slot(e.a), slot(e.b)});
        lengths.push_back(e.length);
    }

    // Union-find rejects cycles and duplicate edges.
    std::vector<std::size_t> parent(ids.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : ends) {
        const std::size_t ra = find(a), rb = find(b);
        if (ra == rb) throw InvalidTree("skeleton contains a cycle");
        parent[ra] = rb;
    }

    // Adjacency keyed by edge id so contraction can retire edges in place.
    std::vector<std::vector<std::size_t>> incident(ids.size());
    std::vector<char> alive(ends.size(), 1);
    for (std::size_t e = 0; e < ends.size(); ++e) {
        incident[ends[e][0]].push_back(e);
        incident[ends[e][1]].push_back(e);
    }
    auto live_edges = [&](std::size_t v) {
        std::vector<std::size_t> out;
        for (std::size_t e : incident[v]) {
            if (alive[e]) out.push_back(e);
        }
        return out;
    };
    std::vector<char> removed(ids.size(), 0);
    for (std::size_t v = 0; v < ids.size(); ++v) {
        if (ids[v].is_regular()) continue;
        const auto live = live_edges(v);
        if (live.size() == 1) throw InvalidTree("latent node " + ids[v].to_string() + " is a leaf");
        if (live.size() != 2) continue;
        const std::size_t e1 = live[0], e2 = live[1];
        const std::size_t a = ends[e1][0] == v ? ends[e1][1] : ends[e1][0];
        const std::size_t b = ends[e2][0] == v ? ends[e2][1] : ends[e2][0];
        alive[e1] = alive[e2] = 0;
        removed[v] = 1;
        ends.push_back({a, b});
        lengths.push_back(lengths[e1] + lengths[e2]);
        alive.push_back(1);
        incident[a].push_back(ends.size() - 1);
        incident[b].push_back(ends.size() - 1);
    }

    std::vector<NodeId> nodes;
    for (std::size_t v = 0; v < ids.size(); ++v) {
        if (!removed[v]) nodes.push_back(ids[v]);
    }
    std::vector<Edge> edges;
    for (std::size_t e = 0; e < ends.size(); ++e) {
        if (alive[e]) edges.push_back({ids[ends[e][0]], ids[ends[e][1]], lengths[e]});
    }
    return SemiLabeledTree(std::move(nodes), std::move(edges));
}

RecoveryResult recover(DistanceOracle& oracle, std::span<const std::uint32_t> labels, int delta,
                       const RecoverOptions& options) {
    return detail::recover_impl(oracle, labels, delta, options, exact_model(options.tolerance), 0);
}

RecoveryResult recover(DistanceOracle& oracle, int delta, const RecoverOptions& options) {
    return recover(oracle, oracle.labels(), delta, options);
}

} // namespace latree
