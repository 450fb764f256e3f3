#pragma once

// Shared fixtures and brute-force reference implementations for the unit tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "latree/tree.hpp"

namespace fixtures {

using latree::Edge;
using latree::NodeId;
using latree::SemiLabeledTree;

inline NodeId R(std::uint32_t label) { return NodeId::regular(label); }
inline NodeId H(std::uint32_t id) { return NodeId::latent(id); }

// Quartet: 1-a 2, 2-a 3.5, a-b 5, b-3 2.5, b-4 1.
inline SemiLabeledTree quartet() {
    return SemiLabeledTree({R(1), R(2), R(3), R(4), H(0), H(1)},
                           {{R(1), H(0), 2.0}, {R(2), H(0), 3.5}, {H(0), H(1), 5.0}, {H(1), R(3), 2.5}, {H(1), R(4), 1.0}});
}

inline std::vector<double> quartet_matrix_values() {
    return {0, 5.5, 9.5, 8, 5.5, 0, 11, 9.5, 9.5, 11, 0, 3.5, 8, 9.5, 3.5, 0};
}

// Quartet plus a regular node 5 hanging off 4 (length 1.5), so 4 has degree 2.
inline SemiLabeledTree five_node_tree() {
    return SemiLabeledTree({R(1), R(2), R(3), R(4), R(5), H(0), H(1)},
                           {{R(1), H(0), 2.0}, {R(2), H(0), 3.5}, {H(0), H(1), 5.0}, {H(1), R(3), 2.5},
                            {H(1), R(4), 1.0}, {R(4), R(5), 1.5}});
}

// All-pairs path lengths by Floyd-Warshall over the edge list.
inline std::map<std::pair<NodeId, NodeId>, double> all_pairs(const SemiLabeledTree& t) {
    const auto nodes = t.nodes();
    const std::size_t n = nodes.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(n * n, inf);
    std::map<NodeId, std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) idx[nodes[i]] = i;
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
    for (const auto& e : t.edges()) {
        const auto a = idx[e.a], b = idx[e.b];
        d[a * n + b] = d[b * n + a] = e.length;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
    std::map<std::pair<NodeId, NodeId>, double> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[{nodes[i], nodes[j]}] = d[i * n + j];
    return out;
}

// Checks every structural invariant of a semi-labeled tree from scratch.
inline bool valid_semi_labeled(const SemiLabeledTree& t, std::size_t max_degree) {
    std::map<NodeId, int> degree;
    for (auto v : t.nodes()) degree[v] = 0;
    for (const auto& e : t.edges()) {
        if (!(e.length > 0)) return false;
        ++degree[e.a];
        ++degree[e.b];
    }
    if (t.edges().size() + 1 != t.nodes().size()) return false;
    std::size_t regular = 0;
    for (auto [v, d] : degree) {
        if (static_cast<std::size_t>(d) > max_degree) return false;
        if (v.is_latent() && d < 3) return false;
        regular += v.is_regular();
    }
    if (t.nodes().size() > 2 * regular + 1) return false;
    // Connectivity: every pair has a finite path.
    for (const auto& [pair, d] : all_pairs(t)) {
        if (!std::isfinite(d)) return false;
    }
    return true;
}

// Minimal subtree spanning `keep`, with unkept branch points turned latent and
// unkept degree-2 nodes contracted.
inline SemiLabeledTree induced_subtree(const SemiLabeledTree& t, const std::set<std::uint32_t>& keep) {
    std::map<NodeId, std::map<NodeId, double>> adj;
    for (auto v : t.nodes()) adj[v];
    for (const auto& e : t.edges()) {
        adj[e.a][e.b] = e.length;
        adj[e.b][e.a] = e.length;
    }
    auto kept = [&](NodeId v) { return v.is_regular() && keep.count(v.value()); };
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto it = adj.begin(); it != adj.end();) {
            if (!kept(it->first) && it->second.size() <= 1) {
                for (auto& [nb, len] : it->second) adj[nb].erase(it->first);
                it = adj.erase(it);
                changed = true;
            } else if (!kept(it->first) && it->second.size() == 2) {
                auto a = it->second.begin()->first, b = std::next(it->second.begin())->first;
                const double len = it->second.begin()->second + std::next(it->second.begin())->second;
                adj[a].erase(it->first);
                adj[b].erase(it->first);
                adj[a][b] = len;
                adj[b][a] = len;
                it = adj.erase(it);
                changed = true;
            } else {
                ++it;
            }
        }
    }
    std::map<NodeId, NodeId> rename;
    std::uint32_t next = 1000000;
    for (auto& [v, nb] : adj) rename[v] = kept(v) ? v : NodeId::latent(next++);
    std::vector<NodeId> nodes;
    std::vector<Edge> edges;
    for (auto& [v, nb] : adj) {
        nodes.push_back(rename[v]);
        for (auto& [u, len] : nb) {
            if (v < u) edges.push_back({rename[v], rename[u], len});
        }
    }
    return SemiLabeledTree(nodes, edges);
}

} // namespace fixtures
