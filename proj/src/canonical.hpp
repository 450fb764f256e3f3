#pragma once

#include <cstdint>
#include <vector>

#include "latree/tree.hpp"

namespace latree::detail {

// Tree rooted at its smallest regular label, children ordered by the smallest
// regular label in their subtree. Every leaf is regular and sibling subtrees
// have disjoint label sets, so this ordering is unique.
struct RootedOrder {
    std::size_t root = 0;
    std::vector<std::size_t> parent;          // parent[root] == root
    std::vector<double> parent_length;        // 0 for the root
    std::vector<std::vector<std::size_t>> children;
    std::vector<std::size_t> preorder;
};

RootedOrder rooted_order(const SemiLabeledTree& tree);

} // namespace latree::detail
