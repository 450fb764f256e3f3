#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "latree/tree.hpp"

namespace latree {

/*
 * Extended Newick. Only regular nodes carry labels (leaf or internal);
 * latent nodes are unlabeled internal nodes. Every non-root node has a
 * mandatory ":"-separated decimal branch length and the text ends with ';'.
 *
 * serialize() roots the tree at its smallest regular label and orders
 * children by the smallest label in their subtree, so equal trees produce
 * equal text. Lengths use the shortest round-trip decimal form.
 */
std::string serialize(const SemiLabeledTree& tree);
SemiLabeledTree parse(std::string_view text);

/// "label,<l1>,<l2>,..." header followed by one full symmetric row per label.
void write_matrix_csv(std::ostream& out, const DistanceMatrix& matrix);
DistanceMatrix read_matrix_csv(std::istream& in);

/// Shortest decimal text that parses back to exactly x.
std::string format_double(double x);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

} // namespace latree
