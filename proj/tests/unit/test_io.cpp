#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "latree/errors.hpp"
#include "latree/io.hpp"

using namespace latree;
using fixtures::R;

TEST(Newick, SingleEdgeAnchor) {
    const SemiLabeledTree t({R(1), R(2)}, {{R(1), R(2), 7.0}});
    EXPECT_EQ(serialize(t), "(2:7)1;");
}

TEST(Newick, QuartetRoundTrip) {
    const auto q = fixtures::quartet();
    const std::string text = serialize(q);
    EXPECT_EQ(text, "((2:3.5,(3:2.5,4:1):5):2)1;");
    const auto back = parse(text);
    EXPECT_TRUE(trees_isomorphic(q, back, 0.0));
    EXPECT_EQ(serialize(back), text);
}

TEST(Newick, RandomRoundTrips) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto t = random_tree({.n = 40, .max_degree = 5, .length_lo = 0.1, .length_hi = 9.0, .latent_fraction = 0.5, .seed = seed});
        EXPECT_TRUE(trees_isomorphic(t, parse(serialize(t)), 0.0)) << seed;
    }
}

TEST(Newick, ParsesWhitespaceAndInternalLabels) {
    const auto t = parse("  ( 1:2 , (3:1, 4:1.5)5:0.25 ) 2 ;\n");
    EXPECT_EQ(t.regular_labels(), (std::vector<std::uint32_t>{1, 2, 3, 4, 5}));
    EXPECT_DOUBLE_EQ(path_distance(t, R(1), R(4)), 2 + 0 + 0.25 + 1.5);
}

TEST(Newick, MalformedInputs) {
    EXPECT_THROW(parse("((1:2"), ParseError);
    EXPECT_THROW(parse("(1:2,2:3)"), ParseError);       // missing ';'
    EXPECT_THROW(parse("(1,2:3);"), ParseError);        // missing length
    EXPECT_THROW(parse("(1:2,:3);"), ParseError);       // unlabeled leaf
    EXPECT_THROW(parse("(1:2,1:3);"), ParseError);      // duplicate label
    EXPECT_THROW(parse("(1:2,2:-3);"), Error);          // non-positive length
    try {
        parse("(1:2,\n2:x);");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_GE(e.column(), 3u);
    }
}

TEST(MatrixCsv, RoundTripAndErrors) {
    const DistanceMatrix m({1, 2, 3, 4}, fixtures::quartet_matrix_values());
    std::stringstream ss;
    write_matrix_csv(ss, m);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "label,1,2,3,4");
    const auto back = read_matrix_csv(ss);
    EXPECT_EQ(back.labels(), m.labels());
    EXPECT_EQ(back.values(), m.values());

    std::stringstream asym("label,1,2\n1,0,1\n2,2,0\n");
    EXPECT_THROW(read_matrix_csv(asym), Error);
    std::stringstream short_row("label,1,2\n1,0\n2,1,0\n");
    EXPECT_THROW(read_matrix_csv(short_row), ParseError);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(7.0), "7");
    EXPECT_EQ(format_double(2.5), "2.5");
    EXPECT_EQ(format_double(0.1), "0.1");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(format_double(x)), x);
}
