#include <gtest/gtest.h>

#include <cmath>

#include "oracle/oracle.hpp"

using namespace rtge;

TEST(OracleRank, Examples) {
    const double a[] = {0.2, 0.5, 0.1};
    EXPECT_EQ(oracle::brute_rank(a, 0), 2);
    EXPECT_EQ(oracle::brute_rank(a, 1), 3);
    EXPECT_EQ(oracle::brute_rank(a, 2), 1);
    const double same[] = {1, 1, 1, 1, 1};
    for (std::size_t g = 0; g < 5; ++g) EXPECT_EQ(oracle::brute_rank(same, g), 3);
    const double pair[] = {4, 4};
    EXPECT_EQ(oracle::brute_rank(pair, 0), 2);
}

TEST(OracleProjection, Examples) {
    EXPECT_EQ(oracle::proj({3, 4, 5}, {1, 0, 0}), (oracle::Vector{0, 4, 5}));
    EXPECT_DOUBLE_EQ(oracle::loss({1, 0}, {0, 1}, {0, 0}, {1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(oracle::loss({1, 2}, {0, 1}, {0, 0}, {0, 0}, true), 4.0);
}

TEST(OracleFd, ConstantDirectionGivesZero) {
    // Only the hyperplane penalty depends on w here and it is flat for unit
    // rows, so every coordinate's difference quotient is (close to) zero.
    HyperParams hp;
    hp.d = 3;
    hp.alpha = 0;
    const ModelState s = init_model(2, 1, 2, hp, 1);
    const std::vector<ConstraintPair> none;
    const auto fd = oracle::fd_gradient(s, none, hp);
    ASSERT_EQ(fd.value.size(), (2 + 1 + 2) * 3u);
    for (std::size_t i = 0; i < fd.value.size(); ++i) {
        EXPECT_NEAR(fd.value[i], 0.0, 1e-6);
        EXPECT_TRUE(fd.usable[i]);
    }
}

TEST(OracleFd, QuadraticMatchesTheClosedForm) {
    // One entity row scaled to norm 2: the penalty (n-1)^2 has gradient
    // 2(n-1) x / n = x along that row.
    HyperParams hp;
    hp.d = 2;
    hp.alpha = 0;
    ModelState s = init_model(1, 1, 1, hp, 2);
    for (double& x : s.entities.data()) x *= 2;
    const std::vector<ConstraintPair> none;
    const auto fd = oracle::fd_gradient(s, none, hp);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(fd.value[i], s.entities.data()[i], 1e-6);
}

TEST(OracleFd, FlagsCoordinatesNearAKink) {
    // The hinge argument is exactly zero at this point, and only moving the
    // negative's tail (entity 2) flips its sign.
    ModelState s;
    s.d = 1;
    s.entities = Matrix(3, 1);
    s.relations = Matrix(1, 1);
    s.hyperplanes = Matrix(1, 1);
    s.entities.row(2)[0] = 1;  // L(neg) = 1, L(pos) = 0
    HyperParams hp;
    hp.gamma = 1;
    hp.xi = 0;
    hp.alpha = 0;
    ConstraintPair p;
    p.positive = {0, 0, 1};
    p.entity_negative = {0, 0, 2};
    const std::vector<ConstraintPair> pairs{p};
    ASSERT_EQ(oracle::hinge_argument(s, p, hp), 0.0);
    const auto fd = oracle::fd_gradient(s, pairs, hp);
    for (std::size_t i = 0; i < fd.usable.size(); ++i) EXPECT_EQ(fd.usable[i], i != 2) << i;
}

TEST(OracleEnumeration, NegativeSets) {
    TimeBinning b;
    b.boundaries = {2000, 2001};
    TemporalGraph g(3, 2, b);
    g.add({0, 0, 1}, 0);
    g.add({0, 1, 1}, 1);
    EXPECT_EQ(oracle::relation_negatives(g, {0, 0, 1}, 0, NegFilter::Bin), (std::set<Triple>{{0, 1, 1}}));
    EXPECT_TRUE(oracle::relation_negatives(g, {0, 0, 1}, 0, NegFilter::Global).empty());
    EXPECT_EQ(oracle::entity_negatives(g, {0, 0, 1}, 0, NegFilter::Bin).size(), 4u);
}

TEST(OracleRelativeError, FloorsSmallMagnitudes) {
    EXPECT_DOUBLE_EQ(oracle::relative_error(1e-9, 0), 1e-9);
    EXPECT_DOUBLE_EQ(oracle::relative_error(200, 100), 0.5);
}
