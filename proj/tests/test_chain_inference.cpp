#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "egap/brute_oracle.hpp"
#include "egap/chain_inference.hpp"
#include "egap/errors.hpp"
#include "support/test_support.hpp"

namespace egap {
namespace {

using testing::max_rel_diff;

TEST(ChainInference, SingleNodeLogPartitionIsLogSumExp) {
  FactorTable h(1, 3);
  h.node(0, 0) = 0.5;
  h.node(0, 1) = -1.0;
  h.node(0, 2) = 2.0;
  const double expected = std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(2.0));
  EXPECT_NEAR(log_partition(h), expected, 1e-14);
}

TEST(ChainInference, ZeroPotentialsGiveUniformMarginals) {
  const FactorTable h(4, 3, 0.0);
  const auto post = infer(h);
  EXPECT_NEAR(post.log_partition, 4.0 * std::log(3.0), 1e-12);
  for (double v : post.marginals.node_values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-14);
  for (double v : post.marginals.edge_values()) EXPECT_NEAR(v, 1.0 / 9.0, 1e-14);
}

TEST(ChainInference, MatchesEnumerationOnRandomChains) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + rng() % 4;
    const std::size_t s = 2 + rng() % 2;
    const FactorTable h = testing::random_factor_table(rng, len, s);
    EXPECT_NEAR(log_partition(h), oracle::brute_log_partition(h), 1e-9);
    EXPECT_LE(max_rel_diff(clique_marginals(h), oracle::brute_clique_marginals(h)), 1e-9);
    EXPECT_EQ(map_assignment(h), oracle::brute_map(h));
  }
}

TEST(ChainInference, ThreeZeroNodesHaveLogEightPartition) {
  const FactorTable h(3, 2, 0.0);
  EXPECT_NEAR(log_partition(h), std::log(8.0), 1e-14);
  const auto m = clique_marginals(h);
  for (double v : m.node_values()) EXPECT_NEAR(v, 0.5, 1e-15);
  for (double v : m.edge_values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(ChainInference, NodePreferenceForLabelZero) {
  FactorTable h(3, 2, 0.0);
  for (std::size_t t = 0; t < 3; ++t) h.node(t, 0) = 1.0;
  EXPECT_EQ(map_assignment(h), (Labeling{0, 0, 0}));
}

TEST(ChainInference, ShiftingOneTableShiftsOnlyTheLogPartition) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const FactorTable h = testing::random_factor_table(rng, 4, 3);
    const double c = std::normal_distribution<double>(0.0, 5.0)(rng);
    FactorTable shifted = h;
    const std::size_t which = rng() % 7;  // 4 node tables then 3 edge tables
    if (which < 4) {
      for (double& v : shifted.node_row(which)) v += c;
    } else {
      for (double& v : shifted.edge_block(which - 4)) v += c;
    }
    EXPECT_NEAR(log_partition(shifted), log_partition(h) + c, 1e-10 * (1.0 + std::abs(c)));
    EXPECT_LE(max_rel_diff(clique_marginals(shifted), clique_marginals(h)), 1e-10);
    EXPECT_EQ(map_assignment(shifted), map_assignment(h));
  }
}

TEST(ChainInference, LargePotentialsStayFinite) {
  FactorTable h(3, 2, 0.0);
  h.node(0, 0) = 800.0;
  h.node(2, 1) = -900.0;
  h.edge(1, 0, 0) = 750.0;
  const auto post = infer(h);
  EXPECT_TRUE(std::isfinite(post.log_partition));
  EXPECT_NEAR(post.log_partition, oracle::brute_log_partition(h), 1e-9);
  for (double v : post.marginals.node_values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(ChainInference, MarginalsAreConsistent) {
  std::mt19937_64 rng(5);
  const FactorTable h = testing::random_factor_table(rng, 6, 4);
  const MarginalTables m = clique_marginals(h);
  for (std::size_t t = 0; t < 6; ++t) {
    double total = 0.0;
    for (std::size_t a = 0; a < 4; ++a) total += m.node(t, a);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  for (std::size_t t = 0; t + 1 < 6; ++t) {
    for (std::size_t a = 0; a < 4; ++a) {
      double row = 0.0;
      double col = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        row += m.edge(t, a, b);
        col += m.edge(t, b, a);
      }
      EXPECT_NEAR(row, m.node(t, a), 1e-12);
      EXPECT_NEAR(col, m.node(t + 1, a), 1e-12);
    }
  }
}

TEST(ChainInference, MapBreaksTiesTowardLowestLabels) {
  const FactorTable zero(4, 3, 0.0);
  EXPECT_EQ(map_assignment(zero), (Labeling{0, 0, 0, 0}));

  // Two optima: (1, 0) and (0, 1); the lexicographically smaller one wins.
  FactorTable h(2, 2, 0.0);
  h.edge(0, 1, 0) = 1.0;
  h.edge(0, 0, 1) = 1.0;
  EXPECT_EQ(map_assignment(h), (Labeling{0, 1}));
}

TEST(ChainInference, MapScoreIsMaximal) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const FactorTable h = testing::random_factor_table(rng, 5, 3);
    const Labeling y = map_assignment(h);
    const double best = labeling_score(h, y);
    for (const auto& other : oracle::enumerate_labelings(5, 3)) {
      EXPECT_LE(labeling_score(h, other), best + 1e-12);
    }
  }
}

TEST(ChainInference, RejectsEmptyAndNonFiniteTables) {
  EXPECT_THROW(log_partition(FactorTable(0, 2)), StructuralError);
  FactorTable h(2, 2, 0.0);
  h.node(1, 0) = std::nan("");
  EXPECT_THROW(infer(h), NumericalError);
  h.node(1, 0) = INFINITY;
  EXPECT_THROW(map_assignment(h), NumericalError);
}

}  // namespace
}  // namespace egap
