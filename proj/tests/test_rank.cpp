// Copyright 2026 The bfperf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bfperf/rank.hpp"

#include <gtest/gtest.h>

#include <random>

#include "bfperf/polysym.hpp"
#include "test_util.hpp"

namespace bfperf {
namespace {

using testing::uniform;
using testing::uniform_int;

Subset S(std::initializer_list<int> one_based) {
  Subset a = 0;
  for (int i : one_based) a |= singleton(i - 1);
  return a;
}

// Three classes in a chain over four unit servers: 1 -> {1,2}, 2 -> {2,3},
// 3 -> {3,4}.
ClusterAssignment chain_cluster() {
  return ClusterAssignment{3, 4, {1, 1, 1, 1}, {{0, 1}, {1, 2}, {2, 3}}};
}

// Three unit servers: 1 -> {1,2}, 2 -> {1,2,3}, 3 -> {2,3}.
ClusterAssignment overlap_cluster() {
  return ClusterAssignment{3, 3, {1, 1, 1}, {{0, 1}, {0, 1, 2}, {1, 2}}};
}

// Two classes on three unit servers sharing the middle one.
ClusterAssignment two_class_cluster() {
  return ClusterAssignment{2, 3, {1, 1, 1}, {{0, 1}, {1, 2}}};
}

TEST(Validate, ModularIsValid) {
  auto r = RankFunction(5, [](Subset a) { return static_cast<double>(cardinality(a)); });
  EXPECT_TRUE(validate_polymatroid(r).valid());
}

TEST(Validate, TwoClassClusterIsValid) {
  auto r = cluster_rank(two_class_cluster());
  EXPECT_EQ(r(S({1})), 2.0);
  EXPECT_EQ(r(S({2})), 2.0);
  EXPECT_EQ(r(S({1, 2})), 3.0);
  EXPECT_TRUE(validate_polymatroid(r).valid());
}

TEST(Validate, SubmodularityViolationHasWitness) {
  auto r = RankFunction::from_table(2, {0, 2, 2, 5});
  auto rep = validate_polymatroid(r);
  ASSERT_FALSE(rep.valid());
  const auto* v = rep.find(Axiom::kSubmodularity);
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->first | v->second, S({1, 2}));
  EXPECT_EQ(v->first & v->second, 0u);
  EXPECT_EQ(rep.find(Axiom::kNormalization), nullptr);
  EXPECT_EQ(rep.find(Axiom::kMonotonicity), nullptr);
}

TEST(Validate, NormalizationAndMonotonicity) {
  auto rep = validate_polymatroid(RankFunction::from_table(2, {1, 2, 2, 3}));
  EXPECT_NE(rep.find(Axiom::kNormalization), nullptr);
  rep = validate_polymatroid(RankFunction::from_table(2, {0, 2, 1, 1.5}));
  EXPECT_NE(rep.find(Axiom::kMonotonicity), nullptr);
}

TEST(Validate, SizeGuard) {
  auto r = RankFunction(17, [](Subset a) { return static_cast<double>(cardinality(a)); });
  EXPECT_THROW(validate_polymatroid(r), SizeLimitError);
}

TEST(Tree, SingleLink) {
  auto r = tree_rank(TreeTopology{3, {{full_set(3), 2.5}}});
  for (Subset a = 1; a <= full_set(3); ++a) EXPECT_EQ(r(a), 2.5);
  EXPECT_EQ(r(0), 0.0);
}

TEST(Tree, ExampleTwoSymbolic) {
  // Capacities chosen so that neither term of each min dominates trivially.
  const double c1 = 1.0, c2 = 0.7, c3 = 1.3, c12 = 1.5, c123 = 2.1;
  TreeTopology t{3, {{S({1}), c1}, {S({2}), c2}, {S({3}), c3}, {S({1, 2}), c12},
                     {S({1, 2, 3}), c123}}};
  auto r = tree_rank(t);
  EXPECT_DOUBLE_EQ(r(S({1, 3})), std::min(c1 + c3, c123));
  EXPECT_DOUBLE_EQ(r(S({2, 3})), std::min(c2 + c3, c123));
  EXPECT_DOUBLE_EQ(r(S({1, 2})), c12);
}

TEST(Tree, ExampleTwoValues) {
  TreeTopology t{3, {{S({1}), 1}, {S({2}), 1}, {S({3}), 1}, {S({1, 2}), 1.5},
                     {S({1, 2, 3}), 2}}};
  auto r = tree_rank(t);
  EXPECT_EQ(r(S({1, 3})), 2.0);
  EXPECT_EQ(r(S({1, 2, 3})), 2.0);
  EXPECT_TRUE(validate_polymatroid(r).valid());
}

TEST(Tree, CrossingLinksNamed) {
  TreeTopology t{3, {{S({1, 2}), 1}, {S({2, 3}), 1}}};
  try {
    tree_rank(t);
    FAIL() << "expected a structure error";
  } catch (const StructureError& e) {
    EXPECT_NE(std::string(e.what()).find("{1,2}"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("{2,3}"), std::string::npos) << e.what();
  }
}

TEST(Tree, RootInsertedAndPruned) {
  // No root; the {1,2} link is capped by its children and gets pruned.
  TreeTopology t{3, {{S({1}), 1}, {S({2}), 1}, {S({1, 2}), 5}, {S({3}), 2}}};
  auto nt = normalize_tree(t);
  EXPECT_TRUE(nt.root_inserted);
  EXPECT_DOUBLE_EQ(nt.inserted_root_capacity, 7.0);
  ASSERT_EQ(nt.pruned.size(), 2u);  // {1,2} and then the inserted root
  auto r = tree_rank(nt);
  for (const auto& l : nt.links) EXPECT_DOUBLE_EQ(r(l.users), l.capacity);
  EXPECT_DOUBLE_EQ(r(S({1, 2, 3})), 4.0);
}

TEST(Tree, MatchesBruteForceCovers) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 8);
    auto t = testing::random_tree(rng, n, trial % 3 != 0);
    auto nt = normalize_tree(t);
    auto full = t;
    if (nt.root_inserted) full.links.push_back({full_set(n), nt.inserted_root_capacity});
    auto brute = testing::brute_tree_rank_table(full);
    auto r = tree_rank(nt);
    for (Subset a = 0; a < brute.size(); ++a) {
      ASSERT_NEAR(r(a), brute[a], 1e-12) << "trial " << trial << " A=" << format_subset(a);
    }
    for (const auto& l : nt.links) EXPECT_LE(r(l.users), l.capacity + 1e-12);
    EXPECT_TRUE(validate_polymatroid(r).valid()) << validate_polymatroid(r).describe();
  }
}

TEST(Cluster, ChainValues) {
  auto r = cluster_rank(chain_cluster());
  EXPECT_EQ(r(S({1})), 2.0);
  EXPECT_EQ(r(S({3})), 2.0);
  EXPECT_EQ(r(S({1, 2})), 3.0);
  EXPECT_EQ(r(S({2, 3})), 3.0);
  EXPECT_EQ(r(S({1, 3})), 4.0);
}

TEST(Cluster, AllServersSaturate) {
  ClusterAssignment c{4, 5, std::vector<double>(5, 1.0), {}};
  for (int i = 0; i < 4; ++i) c.assign.push_back({0, 1, 2, 3, 4});
  auto r = cluster_rank(c);
  for (Subset a = 1; a <= full_set(4); ++a) EXPECT_EQ(r(a), 5.0);
}

TEST(Cluster, OverlapValues) {
  auto r = cluster_rank(overlap_cluster());
  EXPECT_EQ(r(S({1, 3})), 3.0);
  EXPECT_EQ(r(S({2})), 3.0);
}

TEST(Cluster, MatchesSetUnion) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = testing::random_cluster(rng, uniform_int(rng, 1, 10), uniform_int(rng, 1, 12));
    auto r = cluster_rank(c);
    auto t = testing::union_rank_table(c);
    for (Subset a = 0; a < t.size(); ++a) ASSERT_NEAR(r(a), t[a], 1e-12);
    EXPECT_TRUE(validate_polymatroid(r).valid());
  }
}

TEST(Cluster, InvalidServerIndex) {
  ClusterAssignment c{1, 2, {1, 1}, {{2}}};
  EXPECT_THROW(cluster_rank(c), InvalidArgument);
}

TEST(Exchange, ChainCluster) {
  auto r = cluster_rank(chain_cluster());
  EXPECT_TRUE(exchangeable(r, 0, 2));
  EXPECT_FALSE(exchangeable(r, 0, 1));
  auto w = exchangeability_witness(r, 0, 1);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(*w, S({3}));
  EXPECT_THROW(exchangeable(r, 1, 1), InvalidArgument);
}

TEST(Exchange, Partitions) {
  auto p = exchangeability_partition(cluster_rank(chain_cluster()));
  ASSERT_EQ(p.parts(), 2u);
  EXPECT_EQ(p.part(0), (std::vector<int>{0, 2}));
  EXPECT_EQ(p.part(1), (std::vector<int>{1}));

  auto sym = RankFunction(5, [](Subset a) { return std::sqrt(cardinality(a)); });
  EXPECT_EQ(exchangeability_partition(sym).parts(), 1u);

  auto mod = RankFunction::modular({1, 2, 3, 4});
  EXPECT_EQ(exchangeability_partition(mod).parts(), 4u);
}

// Pairwise relation from the definition, compared with the partition.
TEST(Exchange, RelationIsEquivalence) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = uniform_int(rng, 2, 7);
    // Small integer capacities make accidental ties frequent.
    ClusterAssignment c{n, 4, {1, 1, 1, 1}, {}};
    for (int i = 0; i < n; ++i) {
      std::vector<int> s;
      while (s.empty()) {
        for (int j = 0; j < 4; ++j) {
          if (uniform(rng, 0, 1) < 0.5) s.push_back(j);
        }
      }
      c.assign.push_back(s);
    }
    auto r = cluster_rank(c);
    auto t = r.tabulate();
    auto naive = [&](int i, int j) {
      for (Subset a = 0; a < t.size(); ++a) {
        if (contains(a, i) || contains(a, j)) continue;
        if (t[a | singleton(i)] != t[a | singleton(j)]) return false;
      }
      return true;
    };
    auto p = exchangeability_partition(r);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        EXPECT_EQ(naive(i, j), p.part_of(i) == p.part_of(j));
        if (naive(i, j)) EXPECT_EQ(t[singleton(i)], t[singleton(j)]);
      }
    }
  }
}

TEST(Cardinality, OverlapCluster) {
  auto r = cluster_rank(overlap_cluster());
  Partition p(3, {{0, 2}, {1}});
  auto h = cardinality_rank_from(r, p);
  EXPECT_EQ(h({0, 0}), 0.0);
  EXPECT_EQ(h({1, 0}), 2.0);
  EXPECT_EQ(h({0, 1}), 3.0);
  EXPECT_EQ(h({1, 1}), 3.0);
  EXPECT_EQ(h({2, 0}), 3.0);
  EXPECT_EQ(h({2, 1}), 3.0);
  EXPECT_TRUE(h.check().empty());
}

TEST(Cardinality, NotPolySymmetric) {
  auto r = cluster_rank(chain_cluster());
  Partition p(3, {{0, 1}, {2}});
  EXPECT_THROW(cardinality_rank_from(r, p), NotPolySymmetric);
}

TEST(Cardinality, SingletonPartitionIsReindexing) {
  std::mt19937_64 rng(14);
  auto c = testing::random_cluster(rng, 4, 5);
  auto r = cluster_rank(c);
  Partition p(4, {{0}, {1}, {2}, {3}});
  auto h = cardinality_rank_from(r, p);
  for (Subset a = 0; a <= full_set(4); ++a) EXPECT_EQ(h(p.profile(a)), r(a));
}

TEST(Cardinality, AccessTree) {
  auto t = access_tree_topology({2, 2}, {1, 2}, 3);
  Partition p = Partition::contiguous({2, 2});
  auto h = tree_cardinality_rank(t, p);
  EXPECT_EQ(h({2, 1}), 3.0);
  EXPECT_EQ(h({1, 1}), 3.0);
  EXPECT_EQ(h({1, 0}), 1.0);
  auto direct = access_tree_rank({2, 2}, {1, 2}, 3);
  EXPECT_EQ(h.values(), direct.values());
}

TEST(Cardinality, SharedLinkOnly) {
  TreeTopology t{4, {{full_set(4), 2.0}}};
  auto h = tree_cardinality_rank(t, Partition(4, {{0, 1}, {2, 3}}));
  for (std::size_t idx = 1; idx < h.shape().size(); ++idx) EXPECT_EQ(h.at(idx), 2.0);
}

TEST(Cardinality, AmbiguousProfile) {
  TreeTopology t{2, {{S({1}), 1}, {S({2}), 2}, {S({1, 2}), 2.5}}};
  EXPECT_THROW(tree_cardinality_rank(t, Partition(2, {{0, 1}})), NotPolySymmetric);
}

// Symmetric random trees: every node at one depth has the same fan-out and
// capacity, so the exchangeability partition groups leaves of equal depth.
TEST(Cardinality, TreeGridMatchesSubsetRank) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 40; ++trial) {
    // Two-level: g groups of s users each, plus optional extra single users.
    const int g = uniform_int(rng, 1, 3), s = uniform_int(rng, 1, 3);
    const int extra = uniform_int(rng, 0, 10 - g * s < 0 ? 0 : std::min(3, 10 - g * s));
    const int n = g * s + extra;
    if (n < 1) continue;
    const double leaf = uniform(rng, 0.5, 2), group = uniform(rng, 0.5, 4);
    const double single = uniform(rng, 0.5, 2), root = uniform(rng, 1, 8);
    TreeTopology t{n, {}};
    for (int q = 0; q < g; ++q) {
      Subset m = 0;
      for (int u = 0; u < s; ++u) {
        t.links.push_back({singleton(q * s + u), leaf});
        m |= singleton(q * s + u);
      }
      if (s > 1) t.links.push_back({m, group});
    }
    for (int e = 0; e < extra; ++e) t.links.push_back({singleton(g * s + e), single});
    t.links.push_back({full_set(n), root});
    auto r = tree_rank(t);
    auto p = exchangeability_partition(r);
    CardinalityRank from_set;
    try {
      from_set = cardinality_rank_from(r, p);
    } catch (const NotPolySymmetric&) {
      continue;
    }
    CardinalityRank direct;
    try {
      direct = tree_cardinality_rank(t, p);
    } catch (const NotPolySymmetric&) {
      continue;  // groups merged into one part with different link profiles
    }
    ASSERT_EQ(from_set.values().size(), direct.values().size());
    for (std::size_t idx = 0; idx < direct.values().size(); ++idx) {
      EXPECT_NEAR(direct.at(idx), from_set.at(idx), 1e-12)
          << "trial " << trial << " profile " << format_profile(direct.shape().profile(idx));
    }
  }
}

TEST(Cardinality, CheckFlagsProblems) {
  CardinalityRank bad(GridShape({2}), {0, 2, 1});
  EXPECT_FALSE(bad.check().empty());
  CardinalityRank convex(GridShape({2}), {0, 1, 3});
  EXPECT_FALSE(convex.check().empty());
}

TEST(Builders, RandomOutputsArePolymatroids) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = uniform_int(rng, 1, 10);
    EXPECT_TRUE(validate_polymatroid(tree_rank(testing::random_tree(rng, n))).valid());
    EXPECT_TRUE(validate_polymatroid(cluster_rank(testing::random_cluster(rng, n, 6))).valid());
  }
  for (int d1 = 1; d1 <= 3; ++d1) {
    for (int d2 = 1; d2 <= 3; ++d2) {
      EXPECT_TRUE(grid_cluster_rank(d1, d2).check().empty());
    }
  }
}

}  // namespace
}  // namespace bfperf
