#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "interlace/connectivity.hpp"
#include "interlace/tree_sum.hpp"

using namespace interlace;

namespace {

LengthedTree tree(int k, int m, std::vector<LengthEdge> e) {
  LengthedTree t;
  t.k = k;
  t.m = m;
  t.edges = std::move(e);
  return t;
}

Point at(int d, std::vector<int> c) {
  c.resize(d, 0);
  return Point(c);
}

// Direct evaluation: every internal vertex runs over the l1 ball independently.
double brute_sum(const LengthedTree& t, const std::vector<Point>& x, const Point& center, int rho, int d) {
  std::vector<Point> ball;
  Point y(d);
  std::function<void(int, int)> rec = [&](int a, int rem) {
    if (a == d) {
      ball.push_back(y + center);
      return;
    }
    for (int v = -rem; v <= rem; ++v) {
      y[a] = v;
      rec(a + 1, rem - std::abs(v));
    }
    y[a] = 0;
  };
  rec(0, rho);
  std::vector<Point> pos(t.vertices() + 1);
  for (int i = 0; i < t.k; ++i) pos[i + 1] = x[i];
  double total = 0;
  std::function<void(int)> place = [&](int v) {
    if (v > t.vertices()) {
      double f = 1;
      for (const auto& e : t.edges) f *= std::pow(l1_distance(pos[e.u], pos[e.v]) + 1.0, e.length - d);
      total += f;
      return;
    }
    for (const auto& p : ball) {
      pos[v] = p;
      place(v + 1);
    }
  };
  place(t.k + 1);
  return total;
}

// (ii) by enumerating every connected vertex subset.
bool brute_condition_ii(const LengthedTree& t, int d) {
  const int V = t.vertices();
  for (std::uint32_t mask = 1; mask + 1 < (1u << V); ++mask) {
    auto in = [&](int v) { return (mask >> (v - 1) & 1) != 0; };
    int size = std::popcount(mask), edges = 0, k1 = 0;
    double len = 0;
    for (const auto& e : t.edges)
      if (in(e.u) && in(e.v)) ++edges, len += e.length;
    if (edges != size - 1) continue;  // not connected
    for (int a = 1; a <= t.k; ++a) k1 += in(a);
    if (k1 >= 2 && len < double(d) * (k1 - 1) - 1e-9) return false;
  }
  return true;
}

LengthedTree random_tree(std::mt19937_64& gen, int k, int m, int d) {
  std::uniform_real_distribution<double> len(0, d - 1e-6);
  LengthedTree t;
  t.k = k;
  t.m = m;
  for (int v = 2; v <= k + m; ++v) {
    std::uniform_int_distribution<int> parent(1, v - 1);
    t.edges.push_back({parent(gen), v, len(gen)});
  }
  // rescale the total to a random fraction of d(k-1), capped below d per edge
  const double target = std::uniform_real_distribution<double>(0.3, 1.2)(gen) * d * (k - 1);
  const double scale = target / t.total_length();
  for (auto& e : t.edges) e.length = std::min(e.length * scale, d - 1e-6);
  return t;
}

// Anchors hang off a skeleton of short internal edges by edges near d/2.
LengthedTree skeleton_tree(std::mt19937_64& gen, int k, int m, int d) {
  LengthedTree t;
  t.k = k;
  t.m = m;
  std::uniform_real_distribution<double> hang(0.45 * d, 0.6 * d), inner(0, 0.2 * d);
  for (int v = k + 2; v <= k + m; ++v)
    t.edges.push_back({std::uniform_int_distribution<int>(k + 1, v - 1)(gen), v, inner(gen)});
  for (int a = 1; a <= k; ++a) t.edges.push_back({a, std::uniform_int_distribution<int>(k + 1, k + m)(gen), hang(gen)});
  return t;
}

}  // namespace

TEST(LengthedTree, Validation) {
  EXPECT_NO_THROW(validate_lengthed(tree(2, 0, {{1, 2, 2}}), 5));
  EXPECT_THROW(validate_lengthed(tree(2, 0, {{1, 2, 5}}), 5), ContractError);
  EXPECT_THROW(validate_lengthed(tree(2, 0, {{1, 2, -0.5}}), 5), ContractError);
  EXPECT_THROW(validate_lengthed(tree(2, 1, {{1, 3, 1}, {3, 1, 1}}), 5), ContractError);
  EXPECT_THROW(validate_lengthed(tree(2, 1, {{1, 3, 1}}), 5), ContractError);
}

TEST(SubtreeCondition, Examples) {
  EXPECT_TRUE(check_subtree_condition(tree(2, 1, {{1, 3, 2}, {3, 2, 2}}), 5));
  auto too_long = check_subtree_condition(tree(2, 1, {{1, 3, 2.5}, {3, 2, 2.5}}), 5);
  EXPECT_FALSE(too_long);
  EXPECT_EQ(too_long.condition, "i");
  // two anchors glued by a short cherry
  auto cherry = check_subtree_condition(tree(3, 1, {{1, 4, 1}, {2, 4, 1}, {4, 3, 2}}), 5);
  EXPECT_FALSE(cherry);
  EXPECT_EQ(cherry.condition, "ii");
  EXPECT_EQ(cherry.vertices, (std::vector<int>{1, 2, 4}));
  EXPECT_EQ(cherry.anchors, 2);
  EXPECT_DOUBLE_EQ(cherry.length, 2);
  EXPECT_TRUE(check_subtree_condition(tree(3, 1, {{1, 4, 2.6}, {2, 4, 2.6}, {4, 3, 2.6}}), 5));
  LengthedTree big;
  big.k = 2;
  big.m = 17;
  for (int v = 2; v <= 19; ++v) big.edges.push_back({v - 1, v, 0.1});
  EXPECT_THROW(check_subtree_condition(big, 5), ContractError);
}

TEST(SubtreeCondition, MatchesExhaustiveSubtreeScan) {
  std::mt19937_64 gen(7);
  int failures = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int k = 2 + trial % 4, m = 1 + trial % 5, d = 3 + trial % 3;
    auto t = trial % 2 ? skeleton_tree(gen, k, m, d) : random_tree(gen, k, m - 1, d);
    auto r = check_subtree_condition(t, d);
    const bool i_ok = t.total_length() < double(d) * (k - 1);
    EXPECT_EQ(bool(r), i_ok && brute_condition_ii(t, d)) << t.str();
    failures += !r;
  }
  EXPECT_GT(failures, 50);
  EXPECT_LT(failures, 350);
}

TEST(SubtreeCondition, SchemeAuditByDegreeArgument) {
  const int d = 5, k = 3;
  const int n = n_kd(k, d) - 1;
  auto cat = enumerate_schemes(k, n);
  ASSERT_GE(cat.count(), 20u);
  // n(k1,d) types on k1 anchors force enough edges of length 2
  for (int dd = 5; dd <= 8; ++dd)
    for (int k1 = 2; k1 <= 8; ++k1) EXPECT_GE(2 * (n_kd(k1, dd) + k1 - 2), dd * (k1 - 1));
  for (std::size_t s = 0; s < 20; ++s) {
    const Scheme& sc = cat.schemes[s * (cat.count() / 20)];
    auto t = lengthed_from_scheme(sc);
    const int V = t.vertices();
    bool every_subtree_has_enough_types = true, long_enough = true;
    for (std::uint32_t mask = 1; mask + 1 < (1u << V); ++mask) {
      auto in = [&](int v) { return (mask >> (v - 1) & 1) != 0; };
      int edges = 0, k1 = 0;
      std::set<int> types;
      for (const auto& e : sc.edges)
        if (in(e.from) && in(e.to)) ++edges, types.insert(e.type);
      if (edges != std::popcount(mask) - 1) continue;
      for (int a = 1; a <= k; ++a) k1 += in(a);
      if (k1 < 2) continue;
      const int n1 = int(types.size());
      EXPECT_GE(edges, n1 + k1 - 2) << "scheme " << s;
      every_subtree_has_enough_types &= n1 >= n_kd(k1, d);
      long_enough &= 2 * edges >= d * (k1 - 1);
    }
    EXPECT_LT(t.total_length(), d * (k - 1));
    auto r = check_subtree_condition(t, d);
    EXPECT_EQ(bool(r), long_enough) << "scheme " << s;
    EXPECT_EQ(bool(r), brute_condition_ii(t, d));
    if (every_subtree_has_enough_types) EXPECT_TRUE(r) << "scheme " << s;
  }
}

TEST(TreeSum, SingleEdgeClosedForm) {
  for (int r : {0, 1, 3, 8, 17}) {
    auto rep = tree_sum(tree(2, 0, {{1, 2, 2}}), {at(5, {}), at(5, {r})}, std::max(1, 2 * r), 5);
    EXPECT_EQ(rep.value, std::pow(double(r + 1), -3.0)) << r;
    EXPECT_EQ(rep.tail_estimate, 0);
  }
}

TEST(TreeSum, MatchesDirectSummation) {
  struct Case {
    LengthedTree t;
    std::vector<Point> x;
    int d, rho;
  };
  std::vector<Case> cases{
      {tree(2, 1, {{1, 3, 1}, {3, 2, 1.5}}), {at(3, {0, 0, 0}), at(3, {2, 1, 0})}, 3, 7},
      {tree(2, 1, {{1, 3, 2}, {3, 2, 2}}), {at(4, {1, 0}), at(4, {-1, 0})}, 4, 5},
      {tree(2, 2, {{1, 3, 1}, {3, 4, 0.5}, {4, 2, 1}}), {at(3, {0, 0, 0}), at(3, {1, 1, 1})}, 3, 6},
      {tree(3, 2, {{1, 4, 1.6}, {2, 4, 1.6}, {4, 5, 1}, {5, 3, 1.6}}),
       {at(3, {0, 0, 0}), at(3, {2, 0, 0}), at(3, {0, 0, 2})}, 3, 8},
      // an anchor of degree two and a direct anchor-anchor edge
      {tree(3, 1, {{1, 2, 0.5}, {2, 4, 1}, {4, 3, 2}}), {at(3, {0, 0, 0}), at(3, {1, 0, 0}), at(3, {-2, 0, 0})}, 3, 6},
      {tree(3, 2, {{1, 4, 1}, {2, 4, 1}, {3, 5, 1}, {5, 2, 2}}),
       {at(3, {0, 0, 0}), at(3, {0, 1, 1}), at(3, {0, -1, 1})}, 3, 6},
  };
  for (const auto& c : cases) {
    auto rep = tree_sum(c.t, c.x, c.rho, c.d, {.tail = false});
    Point center(c.d);
    for (int a = 0; a < c.d; ++a) {
      int lo = c.x[0][a], hi = c.x[0][a];
      for (const auto& p : c.x) lo = std::min(lo, p[a]), hi = std::max(hi, p[a]);
      center[a] = int(std::floor((lo + hi) / 2.0));
    }
    const double want = brute_sum(c.t, c.x, center, c.rho, c.d);
    EXPECT_NEAR(rep.value, want, 1e-11 * want) << c.t.str();
  }
}

TEST(TreeSum, OneInternalVertexDecaysLikeContractedEdge) {
  std::vector<double> lx, ly;
  for (int r : {8, 16, 32}) {
    const Point a = at(5, {-r / 2}), b = at(5, {r / 2});
    auto rep = tree_sum(tree(2, 1, {{1, 3, 2}, {3, 2, 2}}), {a, b}, 2 * r, 5, {.tail = false});
    lx.push_back(std::log(r));
    ly.push_back(std::log(rep.value));
  }
  const double slope = (ly[2] - ly[0]) / (lx[2] - lx[0]);
  EXPECT_NEAR(slope, -1.0, 0.25);
}

TEST(TreeSum, MonotoneInTruncation) {
  auto t = tree(3, 2, {{1, 4, 1.6}, {2, 4, 1.6}, {4, 5, 1}, {5, 3, 1.6}});
  std::vector<Point> x{at(3, {0, 0, 0}), at(3, {2, 0, 0}), at(3, {0, 0, 2})};
  double prev = 0;
  for (int rho = 8; rho <= 24; rho += 4) {
    const double v = tree_sum(t, x, rho, 3, {.tail = false}).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(TreeSum, InvariantUnderRelabelingInternalVertices) {
  auto t = tree(3, 3, {{1, 4, 1.6}, {4, 5, 0.5}, {5, 2, 1.6}, {5, 6, 0.5}, {6, 3, 1.6}});
  std::vector<Point> x{at(3, {0, 0, 0}), at(3, {3, 0, 0}), at(3, {0, 2, 1})};
  const double base = tree_sum(t, x, 12, 3, {.tail = false}).value;
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<int> perm{4, 5, 6};
    std::shuffle(perm.begin(), perm.end(), gen);
    auto p = t;
    auto map = [&](int v) { return v <= 3 ? v : perm[v - 4]; };
    for (auto& e : p.edges) e = {map(e.v), map(e.u), e.length};
    std::shuffle(p.edges.begin(), p.edges.end(), gen);
    EXPECT_NEAR(tree_sum(p, x, 12, 3, {.tail = false}).value, base, 1e-12 * base);
  }
}

TEST(TreeSum, DoublingStaysWithinTailEstimate) {
  struct Case {
    LengthedTree t;
    std::vector<Point> x;
    int d, rho;
  };
  std::vector<Case> cases{
      {tree(2, 1, {{1, 3, 1}, {3, 2, 1}}), {at(3, {0, 0, 0}), at(3, {2, 0, 0})}, 3, 16},
      {tree(2, 1, {{1, 3, 2}, {3, 2, 2}}), {at(5, {-2}), at(5, {2})}, 5, 16},
      {tree(3, 1, {{1, 4, 1.6}, {2, 4, 1.6}, {3, 4, 1.6}}),
       {at(3, {0, 0, 0}), at(3, {2, 0, 0}), at(3, {0, 2, 0})}, 3, 16},
      {tree(2, 2, {{1, 3, 0.5}, {3, 4, 0.5}, {4, 2, 0.5}}), {at(3, {0}), at(3, {2})}, 3, 16},
      {tree(3, 2, {{1, 4, 1.5}, {2, 4, 1.5}, {4, 5, 0.2}, {5, 3, 1.5}}),
       {at(3, {0, 0, 0}), at(3, {2, 0, 0}), at(3, {0, 0, 2})}, 3, 16},
  };
  for (const auto& c : cases) {
    ASSERT_TRUE(check_subtree_condition(c.t, c.d)) << c.t.str();
    auto rep = tree_sum(c.t, c.x, c.rho, c.d);
    ASSERT_FALSE(rep.divergent) << c.t.str();
    const double doubled = tree_sum(c.t, c.x, 2 * c.rho, c.d, {.tail = false}).value;
    EXPECT_GE(doubled, rep.value);
    EXPECT_LT(doubled - rep.value, rep.tail_estimate) << c.t.str() << " ratio " << rep.growth_ratio;
    EXPECT_DOUBLE_EQ(rep.bound_exponent, c.d * (c.t.k - 1) - c.t.total_length() + 0.1);
  }
}

TEST(TreeSum, DetectsDivergenceWhenACherryIsTooShort) {
  auto t = tree(3, 2, {{1, 4, 0.25}, {2, 4, 0.25}, {4, 5, 2.5}, {5, 3, 2.5}});
  ASSERT_TRUE(t.total_length() < 3 * 2);
  ASSERT_EQ(check_subtree_condition(t, 3).condition, "ii");
  const std::vector<Point> x(3, at(3, {}));
  std::vector<double> v;
  for (int rho : {16, 32, 64}) v.push_back(tree_sum(t, x, rho, 3, {.tail = false}).value);
  EXPECT_GE(v[1] / v[0], 1.5);
  EXPECT_GE(v[2] / v[1], 1.5);
  EXPECT_TRUE(tree_sum(t, x, 16, 3).divergent);
}

TEST(TreeSum, Guards) {
  auto t = tree(2, 1, {{1, 3, 2}, {3, 2, 2}});
  EXPECT_THROW(tree_sum(t, {at(5, {0}), at(5, {10})}, 10, 5), ContractError);
  EXPECT_THROW(tree_sum(t, {at(5, {0})}, 10, 5), ContractError);
  auto two = tree(2, 2, {{1, 3, 1}, {3, 4, 1}, {4, 2, 1}});
  try {
    tree_sum(two, {at(5, {0}), at(5, {1})}, 40, 5, {.work_limit = 1e9});
    FAIL() << "expected a budget error";
  } catch (const BudgetError& e) {
    EXPECT_NE(std::string(e.what()).find("try truncation <="), std::string::npos) << e.what();
  }
}

TEST(ReduceTree, ContractsAChain) {
  auto r = reduce_tree(tree(2, 1, {{1, 3, 1}, {3, 2, 1}}), 0.1, 5);
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.steps[0].kind, "contract");
  const auto& f = r.final_tree();
  EXPECT_EQ(f.k, 2);
  EXPECT_EQ(f.m, 0);
  ASSERT_EQ(f.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(f.edges[0].length, 2.1);
  EXPECT_EQ(r.steps[0].involved, (std::vector<int>{1, 3, 2}));
}

TEST(ReduceTree, ShortCherryCannotSplit) {
  // star with three anchors of length 2 in d=5: pairs are 4 < 5, so nothing applies
  auto star = tree(3, 1, {{1, 4, 2}, {2, 4, 2}, {3, 4, 2}});
  EXPECT_THROW(reduce_tree(star, 0.05, 5), ContractError);
  auto path = tree(2, 1, {{1, 3, 2}, {3, 2, 2}});
  auto r = reduce_tree(path, 0.05, 5);
  EXPECT_EQ(r.steps.front().kind, "contract");
  EXPECT_DOUBLE_EQ(r.final_tree().edges[0].length, 4.05);
}

TEST(ReduceTree, Bookkeeping) {
  const int d = 5;
  auto t = tree(4, 3, {{1, 5, 3.2}, {2, 5, 3.2}, {5, 6, 0.5}, {6, 3, 3.2}, {6, 7, 0.5}, {7, 4, 3.2}});
  ASSERT_TRUE(check_subtree_condition(t, d));
  const double delta = 0.05;
  auto r = reduce_tree(t, delta, d);
  int splits = 0, contracts = 0;
  const LengthedTree* prev = &r.initial;
  for (const auto& s : r.steps) {
    EXPECT_TRUE(s.certificate);
    if (s.kind == "split") {
      ++splits;
      EXPECT_EQ(s.tree.k, prev->k - 1);
      EXPECT_NEAR(s.length_after - s.length_before, -d, 1e-12);
      EXPECT_NEAR(s.exponent_after, s.exponent_before, 1e-12);
      EXPECT_FALSE(s.alternative.empty());
    } else {
      ++contracts;
      EXPECT_EQ(s.tree.k, prev->k);
      EXPECT_NEAR(s.length_after - s.length_before, delta, 1e-12);
    }
    prev = &s.tree;
  }
  EXPECT_EQ(splits, 2);
  EXPECT_GT(contracts, 0);
  EXPECT_NEAR(r.delta_used, contracts * delta, 1e-12);
  const auto& f = r.final_tree();
  EXPECT_EQ(f.k, 2);
  EXPECT_EQ(f.m, 0);
  EXPECT_NEAR(f.total_length(), t.total_length() - 2 * d + contracts * delta, 1e-9);
  // original labels survive the relabeling
  EXPECT_EQ(f.original(1), 1);
  EXPECT_EQ(f.original(2), 4);
}

TEST(ReduceTree, Errors) {
  EXPECT_THROW(reduce_tree(tree(2, 1, {{1, 3, 1}, {3, 2, 1}}), 0, 5), ContractError);
  // anchor 2 in the middle of the path is not a leaf
  EXPECT_THROW(reduce_tree(tree(3, 0, {{1, 2, 1}, {2, 3, 1}}), 0.1, 5), ContractError);
  // total length close to d: contracting pushes it over
  EXPECT_THROW(reduce_tree(tree(2, 2, {{1, 3, 1.6}, {3, 4, 1.6}, {4, 2, 1.75}}), 0.05, 5), BudgetError);
  // epsilon budget
  EXPECT_THROW(reduce_tree(tree(2, 2, {{1, 3, 1}, {3, 4, 1}, {4, 2, 1}}), 0.1, 5, 0.3), BudgetError);
  EXPECT_NO_THROW(reduce_tree(tree(2, 2, {{1, 3, 1}, {3, 4, 1}, {4, 2, 1}}), 0.1, 5, 0.4));
}
