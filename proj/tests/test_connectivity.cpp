#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "interlace/connectivity.hpp"

using namespace interlace;

namespace {

std::vector<Point> segment(const Point& from, int axis, int length) {
  std::vector<Point> pts;
  Point p = from;
  for (int i = 0; i <= length; ++i) {
    pts.push_back(p);
    p[axis] += 1;
  }
  return pts;
}

TrajectorySet refs(const std::vector<LabeledTrajectory>& v) {
  TrajectorySet out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

// Smallest connecting subset by exhaustive search; ids compared lexicographically on ties.
std::optional<std::vector<std::uint64_t>> brute_min(const TrajectorySet& ts, const std::vector<Point>& pts, int limit,
                                                    Adjacency mode) {
  const int n = int(ts.size());
  std::optional<std::vector<std::uint64_t>> best;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const int size = __builtin_popcount(mask);
    if (size > limit) continue;
    TrajectorySet sub;
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1u) {
        sub.push_back(ts[i]);
        ids.push_back(ts[i]->id);
      }
    if (!connects(sub, pts, mode)) continue;
    std::sort(ids.begin(), ids.end());
    if (!best || ids.size() < best->size() || (ids.size() == best->size() && ids < *best)) best = ids;
  }
  return best;
}

InterlacementSample small_sample(std::uint64_t seed, int max_trajectories) {
  SamplerParams p;
  p.leg_length = 40;
  p.truncation = 16;
  p.observation_radius = 6;
  HittingProcessSampler sampler(FiniteSet::ball(Point::origin(5), 1), p);
  for (std::uint64_t stream = 0;; ++stream) {
    auto s = sampler.sample(0.6, RngStream(seed, stream));
    if (s.trajectories.size() >= 3 && int(s.trajectories.size()) <= max_trajectories) return s;
  }
}

// Three straight paths A-B, B-C, C-D meeting pairwise in single points.
std::vector<LabeledTrajectory> chain_fixture() {
  const Point o = Point::origin(5);
  return {trajectory_with_trace(1, segment(o, 0, 6)),
          trajectory_with_trace(2, segment(Point{6, 0, 0, 0, 0}, 1, 6)),
          trajectory_with_trace(3, segment(Point{6, 6, 0, 0, 0}, 2, 6))};
}

}  // namespace

TEST(Nkd, Table) {
  EXPECT_EQ(n_kd(2, 5), 3);
  EXPECT_EQ(n_kd(3, 5), 4);
  EXPECT_EQ(n_kd(3, 7), 6);
  EXPECT_EQ(n_kd(5, 9), 15);
  EXPECT_EQ(n_kd(4, 3), 4);
  EXPECT_EQ(n_kd(6, 4), 6);
  for (int d = 5; d <= 10; ++d) EXPECT_EQ(n_kd(2, d), (d + 1) / 2);
  EXPECT_THROW(n_kd(1, 5), ContractError);
  EXPECT_THROW(n_kd(2, 2), ContractError);
}

TEST(Connects, Examples) {
  auto fx = chain_fixture();
  const Point a = Point::origin(5), d{6, 6, 6, 0, 0};
  EXPECT_TRUE(connects({&fx[0]}, {a, Point{6, 0, 0, 0, 0}}));
  EXPECT_FALSE(connects({&fx[0]}, {Point{9, 9, 9, 9, 9}}));
  for (auto mode : {Adjacency::shared_vertex, Adjacency::lattice_adjacent}) {
    EXPECT_TRUE(connects({&fx[0], &fx[1]}, {a, Point{6, 6, 0, 0, 0}}, mode));
    EXPECT_TRUE(connects(refs(fx), {a, d}, mode));
    EXPECT_FALSE(connects({&fx[0], &fx[2]}, {a, d}, mode));
  }
}

TEST(Connects, AdjacencyWithoutSharedVertex) {
  const Point o = Point::origin(5);
  std::vector<LabeledTrajectory> fx{trajectory_with_trace(1, segment(o, 0, 5)),
                                    trajectory_with_trace(2, segment(Point{0, 1, 0, 0, 0}, 0, 5))};
  const std::vector<Point> pts{o, Point{5, 1, 0, 0, 0}};
  EXPECT_FALSE(connects(refs(fx), pts, Adjacency::shared_vertex));
  EXPECT_TRUE(connects(refs(fx), pts, Adjacency::lattice_adjacent));
  EXPECT_TRUE(min_connect(refs(fx), pts, 3, Adjacency::shared_vertex).exceeds_limit());
  EXPECT_EQ(min_connect(refs(fx), pts, 3, Adjacency::lattice_adjacent).value, 2);
}

TEST(ConnectsStrictly, Examples) {
  auto fx = chain_fixture();
  const Point a = Point::origin(5);
  EXPECT_TRUE(connects_strictly({&fx[0]}, {a, Point{3, 0, 0, 0, 0}}));
  // the middle path alone holds both points
  auto middle = trajectory_with_trace(4, segment(Point{-2, 0, 0, 0, 0}, 0, 12));
  EXPECT_FALSE(connects_strictly({&fx[0], &middle, &fx[1]}, {a, Point{6, 0, 0, 0, 0}}));
  EXPECT_TRUE(connects_strictly(refs(fx), {a, Point{6, 6, 6, 0, 0}}));
  std::vector<LabeledTrajectory> many;
  for (int i = 0; i < 13; ++i) many.push_back(trajectory_with_trace(i, {a}));
  EXPECT_THROW(connects_strictly(refs(many), {a}), ContractError);
}

TEST(ConnectsStrictly, EveryConnectingSubsetContainsAStrictOne) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = small_sample(100 + seed, 9);
    auto ts = members(s);
    const std::vector<Point> pts{KeyCodec::decode(ts.front()->trace.front(), 5),
                                 KeyCodec::decode(ts.back()->trace.back(), 5)};
    const int n = int(ts.size());
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      TrajectorySet sub;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) sub.push_back(ts[i]);
      if (!connects(sub, pts)) continue;
      bool found = false;
      for (std::uint32_t inner = mask; inner && !found; inner = (inner - 1) & mask) {
        TrajectorySet part;
        for (int i = 0; i < n; ++i)
          if (inner >> i & 1u) part.push_back(ts[i]);
        found = connects_strictly(part, pts);
      }
      EXPECT_TRUE(found);
      // adding a trajectory never breaks a connection, so one removal test decides strictness
      bool single = true;
      for (std::size_t drop = 0; drop < sub.size() && single; ++drop) {
        TrajectorySet rest = sub;
        rest.erase(rest.begin() + drop);
        single = !connects(rest, pts);
      }
      EXPECT_EQ(single, connects_strictly(sub, pts));
    }
  }
}

TEST(IntersectionGraph, Examples) {
  const Point o = Point::origin(5);
  std::vector<LabeledTrajectory> far{trajectory_with_trace(1, segment(o, 0, 3)),
                                     trajectory_with_trace(2, segment(Point{0, 10, 0, 0, 0}, 0, 3)),
                                     trajectory_with_trace(3, segment(Point{0, 0, 10, 0, 0}, 0, 3))};
  for (auto mode : {Adjacency::shared_vertex, Adjacency::lattice_adjacent})
    EXPECT_EQ(build_intersection_graph(refs(far), mode).edge_count(), 0u);
  std::vector<LabeledTrajectory> same;
  for (int i = 0; i < 5; ++i) same.push_back(trajectory_with_trace(i, segment(o, 1, 4)));
  EXPECT_EQ(build_intersection_graph(refs(same), Adjacency::shared_vertex).edge_count(), 10u);

  auto s = small_sample(7, 30);
  for (auto mode : {Adjacency::shared_vertex, Adjacency::lattice_adjacent}) {
    auto g = build_intersection_graph(members(s), mode);
    auto again = build_intersection_graph(members(s), mode);
    EXPECT_EQ(g.adj, again.adj);
    for (int a = 0; a < int(g.size()); ++a)
      for (int b : g.adj[a]) {
        EXPECT_NE(a, b);
        EXPECT_TRUE(g.has_edge(b, a));
      }
  }
  EXPECT_LE(build_intersection_graph(members(s), Adjacency::shared_vertex).edge_count(),
            build_intersection_graph(members(s), Adjacency::lattice_adjacent).edge_count());
}

TEST(MinConnect, Fixtures) {
  auto fx = chain_fixture();
  const Point a = Point::origin(5), d{6, 6, 6, 0, 0};
  auto one = min_connect(refs(fx), {a}, 5);
  EXPECT_EQ(one.value, 1);
  EXPECT_EQ(one.witness->ids, std::vector<std::uint64_t>{1});
  auto three = min_connect(refs(fx), {a, d}, 5);
  EXPECT_EQ(three.value, 3);
  EXPECT_EQ(three.witness->ids, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(three.witness->spanning.size(), 2u);
  EXPECT_TRUE(verify_witness(refs(fx), {a, d}, *three.witness));
  EXPECT_TRUE(min_connect(refs(fx), {a, d}, 2).exceeds_limit());
  EXPECT_EQ(brute_min(refs(fx), {a, d}, 5, Adjacency::shared_vertex)->size(), 3u);
  EXPECT_THROW(min_connect(refs(fx), {a, d}, 11), ContractError);
  EXPECT_THROW(min_connect(refs(fx), {}, 3), ContractError);
}

TEST(MinConnect, TiesGoToSmallestIds) {
  const Point o = Point::origin(5);
  std::vector<LabeledTrajectory> fx{trajectory_with_trace(9, segment(o, 0, 4)),
                                    trajectory_with_trace(4, segment(o, 0, 4)),
                                    trajectory_with_trace(6, segment(o, 0, 4))};
  auto r = min_connect(refs(fx), {o, Point{4, 0, 0, 0, 0}}, 3);
  EXPECT_EQ(r.witness->ids, std::vector<std::uint64_t>{4});
}

TEST(MinConnect, BudgetGuard) {
  std::vector<LabeledTrajectory> fx;
  const Point o = Point::origin(5);
  for (int i = 0; i < 12; ++i) fx.push_back(trajectory_with_trace(i, segment(Point{0, i, 0, 0, 0}, 0, 3)));
  for (int i = 0; i < 12; ++i) fx.push_back(trajectory_with_trace(100 + i, segment(Point{1, 0, 0, 0, 0}, 1, 11)));
  const std::vector<Point> ends{o, Point{0, 11, 0, 0, 0}};
  EXPECT_THROW(min_connect(refs(fx), ends, 8, Adjacency::shared_vertex, 50), BudgetError);
  auto r = min_connect(refs(fx), ends, 8);
  EXPECT_EQ(r.value, 3);
  EXPECT_GT(r.stats.expansions, 50u);
}

TEST(MinConnect, MatchesBruteForceOnRandomSamples) {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = small_sample(200 + trial, 12);
    auto ts = members(s);
    const int k = 1 + int(rng.below(3));
    std::vector<Point> pts;
    for (int i = 0; i < k; ++i) {
      const auto* t = ts[rng.below(std::uint32_t(ts.size()))];
      pts.push_back(KeyCodec::decode(t->trace[rng.below(std::uint32_t(t->trace.size()))], 5));
    }
    for (auto mode : {Adjacency::shared_vertex, Adjacency::lattice_adjacent}) {
      const int limit = std::min(int(ts.size()), 6);
      auto fast = min_connect(ts, pts, limit, mode);
      auto slow = brute_min(ts, pts, limit, mode);
      ASSERT_EQ(fast.exceeds_limit(), !slow.has_value()) << "trial " << trial;
      if (slow) {
        EXPECT_EQ(*fast.value, int(slow->size()));
        EXPECT_EQ(fast.witness->ids, *slow);
      }
    }
  }
}

TEST(MinConnect, Monotone) {
  RngStream rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = small_sample(300 + trial, 30);
    auto ts = members(s);
    std::vector<Point> pts;
    for (int i = 0; i < 3; ++i) {
      const auto* t = ts[rng.below(std::uint32_t(ts.size()))];
      pts.push_back(KeyCodec::decode(t->trace[rng.below(std::uint32_t(t->trace.size()))], 5));
    }
    auto value = [](const MinConnectResult& r) { return r.value.value_or(99); };
    const int full = value(min_connect(ts, pts, 8));
    // more trajectories never hurt
    TrajectorySet fewer = ts;
    fewer.erase(fewer.begin() + rng.below(std::uint32_t(fewer.size())));
    EXPECT_GE(value(min_connect(fewer, pts, 8)), full);
    // more points never help
    std::vector<Point> two(pts.begin(), pts.begin() + 2);
    EXPECT_LE(value(min_connect(ts, two, 8)), full);
  }
}
