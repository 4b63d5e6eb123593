#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

// Each trajectory is a connected object of Z^d, even where its observed trace
// is clipped by the observation ball, so connectivity of a union of traces is
// connectivity of a graph on trajectories. The two modes differ only in which
// pairs are joined: a common visited vertex, or additionally two visited
// vertices at lattice distance one.

enum class Adjacency { shared_vertex, lattice_adjacent };

inline const char* adjacency_name(Adjacency a) { return a == Adjacency::shared_vertex ? "shared" : "adjacent"; }

inline Adjacency parse_adjacency(const std::string& s) {
  if (s == "shared" || s == "shared_vertex") return Adjacency::shared_vertex;
  if (s == "adjacent" || s == "lattice_adjacent") return Adjacency::lattice_adjacent;
  throw ContractError("unknown adjacency mode '" + s + "' (expected shared or adjacent)");
}

inline constexpr int kStrictSearchLimit = 12;
inline constexpr int kMinConnectCap = 10;
inline constexpr std::uint64_t kMinConnectBudget = 10'000'000;

using TrajectorySet = std::vector<const LabeledTrajectory*>;

inline TrajectorySet members(const ProcessView& v) {
  TrajectorySet out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(&v[i]);
  return out;
}

inline TrajectorySet members(const InterlacementSample& s) { return members(whole(s)); }

/// Trajectory with the given trace and no legs; for fixtures and replayed data.
inline LabeledTrajectory trajectory_with_trace(std::uint64_t id, const std::vector<Point>& pts) {
  require(!pts.empty(), "a trace needs at least one point");
  LabeledTrajectory t;
  t.id = id;
  t.entry = pts.front();
  t.forward = PathSegment(pts.front());
  t.backward = PathSegment(pts.front());
  for (const auto& p : pts) t.trace.push_back(KeyCodec::encode(p));
  std::sort(t.trace.begin(), t.trace.end());
  t.trace.erase(std::unique(t.trace.begin(), t.trace.end()), t.trace.end());
  return t;
}

/// Trajectory walking the given nearest-neighbor path forward from its first point, fully observed.
inline LabeledTrajectory trajectory_from_path(std::uint64_t id, const std::vector<Point>& pts) {
  LabeledTrajectory t;
  t.id = id;
  t.forward = PathSegment::from_points(pts);
  t.entry = t.forward.start();
  t.backward = PathSegment(t.entry);
  t.trace = clip_trace(t.forward, t.backward, t.entry, kInfiniteRadius);
  return t;
}

struct IntersectionGraph {
  Adjacency mode = Adjacency::shared_vertex;
  std::vector<std::uint64_t> ids;
  std::vector<std::vector<int>> adj;  // sorted, no self loops

  std::size_t size() const { return ids.size(); }
  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& a : adj) e += a.size();
    return e / 2;
  }
  bool has_edge(int a, int b) const { return std::binary_search(adj[a].begin(), adj[a].end(), b); }
};

namespace detail {

inline int set_dim(const TrajectorySet& ts) { return ts.empty() ? 0 : ts.front()->dim(); }

using Owners = absl::flat_hash_map<PointKey, std::vector<int>>;

inline Owners owners_of(const TrajectorySet& ts) {
  Owners own;
  for (int i = 0; i < int(ts.size()); ++i)
    for (auto k : ts[i]->trace) own[k].push_back(i);
  return own;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// A pair of trace points witnessing the edge a-b (equal points in shared mode).
inline std::optional<std::pair<Point, Point>> contact(const LabeledTrajectory& a, const LabeledTrajectory& b,
                                                      Adjacency mode) {
  const int d = a.dim();
  for (auto k : a.trace) {
    if (b.visits_key(k)) {
      const Point p = KeyCodec::decode(k, d);
      return std::make_pair(p, p);
    }
  }
  if (mode == Adjacency::lattice_adjacent)
    for (auto k : a.trace)
      for (int c = 0; c < 2 * d; ++c) {
        const PointKey n = KeyCodec::step(k, d, c);
        if (b.visits_key(n)) return std::make_pair(KeyCodec::decode(k, d), KeyCodec::decode(n, d));
      }
  return std::nullopt;
}

inline bool connects_in(const TrajectorySet& ts, const std::vector<Point>& points, Adjacency mode) {
  if (ts.empty()) return points.empty();
  const int d = set_dim(ts);
  const auto own = owners_of(ts);
  UnionFind uf(ts.size());
  for (const auto& [k, list] : own) {
    for (std::size_t i = 1; i < list.size(); ++i) uf.unite(list[0], list[i]);
    if (mode == Adjacency::lattice_adjacent)
      for (int c = 0; c < 2 * d; c += 2) {  // positive directions cover every adjacent pair once
        auto it = own.find(KeyCodec::step(k, d, c));
        if (it != own.end()) uf.unite(list[0], it->second[0]);
      }
  }
  int comp = -1;
  for (const auto& p : points) {
    if (p.dim() != d || !KeyCodec::fits(p)) return false;
    auto it = own.find(KeyCodec::encode(p));
    if (it == own.end()) return false;
    const int c = uf.find(it->second[0]);
    if (comp >= 0 && c != comp) return false;
    comp = c;
  }
  return true;
}

}  // namespace detail

/// Trajectory graph: an edge for a common vertex (or, in adjacent mode, a lattice-adjacent pair).
inline IntersectionGraph build_intersection_graph(const TrajectorySet& ts, Adjacency mode) {
  IntersectionGraph g;
  g.mode = mode;
  g.adj.resize(ts.size());
  for (const auto* t : ts) g.ids.push_back(t->id);
  const int d = detail::set_dim(ts);
  const auto own = detail::owners_of(ts);
  auto link = [&](int a, int b) {
    if (a == b) return;
    g.adj[a].push_back(b);
    g.adj[b].push_back(a);
  };
  for (const auto& [k, list] : own) {
    for (std::size_t i = 0; i < list.size(); ++i)
      for (std::size_t j = i + 1; j < list.size(); ++j) link(list[i], list[j]);
    if (mode == Adjacency::lattice_adjacent)
      for (int c = 0; c < 2 * d; c += 2) {
        auto it = own.find(KeyCodec::step(k, d, c));
        if (it == own.end()) continue;
        for (int a : list)
          for (int b : it->second) link(a, b);
      }
  }
  for (auto& a : g.adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return g;
}

inline IntersectionGraph build_intersection_graph(const ProcessView& v, Adjacency mode) {
  return build_intersection_graph(members(v), mode);
}

/// True iff every point is visited and all points lie in one component of the union of traces.
inline bool connects(const TrajectorySet& ts, const std::vector<Point>& points,
                     Adjacency mode = Adjacency::shared_vertex) {
  const bool ok = detail::connects_in(ts, points, mode);
  if (ok && mode == Adjacency::shared_vertex && !detail::connects_in(ts, points, Adjacency::lattice_adjacent))
    throw std::logic_error("shared-vertex connection without lattice connection");
  return ok;
}

/// Connects, and no proper subset does.
inline bool connects_strictly(const TrajectorySet& ts, const std::vector<Point>& points,
                              Adjacency mode = Adjacency::shared_vertex) {
  require(int(ts.size()) <= kStrictSearchLimit, "strict connection check limited to " +
                                                    std::to_string(kStrictSearchLimit) + " trajectories, got " +
                                                    std::to_string(ts.size()));
  if (!connects(ts, points, mode)) return false;
  const std::uint32_t full = (std::uint32_t{1} << ts.size()) - 1;
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    TrajectorySet sub;
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (mask >> i & 1u) sub.push_back(ts[i]);
    if (connects(sub, points, mode)) return false;
  }
  return true;
}

struct WitnessEdge {
  std::uint64_t a = 0, b = 0;
  Point pa, pb;  // pa on a, pb on b; equal or adjacent
};

struct ConnectionWitness {
  std::vector<std::uint64_t> ids;  // increasing
  Adjacency mode = Adjacency::shared_vertex;
  std::vector<WitnessEdge> spanning;  // |ids| - 1 edges
};

struct SearchStats {
  std::uint64_t expansions = 0;
  std::uint64_t complete_subsets = 0;  // connected subsets of the target size examined
  int deepest = 0;
};

struct MinConnectResult {
  std::optional<int> value;  // empty: no connecting subset of size <= limit
  bool exceeds_limit() const { return !value.has_value(); }
  int limit = 0;
  std::optional<ConnectionWitness> witness;
  SearchStats stats;
};

namespace detail {

inline ConnectionWitness make_witness(const TrajectorySet& ts, std::vector<int> chosen, Adjacency mode) {
  std::sort(chosen.begin(), chosen.end(), [&](int a, int b) { return ts[a]->id < ts[b]->id; });
  ConnectionWitness w;
  w.mode = mode;
  for (int i : chosen) w.ids.push_back(ts[i]->id);
  // BFS spanning tree over the chosen trajectories
  std::vector<char> in(chosen.size(), 0);
  std::vector<std::size_t> queue{0};
  in[0] = 1;
  for (std::size_t h = 0; h < queue.size(); ++h)
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      if (in[j]) continue;
      auto c = contact(*ts[chosen[queue[h]]], *ts[chosen[j]], mode);
      if (!c) continue;
      in[j] = 1;
      queue.push_back(j);
      w.spanning.push_back({ts[chosen[queue[h]]]->id, ts[chosen[j]]->id, c->first, c->second});
    }
  return w;
}

}  // namespace detail

/// Checks the certificate against the trajectories it names.
inline bool verify_witness(const TrajectorySet& ts, const std::vector<Point>& points, const ConnectionWitness& w) {
  absl::flat_hash_map<std::uint64_t, const LabeledTrajectory*> by_id;
  for (const auto* t : ts) by_id[t->id] = t;
  TrajectorySet sub;
  for (auto id : w.ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) return false;
    sub.push_back(it->second);
  }
  if (w.spanning.size() + 1 != w.ids.size()) return false;
  absl::flat_hash_map<std::uint64_t, int> index;
  for (int i = 0; i < int(w.ids.size()); ++i) index[w.ids[i]] = i;
  detail::UnionFind uf(w.ids.size());
  for (const auto& e : w.spanning) {
    if (!index.contains(e.a) || !index.contains(e.b)) return false;
    if (!by_id[e.a]->visits(e.pa) || !by_id[e.b]->visits(e.pb)) return false;
    const int gap = l1_distance(e.pa, e.pb);
    if (gap > (w.mode == Adjacency::lattice_adjacent ? 1 : 0)) return false;
    uf.unite(index[e.a], index[e.b]);
  }
  for (int i = 1; i < int(w.ids.size()); ++i)
    if (uf.find(i) != uf.find(0)) return false;
  return connects(sub, points, w.mode);
}

/// Smallest number of trajectories whose union connects `points`, searched up to `limit`.
/// Ties go to the lexicographically smallest sorted id list.
inline MinConnectResult min_connect(const TrajectorySet& ts, const std::vector<Point>& points, int limit,
                                    Adjacency mode = Adjacency::shared_vertex,
                                    std::uint64_t budget = kMinConnectBudget) {
  require(!points.empty(), "min_connect needs at least one marked point");
  require(limit >= 1 && limit <= kMinConnectCap,
          "limit must lie in [1, " + std::to_string(kMinConnectCap) + "], got " + std::to_string(limit));
  MinConnectResult res;
  res.limit = limit;
  const int n = int(ts.size());
  const int k = int(points.size());
  const auto g = build_intersection_graph(ts, mode);

  // cover[i][v]: trajectory v visits point i
  std::vector<std::vector<char>> cover(k, std::vector<char>(n, 0));
  for (int i = 0; i < k; ++i) {
    bool any = false;
    for (int v = 0; v < n; ++v)
      if (ts[v]->visits(points[i])) cover[i][v] = any = 1;
    if (!any) return res;  // no subset can connect
  }

  // graph distance from each class; a lower bound on trajectories still needed
  constexpr int kFar = 1 << 20;
  std::vector<std::vector<int>> dist(k, std::vector<int>(n, kFar));
  for (int i = 0; i < k; ++i) {
    std::vector<int> q;
    for (int v = 0; v < n; ++v)
      if (cover[i][v]) {
        dist[i][v] = 0;
        q.push_back(v);
      }
    for (std::size_t h = 0; h < q.size(); ++h)
      for (int w : g.adj[q[h]])
        if (dist[i][w] == kFar) {
          dist[i][w] = dist[i][q[h]] + 1;
          q.push_back(w);
        }
  }

  std::vector<int> subset;
  std::vector<int> near(n, 0);  // number of subset members equal or adjacent to v
  std::vector<char> allowed(n, 1);
  std::optional<std::vector<std::uint64_t>> best_ids;
  std::vector<int> best;
  int target = 0;

  auto feasible = [&]() {
    const int left = target - int(subset.size());
    for (int i = 0; i < k; ++i) {
      int m = kFar;
      for (int v : subset) m = std::min(m, dist[i][v]);
      if (m > left) return false;
    }
    return true;
  };
  auto covers_all = [&]() {
    for (int i = 0; i < k; ++i) {
      bool hit = false;
      for (int v : subset) hit |= cover[i][v] != 0;
      if (!hit) return false;
    }
    return true;
  };
  auto add = [&](int v, int delta) {
    near[v] += delta;
    for (int w : g.adj[v]) near[w] += delta;
  };

  // ESU over the allowed vertices: each connected subset containing the root is produced once
  auto extend = [&](auto&& self, std::vector<int> ext) -> void {
    if (++res.stats.expansions > budget)
      throw BudgetError("min_connect budget of " + std::to_string(budget) + " expansions exhausted at size " +
                        std::to_string(target) + " after " + std::to_string(res.stats.complete_subsets) +
                        " complete subsets");
    if (int(subset.size()) == target) {
      ++res.stats.complete_subsets;
      if (!covers_all()) return;
      std::vector<std::uint64_t> ids;
      for (int v : subset) ids.push_back(ts[v]->id);
      std::sort(ids.begin(), ids.end());
      if (!best_ids || ids < *best_ids) {
        best_ids = ids;
        best = subset;
      }
      return;
    }
    if (!feasible()) return;
    while (!ext.empty()) {
      const int w = ext.back();
      ext.pop_back();
      std::vector<int> next = ext;
      for (int x : g.adj[w])
        if (allowed[x] && near[x] == 0 && x != w) next.push_back(x);
      subset.push_back(w);
      add(w, +1);
      self(self, std::move(next));
      add(w, -1);
      subset.pop_back();
    }
  };

  for (target = 1; target <= limit; ++target) {
    res.stats.deepest = target;
    std::fill(allowed.begin(), allowed.end(), 1);
    for (int r = 0; r < n; ++r) {
      if (!cover[0][r]) continue;
      subset = {r};
      add(r, +1);
      std::vector<int> ext;
      for (int x : g.adj[r])
        if (allowed[x]) ext.push_back(x);
      extend(extend, std::move(ext));
      add(r, -1);
      subset.clear();
      allowed[r] = 0;  // later roots skip sets already rooted here
    }
    if (best_ids) break;
  }
  if (!best_ids) return res;

  res.value = target;
  res.witness = detail::make_witness(ts, best, mode);
  TrajectorySet chosen;
  for (int v : best) chosen.push_back(ts[v]);
  if (!verify_witness(ts, points, *res.witness) || !connects_strictly(chosen, points, mode))
    throw std::logic_error("min_connect produced a witness that fails verification");
  return res;
}

inline MinConnectResult min_connect(const ProcessView& v, const std::vector<Point>& points, int limit,
                                    Adjacency mode = Adjacency::shared_vertex) {
  return min_connect(members(v), points, limit, mode);
}

/// Minimal number of trajectories connecting k points in Z^d.
inline int n_kd(int k, int d) {
  require(k >= 2, "n(k,d) needs k >= 2, got k = " + std::to_string(k));
  require(d >= 3, "n(k,d) needs d >= 3, got d = " + std::to_string(d));
  if (d <= 4) return k;
  return (d * (k - 1) + 1) / 2 - (k - 2);
}

}  // namespace interlace
