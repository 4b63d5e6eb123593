#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "interlace/connectivity.hpp"
#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

// A connection scheme: a tree on vertices 1..m whose first k vertices are the
// anchors of the marked points, with oriented edges carrying a type in 1..n.
// Edges of one type form one oriented path (one per trajectory); anchors see a
// single type, other vertices exactly two.

struct SchemeEdge {
  int from = 0, to = 0, type = 0;
  auto operator<=>(const SchemeEdge&) const = default;
};

struct Scheme {
  int k = 0, n = 0;
  std::vector<SchemeEdge> edges;

  int m() const { return n + k - 1; }
  bool operator==(const Scheme& o) const { return k == o.k && n == o.n && sorted_edges() == o.sorted_edges(); }
  std::vector<SchemeEdge> sorted_edges() const {
    auto e = edges;
    std::sort(e.begin(), e.end());
    return e;
  }
  /// Vertices along the oriented path of edges of type h (empty if h is unused or not a path).
  std::vector<int> type_path(int h) const {
    std::map<int, int> next, indeg;
    for (const auto& e : edges)
      if (e.type == h) {
        if (next.count(e.from)) return {};
        next[e.from] = e.to;
        ++indeg[e.to];
      }
    if (next.empty()) return {};
    int start = 0, starts = 0;
    for (const auto& [v, w] : next)
      if (!indeg.count(v)) {
        start = v;
        ++starts;
      }
    if (starts != 1) return {};
    std::vector<int> path{start};
    while (next.count(path.back())) {
      path.push_back(next[path.back()]);
      if (path.size() > next.size() + 1) return {};
    }
    return path.size() == next.size() + 1 ? path : std::vector<int>{};
  }
};

inline nlohmann::json scheme_json(const Scheme& s) {
  nlohmann::json j;
  j["k"] = s.k;
  j["n"] = s.n;
  j["vertices"] = s.m();
  auto& e = j["edges"] = nlohmann::json::array();
  for (const auto& x : s.edges) e.push_back({x.from, x.to, x.type});
  return j;
}

struct SchemeCheck {
  bool ok = true;
  std::string condition;  // "vertex count", "tree", "type path", "anchor types", "internal types", "types used"
  std::vector<int> vertices;
  std::string message;
  explicit operator bool() const { return ok; }
};

inline SchemeCheck validate_scheme(const Scheme& s) {
  auto fail = [](std::string cond, std::vector<int> v, std::string msg) {
    return SchemeCheck{false, std::move(cond), std::move(v), std::move(msg)};
  };
  const int m = s.m();
  if (s.k < 1 || s.n < 1 || m < 2) return fail("vertex count", {}, "need k >= 1, n >= 1 and at least two vertices");
  if (int(s.edges.size()) != m - 1)
    return fail("vertex count", {}, "a tree on m = n + k - 1 = " + std::to_string(m) + " vertices has " +
                                        std::to_string(m - 1) + " edges, got " + std::to_string(s.edges.size()));
  for (const auto& e : s.edges) {
    if (e.from < 1 || e.from > m || e.to < 1 || e.to > m || e.from == e.to)
      return fail("tree", {e.from, e.to}, "edge endpoints must be distinct vertices in [1, m]");
    if (e.type < 1 || e.type > s.n) return fail("types used", {e.from, e.to}, "edge type out of [1, n]");
  }
  detail::UnionFind uf(m + 1);
  for (const auto& e : s.edges) {
    if (uf.find(e.from) == uf.find(e.to)) return fail("tree", {e.from, e.to}, "edge closes a cycle");
    uf.unite(e.from, e.to);
  }
  for (int h = 1; h <= s.n; ++h) {
    bool used = false;
    for (const auto& e : s.edges) used |= e.type == h;
    if (!used) return fail("types used", {}, "type " + std::to_string(h) + " has no edge");
    if (s.type_path(h).empty()) {
      std::vector<int> vs;
      for (const auto& e : s.edges)
        if (e.type == h) vs.insert(vs.end(), {e.from, e.to});
      return fail("type path", vs, "edges of type " + std::to_string(h) + " do not form one oriented path");
    }
  }
  for (int v = 1; v <= m; ++v) {
    std::set<int> types;
    int deg = 0;
    for (const auto& e : s.edges)
      if (e.from == v || e.to == v) {
        types.insert(e.type);
        ++deg;
      }
    if (v <= s.k && (types.size() != 1 || deg > 2))
      return fail("anchor types", {v}, "anchor " + std::to_string(v) + " must see one type with degree <= 2");
    if (v > s.k && types.size() != 2)
      return fail("internal types", {v}, "vertex " + std::to_string(v) + " must see exactly two types, sees " +
                                             std::to_string(types.size()));
  }
  return {};
}

/// l(T) bound exponent with every edge of length 2.
inline double scheme_bound_exponent(const Scheme& s, int d, double eps) {
  return double(d) * (s.k - 1) - 2.0 * (s.m() - 1) + eps;
}

struct SchemeCatalog {
  int k = 0, n = 0;
  std::vector<Scheme> schemes;  // each type path oriented from its lower-index endpoint
  std::uint64_t count() const { return schemes.size(); }
  std::uint64_t oriented_count() const { return schemes.size() << n; }
  std::optional<std::uint64_t> iso_classes;  // up to relabeling internal vertices and types; small catalogs only
};

namespace detail {

inline std::vector<std::pair<int, int>> prufer_decode(const std::vector<int>& seq, int m) {
  std::vector<int> degree(m + 1, 1);
  for (int v : seq) ++degree[v];
  std::vector<std::pair<int, int>> edges;
  for (int v : seq) {
    for (int leaf = 1; leaf <= m; ++leaf)
      if (degree[leaf] == 1) {
        edges.emplace_back(std::min(leaf, v), std::max(leaf, v));
        --degree[leaf];
        --degree[v];
        break;
      }
  }
  int a = 0, b = 0;
  for (int v = 1; v <= m; ++v)
    if (degree[v] == 1) (a ? b : a) = v;
  edges.emplace_back(a, b);
  return edges;
}

/// Orient each type path from its lower-index endpoint.
inline Scheme orient_canonically(int k, int n, const std::vector<std::pair<int, int>>& edges,
                                 const std::vector<int>& types) {
  Scheme s;
  s.k = k;
  s.n = n;
  for (int h = 1; h <= n; ++h) {
    std::map<int, std::vector<int>> adj;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (types[i] == h) {
        adj[edges[i].first].push_back(edges[i].second);
        adj[edges[i].second].push_back(edges[i].first);
      }
    int start = 0;
    for (const auto& [v, nb] : adj)
      if (nb.size() == 1) {
        start = v;  // map order: the lower endpoint comes first
        break;
      }
    int prev = 0, cur = start;
    while (true) {
      int next = 0;
      for (int w : adj[cur])
        if (w != prev) next = w;
      if (!next) break;
      s.edges.push_back({cur, next, h});
      prev = cur;
      cur = next;
    }
  }
  std::sort(s.edges.begin(), s.edges.end());
  return s;
}

inline std::vector<SchemeEdge> relabeled_key(const Scheme& s, const std::vector<int>& perm) {
  // perm maps internal vertex v (> k) to perm[v]; types renamed by first appearance
  std::vector<std::array<int, 3>> e;
  for (const auto& x : s.edges) {
    int a = x.from > s.k ? perm[x.from] : x.from, b = x.to > s.k ? perm[x.to] : x.to;
    if (a > b) std::swap(a, b);
    e.push_back({a, b, x.type});
  }
  std::sort(e.begin(), e.end());
  std::map<int, int> rename;
  std::vector<SchemeEdge> out;
  for (auto& x : e) {
    if (!rename.count(x[2])) rename[x[2]] = int(rename.size()) + 1;
    out.push_back({x[0], x[1], rename[x[2]]});
  }
  // type renaming depends on the order above, so re-sort for a stable key
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline constexpr int kSchemeEnumerationGuard = 10;

/// Every scheme with k anchors and n types (labeled; orientation fixed canonically).
inline SchemeCatalog enumerate_schemes(int k, int n) {
  require(k >= 2 && n >= 1, "scheme enumeration needs k >= 2 and n >= 1");
  require(k + n <= kSchemeEnumerationGuard, "scheme enumeration limited to k + n <= " +
                                                std::to_string(kSchemeEnumerationGuard) + ", got " +
                                                std::to_string(k + n));
  SchemeCatalog cat;
  cat.k = k;
  cat.n = n;
  const int m = n + k - 1;
  const int len = m - 2;
  std::vector<int> seq, occ(m + 1, 0);

  auto assign_types = [&](const std::vector<std::pair<int, int>>& edges) {
    const int E = int(edges.size());
    std::vector<int> types(E, 0);
    // per vertex: the distinct types seen and per-type incidence counts
    std::vector<std::vector<int>> seen(m + 1);
    std::vector<std::map<int, int>> per(m + 1);
    auto can_add = [&](int v, int t) {
      const bool has = std::find(seen[v].begin(), seen[v].end(), t) != seen[v].end();
      if (!has && int(seen[v].size()) >= (v <= k ? 1 : 2)) return false;
      return per[v][t] < 2;
    };
    auto add = [&](int v, int t, int delta) {
      per[v][t] += delta;
      if (delta > 0 && per[v][t] == 1) seen[v].push_back(t);
      if (delta < 0 && per[v][t] == 0) seen[v].erase(std::find(seen[v].begin(), seen[v].end(), t));
    };
    std::vector<int> uses(n + 1, 0);
    int distinct = 0;
    auto rec = [&](auto&& self, int i) -> void {
      if (distinct + (E - i) < n) return;  // too few edges left to use every type
      if (i == E) {
        for (int v = k + 1; v <= m; ++v)
          if (seen[v].size() != 2) return;
        auto s = detail::orient_canonically(k, n, edges, types);
        if (validate_scheme(s)) cat.schemes.push_back(std::move(s));
        return;
      }
      const auto [a, b] = edges[i];
      for (int t = 1; t <= n; ++t) {
        if (!can_add(a, t) || !can_add(b, t)) continue;
        types[i] = t;
        add(a, t, 1);
        add(b, t, 1);
        distinct += uses[t]++ == 0;
        self(self, i + 1);
        distinct -= --uses[t] == 0;
        add(a, t, -1);
        add(b, t, -1);
      }
    };
    rec(rec, 0);
  };

  // Pruefer sequences: anchors appear at most once (degree <= 2), others at least once (degree >= 2)
  auto gen = [&](auto&& self, int pos) -> void {
    int missing = 0;
    for (int v = k + 1; v <= m; ++v) missing += occ[v] == 0;
    if (missing > len - pos) return;
    if (pos == len) {
      assign_types(detail::prufer_decode(seq, m));
      return;
    }
    for (int v = 1; v <= m; ++v) {
      if (v <= k && occ[v] >= 1) continue;
      seq.push_back(v);
      ++occ[v];
      self(self, pos + 1);
      --occ[v];
      seq.pop_back();
    }
  };
  if (m == 2) {
    assign_types({{1, 2}});
  } else {
    gen(gen, 0);
  }
  std::sort(cat.schemes.begin(), cat.schemes.end(),
            [](const Scheme& a, const Scheme& b) { return a.edges < b.edges; });
  cat.schemes.erase(std::unique(cat.schemes.begin(), cat.schemes.end()), cat.schemes.end());

  const int internal = m - k;
  if (cat.schemes.size() <= 20000 && internal <= 7) {
    std::set<std::vector<SchemeEdge>> classes;
    std::vector<int> order(internal);
    for (const auto& s : cat.schemes) {
      std::iota(order.begin(), order.end(), k + 1);
      std::optional<std::vector<SchemeEdge>> best;
      do {
        std::vector<int> perm(m + 1, 0);
        for (int i = 0; i < internal; ++i) perm[k + 1 + i] = order[i];
        // both orientations of every type path describe the same unoriented scheme
        Scheme plain = s;
        for (auto& e : plain.edges)
          if (e.from > e.to) std::swap(e.from, e.to);
        auto key = detail::relabeled_key(plain, perm);
        if (!best || key < *best) best = key;
      } while (std::next_permutation(order.begin(), order.end()));
      classes.insert(*best);
    }
    cat.iso_classes = classes.size();
  }
  return cat;
}

// ---------------------------------------------------------------------------
// Witness extraction

/// Visited points in time order, indices -|backward| .. |forward|.
struct Parametrization {
  long first = 0;  // index of points[0]
  std::vector<Point> points;

  explicit Parametrization(const LabeledTrajectory& t) {
    first = -long(t.backward.steps());
    std::vector<Point> back = t.backward.points();
    points.assign(back.rbegin(), back.rend());
    const auto fwd = t.forward.points();
    points.insert(points.end(), fwd.begin() + 1, fwd.end());
  }
  /// First index >= from at which p is visited.
  std::optional<long> find(const Point& p, long from) const {
    for (long i = std::max(from, first); i < first + long(points.size()); ++i)
      if (points[i - first] == p) return i;
    return std::nullopt;
  }
};

struct SchemeWitness {
  Scheme scheme;
  std::vector<Point> anchors;               // y_1 .. y_m (index 0 is y_1)
  std::vector<std::uint64_t> trajectory_of;  // trajectory id carrying type h (index h - 1)
};

/// Greedy earliest match of every type path against its trajectory.
inline bool condition_iii_check(const Scheme& s, const std::vector<Point>& y, const TrajectorySet& by_type) {
  if (int(y.size()) != s.m() || int(by_type.size()) != s.n) return false;
  for (int h = 1; h <= s.n; ++h) {
    const auto path = s.type_path(h);
    if (path.empty()) return false;
    const Parametrization gamma(*by_type[h - 1]);
    long at = gamma.first;
    for (int v : path) {
      auto idx = gamma.find(y[v - 1], at);
      if (!idx) return false;
      at = *idx;
    }
  }
  return true;
}

namespace detail {

struct SchemeBuilder {
  const TrajectorySet& ts;            // type h is ts[h - 1]
  const std::vector<Point>& x;        // marked points
  std::vector<Parametrization> param;
  int next_vertex;
  std::vector<Point> y;               // indexed by vertex - 1
  std::vector<SchemeEdge> edges;

  SchemeBuilder(const TrajectorySet& t, const std::vector<Point>& pts)
      : ts(t), x(pts), next_vertex(int(pts.size()) + 1), y(pts) {
    for (const auto* g : ts) param.emplace_back(*g);
  }

  int new_vertex(const Point& p) {
    y.push_back(p);
    return next_vertex++;
  }

  long first_index(int type, const Point& p) const {
    auto i = param[type - 1].find(p, param[type - 1].first);
    if (!i) throw ContractError("point " + p.str() + " is not on trajectory " + std::to_string(ts[type - 1]->id));
    return *i;
  }

  void add_edge(int a, int b, int type) {
    // orient along the walk so that a non-decreasing parametrization exists
    if (first_index(type, y[a - 1]) <= first_index(type, y[b - 1]))
      edges.push_back({a, b, type});
    else
      edges.push_back({b, a, type});
  }

  bool shares(int a, int b) const {
    for (auto k : ts[a]->trace)
      if (ts[b]->visits_key(k)) return true;
    return false;
  }
  Point shared_point(int a, int b) const {
    for (auto k : ts[a]->trace)
      if (ts[b]->visits_key(k)) return KeyCodec::decode(k, ts[a]->dim());
    throw std::logic_error("trajectories do not intersect");
  }

  /// Members of `set` in chain order from a trajectory in `from` to one holding `target`.
  std::vector<int> chain(const std::vector<int>& set, const std::vector<char>& from, const Point& target) const {
    std::vector<int> prev(ts.size(), -2);
    std::vector<int> queue;
    for (int v : set)
      if (from[v]) {
        prev[v] = -1;
        queue.push_back(v);
      }
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const int v = queue[h];
      if (ts[v]->visits(target)) {
        std::vector<int> path;
        for (int c = v; c >= 0; c = prev[c]) path.push_back(c);
        std::reverse(path.begin(), path.end());
        if (path.size() != set.size())
          throw ContractError("trajectories do not connect strictly: a chain of " + std::to_string(path.size()) +
                              " suffices where " + std::to_string(set.size()) + " were given");
        return path;
      }
      for (int w : set)
        if (prev[w] == -2 && shares(v, w)) {
          prev[w] = v;
          queue.push_back(w);
        }
    }
    throw ContractError("trajectories do not connect point " + target.str());
  }

  /// Splice vertex v (at point y[v]) into the path of type h.
  void insert_into_path(int v, int h) {
    Scheme tmp;
    tmp.edges = edges;
    const auto path = tmp.type_path(h);
    if (path.empty()) throw std::logic_error("type path missing during scheme construction");
    const Parametrization& g = param[h - 1];
    std::vector<long> b;
    long at = g.first;
    for (int a : path) {
      auto i = g.find(y[a - 1], at);
      if (!i) throw ContractError("no parametrization of trajectory " + std::to_string(ts[h - 1]->id) +
                                  " visits the scheme points in order");
      b.push_back(at = *i);
    }
    const long bv = first_index(h, y[v - 1]);
    if (bv <= b.front()) {
      edges.push_back({v, path.front(), h});
    } else if (bv > b.back()) {
      edges.push_back({path.back(), v, h});
    } else {
      std::size_t i = 0;
      while (!(b[i] < bv && bv <= b[i + 1])) ++i;
      auto it = std::find(edges.begin(), edges.end(), SchemeEdge{path[i], path[i + 1], h});
      *it = {path[i], v, h};
      edges.push_back({v, path[i + 1], h});
    }
  }

  // builds the scheme for points 1..j using trajectories `set` (indices into ts)
  void build(int j, std::vector<int> set) {
    const int n = int(ts.size());
    if (j == 2) {
      std::vector<char> from(n, 0);
      for (int v : set) from[v] = ts[v]->visits(x[0]);
      const auto c = chain(set, from, x[1]);
      int prev = 1;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const int next = i + 1 < c.size() ? new_vertex(shared_point(c[i], c[i + 1])) : 2;
        add_edge(prev, next, c[i] + 1);
        prev = next;
      }
      return;
    }
    // a strictly connecting subset for the first j - 1 points
    std::vector<int> sub = set;
    std::vector<Point> head(x.begin(), x.begin() + (j - 1));
    auto connects_idx = [&](const std::vector<int>& idx) {
      TrajectorySet part;
      for (int v : idx) part.push_back(ts[v]);
      return connects(part, head, Adjacency::shared_vertex);
    };
    for (int i = int(sub.size()) - 1; i >= 0; --i) {
      std::vector<int> trial = sub;
      trial.erase(trial.begin() + i);
      if (!trial.empty() && connects_idx(trial)) sub = trial;
    }
    build(j - 1, sub);

    std::vector<char> in_sub(n, 0);
    for (int v : sub) in_sub[v] = 1;
    std::vector<int> rest;
    for (int v : set)
      if (!in_sub[v]) rest.push_back(v);

    if (rest.empty()) {
      int h = -1;
      for (int v : sub)
        if (ts[v]->visits(x[j - 1])) {
          h = v;
          break;
        }
      if (h < 0) throw ContractError("trajectories do not visit point " + x[j - 1].str());
      insert_into_path(j, h + 1);
      return;
    }
    std::vector<char> touches(n, 0);
    for (int r : rest)
      for (int u : sub) touches[r] |= shares(r, u);
    const auto c = chain(rest, touches, x[j - 1]);
    int h = -1;
    for (int u : sub)
      if (shares(c[0], u)) {
        h = u;
        break;
      }
    const int root = new_vertex(shared_point(c[0], h));
    int prev = root;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const int next = i + 1 < c.size() ? new_vertex(shared_point(c[i], c[i + 1])) : j;
      add_edge(prev, next, c[i] + 1);
      prev = next;
    }
    insert_into_path(root, h + 1);
  }
};

}  // namespace detail

/// Scheme and anchor points for trajectories that strictly connect the points (shared vertices).
/// Type h is carried by trajectories[h - 1].
inline SchemeWitness scheme_from_witness(const TrajectorySet& trajectories, const std::vector<Point>& points) {
  require(points.size() >= 2, "a scheme needs at least two marked points");
  require(!trajectories.empty(), "a scheme needs at least one trajectory");
  for (std::size_t a = 0; a < trajectories.size(); ++a)
    for (std::size_t b = a + 1; b < trajectories.size(); ++b)
      require(trajectories[a] != trajectories[b] && trajectories[a]->id != trajectories[b]->id,
              "trajectories must be distinct");
  if (!connects_strictly(trajectories, points, Adjacency::shared_vertex))
    throw ContractError("trajectories do not connect the points strictly");
  detail::SchemeBuilder b(trajectories, points);
  std::vector<int> all(trajectories.size());
  std::iota(all.begin(), all.end(), 0);
  b.build(int(points.size()), all);

  SchemeWitness w;
  w.scheme.k = int(points.size());
  w.scheme.n = int(trajectories.size());
  w.scheme.edges = b.edges;
  w.anchors = b.y;
  for (const auto* t : trajectories) w.trajectory_of.push_back(t->id);
  const auto check = validate_scheme(w.scheme);
  if (!check) throw std::logic_error("constructed scheme fails " + check.condition + ": " + check.message);
  if (!condition_iii_check(w.scheme, w.anchors, trajectories))
    throw std::logic_error("constructed scheme has no order-preserving parametrization");
  return w;
}

}  // namespace interlace
