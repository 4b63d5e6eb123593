#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/scheme.hpp"
#include "interlace/symmetry.hpp"

namespace interlace {

// A tree whose vertices 1..k are anchors pinned at lattice points and whose
// vertices k+1..k+m are summed over Z^d. Each edge carries a length in [0, d)
// and contributes the factor (|y_u - y_v| + 1)^(length - d).

struct LengthEdge {
  int u = 0, v = 0;
  double length = 0;
};

struct LengthedTree {
  int k = 0, m = 0;
  std::vector<LengthEdge> edges;
  std::vector<int> origin;  // label of each vertex in the tree this one was rewritten from; empty = identity

  int vertices() const { return k + m; }
  bool is_anchor(int v) const { return v >= 1 && v <= k; }
  int original(int v) const { return origin.empty() ? v : origin[v - 1]; }

  double total_length() const {
    double s = 0;
    for (const auto& e : edges) s += e.length;
    return s;
  }
  /// Neighbor lists indexed by vertex id (entry 0 unused): (neighbor, edge index).
  std::vector<std::vector<std::pair<int, int>>> adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(vertices() + 1);
    for (int i = 0; i < int(edges.size()); ++i) {
      adj[edges[i].u].push_back({edges[i].v, i});
      adj[edges[i].v].push_back({edges[i].u, i});
    }
    return adj;
  }
  int degree(int v) const {
    int n = 0;
    for (const auto& e : edges) n += (e.u == v) + (e.v == v);
    return n;
  }
  std::string str() const {
    std::string s = "k=" + std::to_string(k) + " m=" + std::to_string(m) + " [";
    for (std::size_t i = 0; i < edges.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%d-%d:%.4g", i ? " " : "", edges[i].u, edges[i].v, edges[i].length);
      s += buf;
    }
    return s + "]";
  }
};

/// Throws ContractError unless t is a tree with every length in [0, d).
inline void validate_lengthed(const LengthedTree& t, int d) {
  require(d >= 1, "dimension must be positive");
  require(t.k >= 1 && t.m >= 0, "lengthed tree needs at least one anchor");
  const int V = t.vertices();
  require(int(t.edges.size()) == V - 1, "lengthed tree on " + std::to_string(V) + " vertices needs " +
                                            std::to_string(V - 1) + " edges, has " +
                                            std::to_string(t.edges.size()));
  require(t.origin.empty() || int(t.origin.size()) == V, "origin map has wrong size");
  std::vector<int> parent(V + 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& e : t.edges) {
    require(e.u >= 1 && e.u <= V && e.v >= 1 && e.v <= V && e.u != e.v,
            "edge " + std::to_string(e.u) + "-" + std::to_string(e.v) + " out of range");
    require(std::isfinite(e.length) && e.length >= 0 && e.length < d,
            "edge " + std::to_string(e.u) + "-" + std::to_string(e.v) + " has length " + std::to_string(e.length) +
                " outside [0, " + std::to_string(d) + ")");
    const int a = find(e.u), b = find(e.v);
    require(a != b, "edges contain a cycle through " + std::to_string(e.u) + "-" + std::to_string(e.v));
    parent[a] = b;
  }
}

/// The tree of a scheme with every edge given the same length (orientation and types dropped).
inline LengthedTree lengthed_from_scheme(const Scheme& s, double length = 2) {
  LengthedTree t;
  t.k = s.k;
  t.m = s.m() - s.k;
  for (const auto& e : s.edges) t.edges.push_back({e.from, e.to, length});
  return t;
}

struct SubtreeCheck {
  bool ok = true;
  std::string condition;      // "i" (total length) or "ii" (a proper subtree is too short)
  std::vector<int> vertices;  // the offending subtree
  double length = 0;
  int anchors = 0;
  explicit operator bool() const { return ok; }
};

inline constexpr int kSubtreeGuard = 16;
inline constexpr double kLengthSlack = 1e-9;

/// Vertex set of the smallest subtree spanning the anchors in `mask`.
inline std::vector<bool> steiner_vertices(const LengthedTree& t, std::uint32_t mask) {
  const int V = t.vertices();
  auto adj = t.adjacency();
  std::vector<bool> in(V + 1, true);
  in[0] = false;
  std::vector<int> deg(V + 1);
  for (int v = 1; v <= V; ++v) deg[v] = int(adj[v].size());
  auto keep = [&](int v) { return t.is_anchor(v) && (mask >> (v - 1) & 1); };
  std::vector<int> stack;
  for (int v = 1; v <= V; ++v)
    if (deg[v] <= 1 && !keep(v)) stack.push_back(v);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (!in[v]) continue;
    in[v] = false;
    for (auto [w, e] : adj[v])
      if (in[w] && --deg[w] <= 1 && !keep(w)) stack.push_back(w);
  }
  return in;
}

/// (i) total length < d(k-1); (ii) every proper subtree holding k1 >= 2 anchors has length >= d(k1-1).
/// Only subtrees spanned by anchor subsets need checking: any other subtree contains one with the same anchors.
inline SubtreeCheck check_subtree_condition(const LengthedTree& t, int d) {
  validate_lengthed(t, d);
  require(t.m <= kSubtreeGuard && t.k <= 20, "subtree check limited to " + std::to_string(kSubtreeGuard) +
                                                 " internal vertices and 20 anchors");
  SubtreeCheck out;
  const int V = t.vertices();
  const double total = t.total_length();
  if (!(total < double(d) * (t.k - 1))) {
    out.ok = false;
    out.condition = "i";
    for (int v = 1; v <= V; ++v) out.vertices.push_back(v);
    out.length = total;
    out.anchors = t.k;
    return out;
  }
  for (std::uint32_t mask = 1; mask < (1u << t.k); ++mask) {
    if (std::popcount(mask) < 2) continue;
    auto in = steiner_vertices(t, mask);
    const int size = int(std::count(in.begin(), in.end(), true));
    if (size == V) continue;
    int k1 = 0;
    for (int a = 1; a <= t.k; ++a) k1 += in[a];
    double len = 0;
    for (const auto& e : t.edges)
      if (in[e.u] && in[e.v]) len += e.length;
    if (len < double(d) * (k1 - 1) - kLengthSlack) {
      out.ok = false;
      out.condition = "ii";
      for (int v = 1; v <= V; ++v)
        if (in[v]) out.vertices.push_back(v);
      out.length = len;
      out.anchors = k1;
      return out;
    }
  }
  return out;
}

struct TreeSumOptions {
  double eps = 0.1;
  bool tail = true;            // also evaluate at truncation/2 and /4 for the tail extrapolation
  double work_limit = 2e10;    // distance evaluations
  double memory_limit = 2e9;   // bytes for the ball arrays
};

struct TreeSumReport {
  double value = 0;
  int truncation = 0;
  double value_half = 0, value_quarter = 0;  // same sum at truncation/2 and /4 (when tail is on)
  double tail_estimate = 0;                  // extrapolated remaining mass beyond the truncation
  bool divergent = false;                    // increments do not shrink under doubling
  double growth_ratio = 0;                   // increment ratio per doubling of the truncation
  double growth_exponent = -std::numeric_limits<double>::infinity();  // log2 of the ratio
  double length = 0;                         // l(T)
  double bound_exponent = 0;                 // d(k-1) - l(T) + eps
  std::uint64_t ball_points = 0, orbit_points = 0;
  double group_order = 1;
};

namespace detail {

/// Number of points of Z^d with l1 norm <= r.
inline double l1_ball_count(int d, int r) {
  double total = 0;
  for (int j = 0; j <= std::min(d, r); ++j) {
    double c = std::pow(2.0, j);
    for (int i = 0; i < j; ++i) c *= double(d - i) / (i + 1) * double(r - i) / (i + 1);
    total += c;
  }
  return total;
}

/// Visits offsets y with |y|_1 <= r; with a group, only canonical ones (flippable axes >= 0,
/// each block non-increasing in axis order).
template <typename F>
void for_each_offset(int d, int r, const SignedPermGroup* g, F&& f) {
  Point y(d);
  std::array<int, kMaxDim> prev{};
  if (g) {
    std::array<int, kMaxDim> last{};
    last.fill(-1);
    for (int a = 0; a < d; ++a) {
      prev[a] = last[g->block(a)];
      last[g->block(a)] = a;
    }
  } else {
    prev.fill(-1);
  }
  auto rec = [&](auto&& self, int a, int rem) -> void {
    if (a == d) {
      f(y);
      return;
    }
    int lo = g && g->flippable(a) ? 0 : -rem, hi = rem;
    if (prev[a] >= 0) hi = std::min(hi, y[prev[a]]);
    for (int v = lo; v <= hi; ++v) {
      y[a] = v;
      self(self, a + 1, rem - std::abs(v));
    }
    y[a] = 0;
  };
  rec(rec, 0, r);
}

struct Kernel {
  std::vector<double> table;
  double operator()(int dist) const { return table[dist]; }
};

inline Kernel make_kernel(double length, int d, int max_dist) {
  Kernel k;
  k.table.resize(max_dist + 1);
  for (int r = 0; r <= max_dist; ++r) k.table[r] = std::pow(double(r + 1), length - d);
  return k;
}

class TreeSumEvaluator {
public:
  TreeSumEvaluator(const LengthedTree& t, const std::vector<Point>& leaves, int d, const Point& center,
                   const SignedPermGroup& g, const TreeSumOptions& opt)
      : t_(t), leaves_(leaves), d_(d), center_(center), g_(g), opt_(opt), adj_(t.adjacency()) {
    for (const auto& x : leaves) spread_ = std::max(spread_, l1_distance(x, center));
  }

  double value(int rho, std::uint64_t* ball_points = nullptr, std::uint64_t* orbit_points = nullptr) {
    const int max_dist = 2 * rho + 2 * spread_ + 1;
    std::vector<Kernel> kern;
    for (const auto& e : t_.edges) kern.push_back(make_kernel(e.length, d_, max_dist));
    double total = 1;
    for (int i = 0; i < int(t_.edges.size()); ++i) {
      const auto& e = t_.edges[i];
      if (t_.is_anchor(e.u) && t_.is_anchor(e.v)) total *= kern[i](l1_distance(leaves_[e.u - 1], leaves_[e.v - 1]));
    }
    // components of the internal vertices
    std::vector<int> comp(t_.vertices() + 1, -1);
    std::vector<std::vector<int>> comps;
    for (int v = t_.k + 1; v <= t_.vertices(); ++v) {
      if (comp[v] >= 0) continue;
      comps.emplace_back();
      std::vector<int> stack{v};
      comp[v] = int(comps.size()) - 1;
      while (!stack.empty()) {
        const int x = stack.back();
        stack.pop_back();
        comps.back().push_back(x);
        for (auto [w, e] : adj_[x])
          if (!t_.is_anchor(w) && comp[w] < 0) {
            comp[w] = comp[v];
            stack.push_back(w);
          }
      }
    }
    bool need_ball = false;
    for (const auto& c : comps) need_ball |= c.size() > 1;
    prepare(rho, need_ball);
    if (ball_points) *ball_points = need_ball ? ball_.size() : 0;
    if (orbit_points) *orbit_points = reps_.size();
    for (const auto& c : comps) total *= component(*std::min_element(c.begin(), c.end()), kern);
    return total;
  }

private:
  struct Offsets {
    int d = 0;
    std::vector<std::int16_t> x;  // axis-major: x[a * n + i]
    std::size_t n = 0;
    std::size_t size() const { return n; }
    int at(int a, std::size_t i) const { return x[a * n + i]; }
  };

  void prepare(int rho, bool full) {
    const double ball = l1_ball_count(d_, rho);
    const double reps_est = ball / g_.order();
    double work = 0;
    int internal_edges = 0;
    for (const auto& e : t_.edges) internal_edges += !t_.is_anchor(e.u) && !t_.is_anchor(e.v);
    if (full) work = double(internal_edges) * reps_est * ball;
    const double memory = (full ? ball * (2 * d_ + 12) : 0) + reps_est * (2 * d_ + 8 * t_.m + 16);
    if (memory > opt_.memory_limit || work > opt_.work_limit) {
      int r = rho;
      while (r > 1) {
        const double b = l1_ball_count(d_, r);
        const double w = full ? internal_edges * b * b / g_.order() : 0;
        if (w <= opt_.work_limit && (full ? b * (2 * d_ + 12) : 0) + b / g_.order() * (2 * d_ + 8 * t_.m + 16) <=
                                         opt_.memory_limit)
          break;
        --r;
      }
      throw BudgetError("tree sum at truncation " + std::to_string(rho) + " needs ~" + std::to_string(work) +
                        " kernel evaluations and ~" + std::to_string(memory / 1e6) +
                        " MB; try truncation <= " + std::to_string(r));
    }
    if (prepared_rho_ == rho && (prepared_full_ || !full)) return;
    prepared_rho_ = rho;
    prepared_full_ = full;
    std::vector<Point> reps;
    for_each_offset(d_, rho, &g_, [&](const Point& y) { reps.push_back(y); });
    reps_ = pack(reps);
    orbit_.resize(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) orbit_[i] = double(g_.orbit_size(reps[i] + center_));
    ball_ = {};
    rep_of_.clear();
    if (!full) return;
    absl::flat_hash_map<Point, int> index;
    index.reserve(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) index.emplace(reps[i], int(i));
    std::vector<Point> all;
    all.reserve(std::size_t(ball));
    for_each_offset(d_, rho, nullptr, [&](const Point& y) {
      all.push_back(y);
      rep_of_.push_back(index.at(g_.canonical(y + center_) - center_));
    });
    ball_ = pack(all);
  }

  Offsets pack(const std::vector<Point>& pts) const {
    Offsets o;
    o.d = d_;
    o.n = pts.size();
    o.x.resize(std::size_t(d_) * o.n);
    for (std::size_t i = 0; i < o.n; ++i)
      for (int a = 0; a < d_; ++a) o.x[a * o.n + i] = std::int16_t(pts[i][a]);
    return o;
  }

  // phi on orbit representatives for the subtree of c hanging below `parent`.
  std::vector<double> phi(int c, int parent, const std::vector<Kernel>& kern) {
    const std::size_t R = reps_.size();
    std::vector<double> f(R, 1.0);
    for (auto [w, e] : adj_[c]) {
      if (w == parent) continue;
      if (t_.is_anchor(w)) {
        const Point off = leaves_[w - 1] - center_;
        for (std::size_t r = 0; r < R; ++r) {
          int dist = 0;
          for (int a = 0; a < d_; ++a) dist += std::abs(reps_.at(a, r) - off[a]);
          f[r] *= kern[e](dist);
        }
      } else {
        auto child = phi(w, c, kern);
        auto msg = convolve(child, kern[e]);
        for (std::size_t r = 0; r < R; ++r) f[r] *= msg[r];
      }
    }
    return f;
  }

  // M(y) = sum_z child(z) K(|y - z|), for y over representatives and z over the whole ball.
  std::vector<double> convolve(const std::vector<double>& child_rep, const Kernel& k) const {
    const std::size_t N = ball_.size(), R = reps_.size();
    std::vector<double> full(N);
    for (std::size_t i = 0; i < N; ++i) full[i] = child_rep[rep_of_[i]];
    std::vector<double> out(R);
    constexpr std::size_t B = 2048;
    std::array<int, B> dist;
    for (std::size_t r = 0; r < R; ++r) {
      double acc = 0;
      for (std::size_t s = 0; s < N; s += B) {
        const std::size_t len = std::min(B, N - s);
        std::fill(dist.begin(), dist.begin() + len, 0);
        for (int a = 0; a < d_; ++a) {
          const int ya = reps_.at(a, r);
          const std::int16_t* col = &ball_.x[a * N + s];
          for (std::size_t j = 0; j < len; ++j) dist[j] += std::abs(ya - col[j]);
        }
        for (std::size_t j = 0; j < len; ++j) acc += full[s + j] * k.table[dist[j]];
      }
      out[r] = acc;
    }
    return out;
  }

  double component(int root, const std::vector<Kernel>& kern) {
    auto f = phi(root, 0, kern);
    double s = 0;
    for (std::size_t r = 0; r < f.size(); ++r) s += f[r] * orbit_[r];
    return s;
  }

  const LengthedTree& t_;
  const std::vector<Point>& leaves_;
  int d_;
  Point center_;
  const SignedPermGroup& g_;
  TreeSumOptions opt_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
  int spread_ = 0;
  int prepared_rho_ = -1;
  bool prepared_full_ = false;
  Offsets reps_, ball_;
  std::vector<double> orbit_;
  std::vector<int> rep_of_;
};

}  // namespace detail

/// Sum over the internal vertices in the l1 ball of radius `truncation` (around the middle of the
/// anchors' bounding box) of prod_e (|y_u - y_v| + 1)^(l(e) - d). Anchors sit at `leaves`.
inline TreeSumReport tree_sum(const LengthedTree& t, const std::vector<Point>& leaves, int truncation, int d,
                              const TreeSumOptions& opt = {}) {
  validate_lengthed(t, d);
  require(int(leaves.size()) == t.k, "need one position per anchor: " + std::to_string(t.k) + " expected, " +
                                         std::to_string(leaves.size()) + " given");
  for (const auto& x : leaves) require(x.dim() == d, "anchor position dimension differs from d");
  int spread = 0;
  for (const auto& a : leaves)
    for (const auto& b : leaves) spread = std::max(spread, l1_distance(a, b));
  require(truncation >= 1 && truncation >= 2 * spread,
          "truncation " + std::to_string(truncation) + " below twice the anchor spread " + std::to_string(spread));
  require(truncation <= 16000, "truncation too large for packed offsets");

  Point center(d);
  for (int a = 0; a < d; ++a) {
    int lo = leaves[0][a], hi = leaves[0][a];
    for (const auto& x : leaves) lo = std::min(lo, x[a]), hi = std::max(hi, x[a]);
    center[a] = int(std::floor((double(lo) + hi) / 2));
  }
  const auto g = SignedPermGroup::pointwise_stabilizer(leaves, center);
  detail::TreeSumEvaluator ev(t, leaves, d, center, g, opt);

  TreeSumReport rep;
  rep.truncation = truncation;
  rep.length = t.total_length();
  rep.bound_exponent = double(d) * (t.k - 1) - rep.length + opt.eps;
  rep.group_order = g.order();
  rep.value = ev.value(truncation, &rep.ball_points, &rep.orbit_points);
  if (!opt.tail) {
    rep.tail_estimate = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  if (truncation < 4 || t.m == 0) {
    rep.tail_estimate = t.m == 0 ? 0 : std::numeric_limits<double>::infinity();
    rep.value_half = rep.value_quarter = t.m == 0 ? rep.value : 0;
    return rep;
  }
  rep.value_half = ev.value(truncation / 2);
  rep.value_quarter = ev.value(truncation / 4);
  const double d1 = rep.value_half - rep.value_quarter, d2 = rep.value - rep.value_half;
  if (d2 <= 0) {
    rep.growth_ratio = 0;
    rep.tail_estimate = 0;
  } else if (d1 <= 0) {
    rep.growth_ratio = std::numeric_limits<double>::infinity();
    rep.divergent = true;
    rep.tail_estimate = std::numeric_limits<double>::infinity();
  } else {
    rep.growth_ratio = d2 / d1;
    rep.divergent = rep.growth_ratio >= 1;
    rep.tail_estimate = rep.divergent ? std::numeric_limits<double>::infinity()
                                      : d2 * rep.growth_ratio / (1 - rep.growth_ratio);
  }
  if (rep.growth_ratio > 0) rep.growth_exponent = std::log2(rep.growth_ratio);
  return rep;
}

// ---------------------------------------------------------------------------
// Reduction: contract degree-2 internal vertices (l + l' + delta) and split
// pairs of anchors hanging off one internal vertex (l1 + l2 - d) until two
// anchors joined by one edge remain.

struct ReductionStep {
  std::string kind;  // "contract" or "split"
  LengthedTree tree;
  std::vector<int> involved;  // original labels: contract {u, w, v}; split {kept, dropped, hub}
  double length_before = 0, length_after = 0;
  int anchors_before = 0, anchors_after = 0;
  double exponent_before = 0, exponent_after = 0;  // d(k-1) - l
  std::string alternative;
  SubtreeCheck certificate;
};

struct ReductionTrace {
  LengthedTree initial;
  std::vector<ReductionStep> steps;
  double delta_used = 0;
  const LengthedTree& final_tree() const { return steps.empty() ? initial : steps.back().tree; }
};

namespace detail {

inline LengthedTree drop_vertex(const LengthedTree& t, int x) {
  LengthedTree out;
  out.k = t.k - t.is_anchor(x);
  out.m = t.m - !t.is_anchor(x);
  auto lab = [&](int v) { return v > x ? v - 1 : v; };
  for (const auto& e : t.edges) {
    if (e.u == x || e.v == x) continue;
    out.edges.push_back({lab(e.u), lab(e.v), e.length});
  }
  for (int v = 1; v <= t.vertices(); ++v)
    if (v != x) out.origin.push_back(t.original(v));
  return out;
}

}  // namespace detail

inline ReductionTrace reduce_tree(const LengthedTree& t, double delta, int d,
                                  std::optional<double> eps = std::nullopt) {
  validate_lengthed(t, d);
  require(delta > 0, "delta must be positive");
  require(t.k >= 2, "reduction needs at least two anchors");
  for (int v = 1; v <= t.vertices(); ++v) {
    const int deg = t.degree(v);
    if (t.is_anchor(v))
      require(deg == 1, "malformed tree: anchor " + std::to_string(v) + " has degree " + std::to_string(deg));
    else
      require(deg >= 2, "malformed tree: internal vertex " + std::to_string(v) + " is a leaf");
  }
  auto start = check_subtree_condition(t, d);
  require(bool(start), "tree violates condition (" + start.condition + ") before reduction");

  ReductionTrace trace;
  trace.initial = t;
  if (trace.initial.origin.empty())
    for (int v = 1; v <= t.vertices(); ++v) trace.initial.origin.push_back(v);

  auto exponent = [&](const LengthedTree& x) { return double(d) * (x.k - 1) - x.total_length(); };
  while (true) {
    const LengthedTree& cur = trace.final_tree();
    auto adj = cur.adjacency();
    bool has_degree2 = false;
    for (int w = cur.k + 1; w <= cur.vertices(); ++w) has_degree2 |= adj[w].size() == 2;
    if (cur.k == 2 && !has_degree2) break;

    ReductionStep step;
    step.length_before = cur.total_length();
    step.anchors_before = cur.k;
    step.exponent_before = exponent(cur);

    bool done = false;
    for (int w = cur.k + 1; w <= cur.vertices() && !done; ++w) {
      if (adj[w].size() != 2) continue;
      auto [u, eu] = adj[w][0];
      auto [v, ev] = adj[w][1];
      const double merged = cur.edges[eu].length + cur.edges[ev].length + delta;
      if (!(merged < d)) continue;
      LengthedTree next = cur;
      next.edges.push_back({std::min(u, v), std::max(u, v), merged});
      step.involved = {cur.original(u), cur.original(w), cur.original(v)};
      step.tree = detail::drop_vertex(next, w);
      step.kind = "contract";
      trace.delta_used += delta;
      done = true;
    }
    for (int w = cur.k + 1; w <= cur.vertices() && !done; ++w) {
      std::vector<std::pair<int, int>> hanging;
      for (auto [x, e] : adj[w])
        if (cur.is_anchor(x)) hanging.push_back({x, e});
      if (hanging.size() < 2) continue;
      std::sort(hanging.begin(), hanging.end());
      auto [a, ea] = hanging[0];
      auto [b, eb] = hanging[1];
      const double joined = cur.edges[ea].length + cur.edges[eb].length - d;
      if (joined < -kLengthSlack) continue;
      LengthedTree next = cur;
      next.edges[ea].length = std::max(0.0, joined);
      step.involved = {cur.original(a), cur.original(b), cur.original(w)};
      step.alternative = "hub " + std::to_string(cur.original(w)) + " joined to anchor " +
                         std::to_string(cur.original(b)) + " instead of " + std::to_string(cur.original(a));
      step.tree = detail::drop_vertex(next, b);
      step.kind = "split";
      done = true;
    }
    if (!done)
      throw ContractError("no applicable rewrite on " + cur.str() +
                          (has_degree2 ? " (every contraction would reach length d)" : ""));

    step.length_after = step.tree.total_length();
    step.anchors_after = step.tree.k;
    step.exponent_after = exponent(step.tree);
    if (step.kind == "contract") {
      if (std::abs(step.length_after - step.length_before - delta) > kLengthSlack || step.anchors_after != step.anchors_before)
        throw std::logic_error("contraction bookkeeping broken");
      if (eps && trace.delta_used > *eps / 2 + kLengthSlack)
        throw BudgetError("delta budget exhausted: " + std::to_string(trace.delta_used) + " added, eps/2 = " +
                          std::to_string(*eps / 2));
    } else {
      if (step.anchors_after != step.anchors_before - 1 ||
          std::abs(step.exponent_after - step.exponent_before) > kLengthSlack)
        throw std::logic_error("split bookkeeping broken");
      // a clamped tiny negative length is the only way the -d rule can be off
      if (std::abs(step.length_after - step.length_before + d) > 1e-6)
        throw std::logic_error("split bookkeeping broken");
    }
    step.certificate = check_subtree_condition(step.tree, d);
    if (!step.certificate) {
      if (step.certificate.condition == "i")
        throw BudgetError("delta budget exhausted: total length " + std::to_string(step.length_after) +
                          " reaches d(k-1) after contracting " + std::to_string(step.involved[1]));
      throw std::logic_error("reduction broke condition (ii) on " + step.tree.str());
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

}  // namespace interlace
