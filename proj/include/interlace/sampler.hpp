#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "interlace/capacity.hpp"
#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/walk.hpp"

namespace interlace {

/// How entry points are produced.
///  equilibrium: N ~ Poisson(u cap(K)), entries i.i.d. from the normalized
///               equilibrium measure, backward legs conditioned by rejection.
///  thinning:    M ~ Poisson(u |K|) candidates at uniform points of K, each
///               kept iff its backward leg escapes. Same law, no capacity solve.
enum class EntryMode { equilibrium, thinning };

inline const char* entry_mode_name(EntryMode m) { return m == EntryMode::equilibrium ? "equilibrium" : "thinning"; }

inline constexpr int kInfiniteRadius = INT_MAX;

struct SamplerParams {
  EntryMode mode = EntryMode::equilibrium;
  /// Absorbing ball certifying backward escape; 0 selects max(8 diam(K), 32).
  int truncation = 0;
  std::optional<Point> truncation_center;  // default: bounding-box midpoint of K
  /// Ball to which traces are clipped; 0 selects the truncation ball.
  int observation_radius = 0;
  std::optional<Point> observation_center;  // default: the truncation center
  /// Steps per leg; 0 selects 4 * observation_radius^2.
  std::size_t leg_length = 0;
  /// Backward legs also run until they leave the truncation ball.
  bool backward_until_escape = true;
  std::size_t rejection_budget = 10000;
  /// Capacity settings for equilibrium mode (exact backend).
  CapacityParams capacity;
  /// First id handed out; lets several samples share one id space.
  std::uint64_t first_id = 0;
};

/// One trajectory of the process that enters the window.
struct LabeledTrajectory {
  std::uint64_t id = 0;
  double label = 0;
  Point entry;
  PathSegment forward;   // gamma_0, gamma_1, ...
  PathSegment backward;  // gamma_0, gamma_{-1}, ...; never back in K after index 0
  std::vector<PointKey> trace;  // sorted keys of visited points inside the observation ball

  int dim() const { return entry.dim(); }
  bool visits(const Point& p) const {
    return KeyCodec::fits(p) && std::binary_search(trace.begin(), trace.end(), KeyCodec::encode(p));
  }
  bool visits_key(PointKey k) const { return std::binary_search(trace.begin(), trace.end(), k); }
  std::vector<Point> trace_points() const {
    std::vector<Point> out;
    out.reserve(trace.size());
    for (auto k : trace) out.push_back(KeyCodec::decode(k, dim()));
    return out;
  }
};

/// Realization of the process restricted to trajectories that hit `window`.
struct InterlacementSample {
  FiniteSet window;
  double intensity = 0;
  std::vector<LabeledTrajectory> trajectories;
  std::size_t leg_length = 0;
  Point observation_center;
  int observation_radius = 0;
  Point truncation_center;
  int truncation_radius = 0;
  EntryMode mode = EntryMode::equilibrium;
  /// u cap(K) in equilibrium mode; NaN in thinning mode.
  double expected_count = std::nan("");
  std::uint64_t seed = 0, stream = 0;
  std::size_t rejected_legs = 0;

  int dim() const { return window.dim(); }
  const LabeledTrajectory& by_id(std::uint64_t id) const {
    for (const auto& t : trajectories)
      if (t.id == id) return t;
    throw ContractError("no trajectory with id " + std::to_string(id));
  }
};

/// Sorted keys of the points of both legs inside B(center, radius).
inline std::vector<PointKey> clip_trace(const PathSegment& fwd, const PathSegment& bwd, const Point& center,
                                        int radius) {
  std::vector<PointKey> keys;
  auto add = [&](std::size_t, const Point& p) {
    if (l1_distance(p, center) <= radius) keys.push_back(KeyCodec::encode(p));
    return true;
  };
  fwd.visit(add);
  bwd.visit(add);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

/// Samples the interlacement process at level u restricted to trajectories
/// hitting K. Construct once per window and reuse for many replicas.
class HittingProcessSampler {
public:
  HittingProcessSampler(FiniteSet K, SamplerParams params) : K_(std::move(K)), p_(std::move(params)) {
    require(!K_.empty(), "sampler window must be nonempty");
    detail::check_transient(K_.dim());
    tc_ = p_.truncation_center ? *p_.truncation_center : K_.center();
    rho_ = p_.truncation > 0 ? p_.truncation : std::max(8 * K_.diameter(), 32);
    require(rho_ > K_.radius_about(tc_), "truncation ball must contain the window");
    oc_ = p_.observation_center ? *p_.observation_center : tc_;
    obs_ = p_.observation_radius > 0 ? p_.observation_radius : rho_;
    require(KeyCodec::limit(K_.dim()) > l1_norm(oc_) + obs_, "observation ball exceeds the packable range");
    legs_ = p_.leg_length > 0 ? p_.leg_length : 4 * std::size_t(obs_) * std::size_t(obs_);
    points_ = K_.points();
    if (p_.mode == EntryMode::equilibrium) {
      CapacityParams cp = p_.capacity;
      cp.truncation = rho_;
      cp.center = tc_;
      RngStream unused(0);
      auto m = equilibrium_measure(K_, Backend::exact, cp, unused);
      capacity_ = m.total();
      require(capacity_ > 0, "window has zero capacity at this truncation");
      double acc = 0;
      for (double w : m.weights) cumulative_.push_back(acc += w);
    }
  }

  const FiniteSet& window() const { return K_; }
  /// Truncated cap(K); NaN in thinning mode.
  double capacity() const { return p_.mode == EntryMode::equilibrium ? capacity_ : std::nan(""); }
  int truncation_radius() const { return rho_; }
  const Point& truncation_center() const { return tc_; }
  int observation_radius() const { return obs_; }
  const Point& observation_center() const { return oc_; }
  std::size_t leg_length() const { return legs_; }

  InterlacementSample sample(double u, const RngStream& rng) const {
    require(u > 0, "intensity must be positive");
    InterlacementSample s;
    s.window = K_;
    s.intensity = u;
    s.leg_length = legs_;
    s.observation_center = oc_;
    s.observation_radius = obs_;
    s.truncation_center = tc_;
    s.truncation_radius = rho_;
    s.mode = p_.mode;
    s.seed = rng.seed();
    s.stream = rng.stream();

    RngStream count_rng = rng.split(0);
    std::uint64_t id = p_.first_id;
    if (p_.mode == EntryMode::equilibrium) {
      s.expected_count = u * capacity_;
      const auto n = std::poisson_distribution<std::uint64_t>(u * capacity_)(count_rng.engine());
      for (std::uint64_t i = 0; i < n; ++i) {
        RngStream local = rng.split(1 + i);
        const double target = local.uniform() * cumulative_.back();
        const auto pick = std::upper_bound(cumulative_.begin(), cumulative_.end(), target) - cumulative_.begin();
        const Point& x = points_[std::min<std::size_t>(std::size_t(pick), points_.size() - 1)];
        std::optional<PathSegment> back;
        std::size_t attempts = 0;
        while (!back) {
          if (attempts++ >= p_.rejection_budget)
            throw BudgetError("backward leg from entry " + x.str() + " returned to the window in " +
                              std::to_string(p_.rejection_budget) +
                              " attempts; leg length or truncation too small");
          back = backward_attempt(x, local);
          if (!back) ++s.rejected_legs;
        }
        s.trajectories.push_back(finish(id++, u, x, std::move(*back), local));
      }
    } else {
      const auto m =
          std::poisson_distribution<std::uint64_t>(u * double(points_.size()))(count_rng.engine());
      for (std::uint64_t i = 0; i < m; ++i) {
        RngStream local = rng.split(1 + i);
        const Point& x = points_[local.below(static_cast<std::uint32_t>(points_.size()))];
        auto back = backward_attempt(x, local);
        if (!back) {
          ++s.rejected_legs;
          continue;
        }
        s.trajectories.push_back(finish(id++, u, x, std::move(*back), local));
      }
    }
    return s;
  }

private:
  // Walk from x; fails on any return to K. Runs leg_length steps and, if
  // requested, on until the truncation ball is left.
  std::optional<PathSegment> backward_attempt(const Point& x, RngStream& rng) const {
    PathSegment leg(x);
    Point p = x;
    int dist = l1_distance(p, tc_);
    const auto nd = static_cast<std::uint32_t>(2 * p.dim());
    bool escaped = dist > rho_;
    for (std::size_t n = 1; n <= legs_ || (p_.backward_until_escape && !escaped); ++n) {
      const std::uint32_t c = rng.below(nd);
      const int a = static_cast<int>(c >> 1);
      const int before = std::abs(p[a] - tc_[a]);
      p[a] += (c & 1u) ? -1 : 1;
      dist += std::abs(p[a] - tc_[a]) - before;
      if (K_.contains(p)) return std::nullopt;
      leg.push(static_cast<int>(c));
      if (dist > rho_) escaped = true;
    }
    return leg;
  }

  LabeledTrajectory finish(std::uint64_t id, double u, const Point& x, PathSegment back, RngStream& rng) const {
    LabeledTrajectory t;
    t.id = id;
    t.entry = x;
    t.label = u * (1.0 - rng.uniform());  // (0, u]
    t.backward = std::move(back);
    t.forward = srw_path(x, legs_, rng);
    t.trace = clip_trace(t.forward, t.backward, oc_, obs_);
    return t;
  }

  FiniteSet K_;
  SamplerParams p_;
  Point tc_, oc_;
  int rho_ = 0, obs_ = 0;
  std::size_t legs_ = 0;
  std::vector<Point> points_;
  double capacity_ = 0;
  std::vector<double> cumulative_;
};

inline InterlacementSample sample_hitting_process(const FiniteSet& K, double u, const SamplerParams& params,
                                                  const RngStream& rng) {
  return HittingProcessSampler(K, params).sample(u, rng);
}

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

/// Read-only selection of trajectories of a sample.
struct ProcessView {
  enum class Kind { all, label_band, spatial };
  const InterlacementSample* sample = nullptr;
  Kind kind = Kind::all;
  double u_low = 0, u_high = 0;                 // label band (u_low, u_high]
  std::optional<int> inner;                     // spatial: r (none means no inner ball)
  int outer = kInfiniteRadius;                  // spatial: R
  Point center;                                 // spatial: ball center
  std::vector<std::size_t> selected;            // indices into sample->trajectories, increasing

  std::size_t size() const { return selected.size(); }
  const LabeledTrajectory& operator[](std::size_t i) const { return sample->trajectories[selected[i]]; }
  std::vector<std::uint64_t> ids() const {
    std::vector<std::uint64_t> out;
    for (auto i : selected) out.push_back(sample->trajectories[i].id);
    return out;
  }
};

inline ProcessView whole(const InterlacementSample& s) {
  ProcessView v;
  v.sample = &s;
  v.u_high = s.intensity;
  for (std::size_t i = 0; i < s.trajectories.size(); ++i) v.selected.push_back(i);
  return v;
}

/// omega_{u', u''}: trajectories with label in (u', u''].
inline ProcessView restrict_labels(const ProcessView& base, double u_low, double u_high) {
  const double u = base.sample->intensity;
  if (!(0 <= u_low && u_low <= u_high && u_high <= u))
    throw ContractError("label band (" + std::to_string(u_low) + ", " + std::to_string(u_high) +
                        "] is not inside (0, " + std::to_string(u) + "]");
  ProcessView v = base;
  v.kind = ProcessView::Kind::label_band;
  v.u_low = u_low;
  v.u_high = u_high;
  v.selected.clear();
  for (auto i : base.selected) {
    const double l = base.sample->trajectories[i].label;
    if (u_low < l && l <= u_high) v.selected.push_back(i);
  }
  return v;
}

inline ProcessView restrict_labels(const InterlacementSample& s, double u_low, double u_high) {
  return restrict_labels(whole(s), u_low, u_high);
}

/// True when the observed trace meets B(center, radius).
inline bool trace_meets_ball(const LabeledTrajectory& t, const Point& center, int radius) {
  if (radius == kInfiniteRadius) return true;
  for (auto k : t.trace)
    if (l1_distance(KeyCodec::decode(k, t.dim()), center) <= radius) return true;
  return false;
}

/// sigma_R (inner = none) or sigma_{r,R}: trajectories meeting B(R) but not B(r).
inline ProcessView restrict_spatial(const ProcessView& base, std::optional<int> r, int R,
                                    std::optional<Point> center = std::nullopt) {
  if (r && *r >= R)
    throw ContractError("inner radius " + std::to_string(*r) + " must be below outer radius " + std::to_string(R));
  ProcessView v = base;
  v.kind = ProcessView::Kind::spatial;
  v.inner = r;
  v.outer = R;
  v.center = center ? *center : Point::origin(base.sample->dim());
  v.selected.clear();
  for (auto i : base.selected) {
    const auto& t = base.sample->trajectories[i];
    if (!trace_meets_ball(t, v.center, R)) continue;
    if (r && trace_meets_ball(t, v.center, *r)) continue;
    v.selected.push_back(i);
  }
  return v;
}

inline ProcessView restrict_spatial(const InterlacementSample& s, std::optional<int> r, int R,
                                    std::optional<Point> center = std::nullopt) {
  return restrict_spatial(whole(s), r, R, center);
}

/// I(sigma): union of the traces in the view.
inline FiniteSet interlacement_set(const ProcessView& v) {
  FiniteSet out(v.sample->dim());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (auto k : v[i].trace) out.insert(KeyCodec::decode(k, out.dim()));
  return out;
}

inline bool trace_meets(const LabeledTrajectory& t, const FiniteSet& A) {
  if (A.size() < t.trace.size()) {
    for (const auto& p : A.points())
      if (t.visits(p)) return true;
    return false;
  }
  for (auto k : t.trace)
    if (A.contains_key(k)) return true;
  return false;
}

/// N_A(sigma): trajectories of the view whose trace meets A.
inline std::size_t count_hitting(const ProcessView& v, const FiniteSet& A) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) n += trace_meets(v[i], A) ? 1 : 0;
  return n;
}

/// Points gamma_t for t = -|backward| .. |forward|, as a doubly-indexed walk.
inline Point trajectory_point(const LabeledTrajectory& t, long index) {
  return index >= 0 ? t.forward.point_at(std::size_t(index)) : t.backward.point_at(std::size_t(-index));
}

/// Index of the first visit to A along the whole trajectory (oldest first), if any.
inline std::optional<long> first_entry_index(const LabeledTrajectory& t, const FiniteSet& A) {
  const auto bwd = t.backward.points();
  for (std::size_t j = bwd.size(); j-- > 1;)
    if (A.contains(bwd[j])) return -long(j);
  std::optional<long> hit;
  t.forward.visit([&](std::size_t i, const Point& p) {
    if (A.contains(p)) {
      hit = long(i);
      return false;
    }
    return true;
  });
  return hit;
}

/// Psi(sigma, A, R): for each trajectory hitting A, re-indexed so time 0 is its
/// first visit to A, the points at times 1..floor(R^2/8) within l1 distance
/// floor(R/2) of the time-0 point.
inline FiniteSet psi_set(const ProcessView& v, const FiniteSet& A, int R) {
  require(R >= 0, "psi_set: R must be nonnegative");
  FiniteSet out(v.sample->dim());
  const long steps = long(R) * long(R) / 8;
  const int clip = R / 2;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& t = v[i];
    if (!trace_meets(t, A)) continue;
    const auto t0 = first_entry_index(t, A);
    if (!t0) continue;
    if (*t0 + steps > long(t.forward.steps()))
      throw ContractError("trajectory " + std::to_string(t.id) + " has a forward leg of " +
                          std::to_string(t.forward.steps()) + " steps, needs " + std::to_string(*t0 + steps) +
                          " for psi_set at R = " + std::to_string(R));
    const Point y0 = trajectory_point(t, *t0);
    for (long s = 1; s <= steps; ++s) {
      const Point p = trajectory_point(t, *t0 + s);
      if (l1_distance(p, y0) <= clip) out.insert(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cascade
// ---------------------------------------------------------------------------

/// A^(1): the walk X after its first exit from B(R), times 1..floor(R^2/8),
/// clipped to B(Y_0, floor(R/2)).
inline FiniteSet first_cascade_set(const PathSegment& X, int R, Point* y0_out = nullptr) {
  const auto exit = first_exit(X, Ball{Point::origin(X.dim()), R});
  if (!exit) throw ContractError("walk never leaves B(" + std::to_string(R) + ") within its length");
  const std::size_t steps = std::size_t(R) * std::size_t(R) / 8;
  if (*exit + steps >= X.size())
    throw ContractError("walk too short: needs " + std::to_string(*exit + steps) + " steps after the start");
  const auto pts = X.points();
  const Point y0 = pts[*exit];
  if (y0_out) *y0_out = y0;
  FiniteSet A(X.dim());
  for (std::size_t n = 1; n <= steps; ++n)
    if (l1_distance(pts[*exit + n], y0) <= R / 2) A.insert(pts[*exit + n]);
  return A;
}

/// sigma_{r, infinity}; r <= 0 means no restriction.
inline ProcessView outside_inner_ball(const InterlacementSample& s, int r) {
  return r > 0 ? restrict_spatial(s, r, kInfiniteRadius) : whole(s);
}

/// A^(depth) from pre-sampled independent processes: levels[j-2] feeds A^(j).
/// Each level's window must contain the previous set so that all trajectories
/// hitting it are present.
inline FiniteSet cascade(const std::vector<const InterlacementSample*>& levels, const PathSegment& X, int R, int r,
                         int depth) {
  require(depth >= 1, "cascade depth must be at least 1");
  require(int(levels.size()) >= depth - 1, "cascade needs one sample per level above the first");
  FiniteSet A = first_cascade_set(X, R);
  for (int j = 2; j <= depth; ++j) {
    const auto& s = *levels[j - 2];
    for (const auto& p : A.points())
      if (!s.window.contains(p))
        throw ContractError("cascade level " + std::to_string(j) + ": window does not contain " + p.str());
    A = psi_set(outside_inner_ball(s, r), A, R);
  }
  return A;
}

/// A^(depth) with each level sampled on the fly: level j is the process at
/// intensity u_bar restricted to trajectories hitting A^(j-1), obtained by
/// thinning, then cut down to sigma_{r, infinity}.
inline FiniteSet cascade_sampled(const PathSegment& X, int R, int r, int depth, double u_bar,
                                 const SamplerParams& base, const RngStream& rng) {
  require(depth >= 1, "cascade depth must be at least 1");
  FiniteSet A = first_cascade_set(X, R);
  for (int j = 2; j <= depth && !A.empty(); ++j) {
    SamplerParams p = base;
    p.mode = EntryMode::thinning;
    p.leg_length = std::max<std::size_t>(1, std::size_t(R) * std::size_t(R) / 8);
    const Point o = Point::origin(A.dim());
    p.observation_center = o;
    p.observation_radius = std::max(A.radius_about(o) + R, r + 1);
    HittingProcessSampler sampler(A, p);
    const auto s = sampler.sample(u_bar, rng.split(std::uint64_t(j)));
    A = psi_set(outside_inner_ball(s, r), A, R);
  }
  return A;
}

}  // namespace interlace
