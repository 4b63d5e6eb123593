#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interlace/connectivity.hpp"
#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/sampler.hpp"

namespace interlace::harness {

// Layered exploration of the interlacement around a few marked points.
//
// Layer 0 is the process restricted to trajectories through the marked points.
// Layer j+1 is the process restricted to trajectories hitting the traces of
// layer j (their 1-neighborhood in adjacent mode) but none of the earlier
// windows, which were already sampled. By Poisson independence the layers
// together are the process restricted to trajectories within graph distance
// `layers` of the marked points, so min_connect up to `layers + 2` is exact
// (up to leg and observation truncation).

struct ExplorationParams {
  double u = 1.0;
  int observation_radius = 20;
  int truncation = 0;         // escape ball about the origin; 0 selects 2 * observation_radius
  std::size_t leg_length = 0;  // 0 selects observation_radius^2
  Adjacency mode = Adjacency::shared_vertex;
  int layers = 1;
  bool condition = true;  // resample layer 0 until every marked point is visited
  std::size_t retry_budget = 100000;
  std::size_t rejection_budget = 10000;
};

struct Exploration {
  std::vector<Point> marked;
  std::vector<InterlacementSample> layers;
  std::size_t attempts = 0;  // layer-0 draws used (1 when unconditioned)
  std::vector<std::size_t> discarded;  // per layer: trajectories already present in an earlier layer

  TrajectorySet trajectories() const {
    TrajectorySet ts;
    for (const auto& s : layers)
      for (const auto& t : s.trajectories) ts.push_back(&t);
    return ts;
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& s : layers) n += s.trajectories.size();
    return n;
  }
};

namespace detail {

inline SamplerParams layer_params(const ExplorationParams& p, int d, std::uint64_t first_id) {
  SamplerParams s;
  s.mode = EntryMode::thinning;
  s.truncation = p.truncation > 0 ? p.truncation : 2 * p.observation_radius;
  s.truncation_center = Point::origin(d);
  s.observation_center = Point::origin(d);
  s.observation_radius = p.observation_radius;
  s.leg_length = p.leg_length > 0 ? p.leg_length : std::size_t(p.observation_radius) * std::size_t(p.observation_radius);
  s.rejection_budget = p.rejection_budget;
  s.first_id = first_id;
  return s;
}

inline bool covers_all(const InterlacementSample& s, const std::vector<Point>& marked) {
  for (const auto& x : marked) {
    bool hit = false;
    for (const auto& t : s.trajectories) hit |= t.visits(x);
    if (!hit) return false;
  }
  return true;
}

}  // namespace detail

inline Exploration explore(const std::vector<Point>& marked, const ExplorationParams& p, const RngStream& rng) {
  require(!marked.empty(), "exploration needs at least one marked point");
  require(p.layers >= 0, "layer count must be nonnegative");
  const int d = marked.front().dim();
  for (const auto& x : marked)
    require(l1_norm(x) <= p.observation_radius,
            "marked point " + x.str() + " lies outside the observation ball of radius " +
                std::to_string(p.observation_radius));
  Exploration ex;
  ex.marked = marked;

  FiniteSet K0(d, marked);
  {
    HittingProcessSampler sampler(K0, detail::layer_params(p, d, 0));
    InterlacementSample s;
    do {
      if (ex.attempts >= p.retry_budget)
        throw BudgetError("marked points not all covered after " + std::to_string(ex.attempts) +
                          " draws of the process at u = " + std::to_string(p.u) +
                          " (acceptance rate below " + std::to_string(1.0 / double(p.retry_budget)) + ")");
      s = sampler.sample(p.u, rng.split(ex.attempts++));
    } while (p.condition && !detail::covers_all(s, marked));
    ex.layers.push_back(std::move(s));
    ex.discarded.push_back(0);
  }

  std::vector<FiniteSet> windows{K0};
  for (int j = 1; j <= p.layers; ++j) {
    FiniteSet W(d);
    for (const auto& t : ex.layers.back().trajectories)
      for (auto key : t.trace) {
        const Point q = KeyCodec::decode(key, d);
        W.insert(q);
        if (p.mode == Adjacency::lattice_adjacent)
          for (int c = 0; c < 2 * d; ++c) {
            const Point r = q + direction(d, c);
            if (l1_norm(r) <= p.observation_radius) W.insert(r);
          }
      }
    if (W.empty()) break;
    HittingProcessSampler sampler(W, detail::layer_params(p, d, ex.size()));
    auto s = sampler.sample(p.u, rng.split(1000000 + std::uint64_t(j)));
    std::vector<LabeledTrajectory> kept;
    std::size_t dropped = 0;
    for (auto& t : s.trajectories) {
      bool seen = false;
      for (const auto& w : windows) seen = seen || trace_meets(t, w);
      if (seen)
        ++dropped;
      else
        kept.push_back(std::move(t));
    }
    // ids stay unique but become gappy after dropping; renumber to keep them dense
    std::uint64_t id = ex.size();
    for (auto& t : kept) t.id = id++;
    s.trajectories = std::move(kept);
    windows.push_back(std::move(W));
    ex.layers.push_back(std::move(s));
    ex.discarded.push_back(dropped);
  }
  return ex;
}

/// Marked points -floor(D/2) e1 and that plus D e1 (k = 2), or the origin (k = 1).
inline std::vector<Point> antipodal_points(int d, int D, int k) {
  require(k == 1 || k == 2, "antipodal placement supports k = 1 or 2");
  if (k == 1) return {Point::origin(d)};
  Point a(d);
  a[0] = -(D / 2);
  Point b = a;
  b[0] += D;
  return {a, b};
}

}  // namespace interlace::harness
