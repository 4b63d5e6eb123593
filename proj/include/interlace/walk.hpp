#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

// ---------------------------------------------------------------------------
// Walk simulation and stopping times
// ---------------------------------------------------------------------------

/// Simple random walk with `steps` increments, each uniform over the 2d unit moves.
inline PathSegment srw_path(const Point& start, std::size_t steps, RngStream& rng) {
  PathSegment seg(start);
  const auto nd = static_cast<std::uint32_t>(2 * start.dim());
  for (std::size_t i = 0; i < steps; ++i) seg.push(static_cast<int>(rng.below(nd)));
  return seg;
}

/// H_K: first index n >= 0 with path[n] in region.
template <typename Region>
std::optional<std::size_t> first_entrance(const PathSegment& path, const Region& region) {
  std::optional<std::size_t> hit;
  path.visit([&](std::size_t i, const Point& p) {
    if (region.contains(p)) {
      hit = i;
      return false;
    }
    return true;
  });
  return hit;
}

/// H~_K: first index n >= 1 with path[n] in region.
template <typename Region>
std::optional<std::size_t> first_return(const PathSegment& path, const Region& region) {
  std::optional<std::size_t> hit;
  path.visit([&](std::size_t i, const Point& p) {
    if (i >= 1 && region.contains(p)) {
      hit = i;
      return false;
    }
    return true;
  });
  return hit;
}

/// T_K: first index n >= 0 with path[n] outside region.
template <typename Region>
std::optional<std::size_t> first_exit(const PathSegment& path, const Region& region) {
  std::optional<std::size_t> out;
  path.visit([&](std::size_t i, const Point& p) {
    if (!region.contains(p)) {
      out = i;
      return false;
    }
    return true;
  });
  return out;
}

/// Runs a walk from `p` while it stays in the l1 ball B(center, radius), calling
/// visit(point, l1 distance to center) at each time, including time 0. The walk
/// stops when visit returns false or the ball is left; returns true on exit.
template <typename Visit>
bool walk_in_ball(Point p, const Point& center, int radius, RngStream& rng, Visit&& visit) {
  int dist = l1_distance(p, center);
  const auto nd = static_cast<std::uint32_t>(2 * p.dim());
  while (dist <= radius) {
    if (!visit(static_cast<const Point&>(p), dist)) return false;
    const std::uint32_t c = rng.below(nd);
    const int a = static_cast<int>(c >> 1);
    const int before = std::abs(p[a] - center[a]);
    p[a] += (c & 1u) ? -1 : 1;
    dist += std::abs(p[a] - center[a]) - before;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of a probability or an expected count.
struct Estimate {
  double value = 0;
  double std_error = 0;
  std::size_t samples = 0;
  int truncation_radius = 0;
  /// Relative bias bound from truncating at truncation_radius.
  double bias_bound = 0;
};
using HittingEstimate = Estimate;
using GreenEstimate = Estimate;

namespace detail {

inline int default_truncation(int diameter) { return std::max(8 * diameter, 32); }

inline double truncation_bias(int dim, int dist, int radius) {
  const double gap = std::max(1, radius - dist);
  return std::pow((dist + 1.0) / gap, dim - 2);
}

inline void finish(Estimate& e, double sum, double sumsq, std::size_t n) {
  e.samples = n;
  e.value = sum / double(n);
  const double var = n > 1 ? std::max(0.0, (sumsq - sum * sum / double(n)) / double(n - 1)) : 0.0;
  e.std_error = std::sqrt(var / double(n));
}

inline void check_transient(int dim) {
  require(dim >= 3, "walk estimators need a transient dimension (d >= 3), got " + std::to_string(dim));
}

}  // namespace detail

/// g(x, y) truncated at exit from B(x, truncation): expected visits to y,
/// counting time 0. truncation <= 0 selects max(8|x-y|, 32).
inline GreenEstimate green_estimate(const Point& x, const Point& y, std::size_t samples, int truncation,
                                    RngStream& rng) {
  detail::check_transient(x.dim());
  const int r = l1_distance(x, y);
  if (truncation <= 0) truncation = detail::default_truncation(r);
  if (truncation <= r)
    throw ContractError("truncation radius " + std::to_string(truncation) + " must exceed |x-y| = " +
                        std::to_string(r));
  require(samples > 0, "green_estimate needs at least one sample");
  double sum = 0, sumsq = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    double visits = 0;
    walk_in_ball(x, x, truncation, rng, [&](const Point& p, int) {
      if (p == y) visits += 1;
      return true;
    });
    sum += visits;
    sumsq += visits * visits;
  }
  GreenEstimate e;
  e.truncation_radius = truncation;
  detail::finish(e, sum, sumsq, samples);
  e.bias_bound = detail::truncation_bias(x.dim(), r, truncation);
  return e;
}

/// P_x[H_K < infinity], with escape read as leaving B(x, truncation) first.
/// Returns exactly 1 when x is in K. truncation <= 0 selects max(8 diam, 32)
/// for the configuration K + {x}.
inline HittingEstimate hitting_probability(const Point& x, const FiniteSet& K, std::size_t samples,
                                           int truncation, RngStream& rng) {
  require(samples > 0, "hitting_probability needs at least one sample");
  HittingEstimate e;
  if (K.contains(x)) {
    e.value = 1.0;
    e.samples = samples;
    e.truncation_radius = truncation;
    return e;
  }
  detail::check_transient(x.dim());
  if (K.empty()) {
    e.samples = samples;
    return e;
  }
  int near = std::numeric_limits<int>::max(), far = 0;
  for (const auto& p : K.points()) {
    const int dd = l1_distance(x, p);
    near = std::min(near, dd);
    far = std::max(far, dd);
  }
  if (truncation <= 0) truncation = detail::default_truncation(std::max(far, K.diameter()));
  if (truncation <= near)
    throw ContractError("truncation radius " + std::to_string(truncation) + " does not reach K (distance " +
                        std::to_string(near) + ")");

  std::size_t hits = 0;
  if (K.size() == 1) {
    const Point y = K.points().front();
    for (std::size_t s = 0; s < samples; ++s)
      hits += walk_in_ball(x, x, truncation, rng, [&](const Point& p, int) { return !(p == y); }) ? 0 : 1;
  } else {
    for (std::size_t s = 0; s < samples; ++s)
      hits += walk_in_ball(x, x, truncation, rng, [&](const Point& p, int) { return !K.contains(p); }) ? 0 : 1;
  }
  const double p = double(hits) / double(samples);
  e.value = p;
  e.samples = samples;
  e.std_error = std::sqrt(p * (1 - p) / double(samples));
  e.truncation_radius = truncation;
  e.bias_bound = detail::truncation_bias(x.dim(), near, truncation);
  return e;
}

/// The orbit of z under coordinate permutations and sign changes.
inline std::vector<Point> hyperoctahedral_orbit(const Point& z) {
  const int d = z.dim();
  std::vector<int> a(d);
  for (int i = 0; i < d; ++i) a[i] = std::abs(z[i]);
  std::sort(a.begin(), a.end());
  std::vector<Point> out;
  do {
    std::vector<int> nz;
    for (int i = 0; i < d; ++i)
      if (a[i] != 0) nz.push_back(i);
    for (unsigned mask = 0; mask < (1u << nz.size()); ++mask) {
      Point p(d);
      for (int i = 0; i < d; ++i) p[i] = a[i];
      for (std::size_t j = 0; j < nz.size(); ++j)
        if ((mask >> j) & 1u) p[nz[j]] = -p[nz[j]];
      out.push_back(p);
    }
  } while (std::next_permutation(a.begin(), a.end()));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

// Sorted absolute values; two points share an orbit iff these agree.
inline std::array<int, kMaxDim> abs_profile(const Point& p) {
  std::array<int, kMaxDim> a{};
  for (int i = 0; i < p.dim(); ++i) a[i] = std::abs(p[i]);
  std::sort(a.begin(), a.begin() + p.dim());
  return a;
}

// Runs walks from the origin and feeds each orbit visit to `tally`, which returns
// the per-walk contribution at the end of the walk.
template <typename Tally>
Estimate orbit_average(const Point& z, std::size_t samples, int truncation, RngStream& rng, Tally&& tally) {
  check_transient(z.dim());
  require(samples > 0, "orbit estimator needs at least one sample");
  const int r = l1_norm(z);
  if (truncation <= 0) truncation = default_truncation(r);
  if (truncation <= r)
    throw ContractError("truncation radius " + std::to_string(truncation) + " must exceed |z| = " +
                        std::to_string(r));
  const auto target = abs_profile(z);
  const double orbit = double(hyperoctahedral_orbit(z).size());
  const Point o = Point::origin(z.dim());
  double sum = 0, sumsq = 0;
  std::vector<PointKey> seen;
  for (std::size_t s = 0; s < samples; ++s) {
    seen.clear();
    walk_in_ball(o, o, truncation, rng, [&](const Point& p, int dist) {
      if (dist == r && abs_profile(p) == target) seen.push_back(KeyCodec::encode(p));
      return true;
    });
    const double v = tally(seen) / orbit;
    sum += v;
    sumsq += v * v;
  }
  Estimate e;
  e.truncation_radius = truncation;
  finish(e, sum, sumsq, samples);
  e.bias_bound = truncation_bias(z.dim(), r, truncation);
  return e;
}

}  // namespace detail

/// g(0, z) averaged over the symmetry orbit of z; every walk scores all orbit
/// points at once. Same expectation as green_estimate(0, z).
inline GreenEstimate green_profile(const Point& z, std::size_t samples, int truncation, RngStream& rng) {
  return detail::orbit_average(z, samples, truncation, rng,
                               [](const std::vector<PointKey>& seen) { return double(seen.size()); });
}

/// P_0[H_z < infinity] averaged over the symmetry orbit of z, z != 0.
inline HittingEstimate hitting_profile(const Point& z, std::size_t samples, int truncation, RngStream& rng) {
  require(l1_norm(z) > 0, "hitting_profile needs z != 0");
  return detail::orbit_average(z, samples, truncation, rng, [](std::vector<PointKey>& seen) {
    std::sort(seen.begin(), seen.end());
    return double(std::unique(seen.begin(), seen.end()) - seen.begin());
  });
}

}  // namespace interlace
