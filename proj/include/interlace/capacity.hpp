#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "interlace/errors.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/symmetry.hpp"
#include "interlace/walk.hpp"

namespace interlace {

enum class Backend { mc, exact };

inline const char* backend_name(Backend b) { return b == Backend::mc ? "mc" : "exact"; }

struct CapacityParams {
  /// Radius of the absorbing l1 ball; 0 selects max(8 diam(K), 32).
  int truncation = 0;
  /// Center of the absorbing ball; defaults to the bounding-box midpoint of K.
  std::optional<Point> center;
  /// MC: escape walks per point of K.
  std::size_t samples_per_point = 4000;
  /// Exact: stop when the max residual drops below this.
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
  /// Exact: bytes allowed for the linear system.
  std::size_t memory_budget = std::size_t{1} << 30;
  /// Exact: solve one unknown per symmetry orbit of the problem.
  bool use_symmetry = true;
};

/// e_K on K, truncated at the absorbing ball.
struct EquilibriumMeasure {
  Backend backend = Backend::exact;
  int truncation_radius = 0;
  Point center;
  std::vector<Point> support;       // sorted
  std::vector<double> weights;      // aligned with support
  std::vector<double> std_errors;   // MC only
  std::size_t unknowns = 0;         // exact: size of the reduced system
  std::size_t iterations = 0;
  double residual = 0;

  double weight(const Point& x) const {
    auto it = std::lower_bound(support.begin(), support.end(), x);
    if (it == support.end() || !(*it == x)) return 0.0;
    return weights[it - support.begin()];
  }
  double total() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }
  bool empty() const { return support.empty(); }
};

struct CapacityEstimate {
  double value = 0;
  double std_error = 0;
  int truncation_radius = 0;
  Backend backend = Backend::exact;
};

namespace detail {

inline std::pair<Point, int> resolve_ball(const FiniteSet& K, const CapacityParams& p) {
  const Point c = p.center ? *p.center : K.center();
  int rho = p.truncation > 0 ? p.truncation : std::max(8 * K.diameter(), 32);
  const int reach = K.radius_about(c);
  if (rho <= reach)
    throw ContractError("truncation radius " + std::to_string(rho) + " does not contain K (needs > " +
                        std::to_string(reach) + ")");
  return {c, rho};
}

/// Escape probabilities h(z) = P_z[leave B(c, rho) before hitting K] on the
/// orbit representatives of B \ K, solved by preconditioned conjugate gradients
/// on the symmetrized system W (I - P) h = W b.
class HarmonicSolver {
public:
  HarmonicSolver(const FiniteSet& K, Point c, int rho, const CapacityParams& params)
      : K_(K), c_(c), rho_(rho), d_(K.dim()),
        group_(params.use_symmetry ? SignedPermGroup::stabilizer(K, c) : SignedPermGroup::trivial(c)) {
    build(params.memory_budget);
    solve(params.tolerance, params.max_iterations);
  }

  /// e_K(x) for x in K.
  double escape_from(const Point& x) const {
    double e = 0;
    Point nb = x;
    for (int a = 0; a < d_; ++a)
      for (int s : {1, -1}) {
        nb[a] = x[a] + s;
        if (l1_distance(nb, c_) > rho_) {
          e += 1;
        } else if (!K_.contains(nb)) {
          e += h_[index_.at(KeyCodec::encode(group_.canonical(nb)))];
        }
        nb[a] = x[a];
      }
    return e / (2.0 * d_);
  }

  std::size_t unknowns() const { return reps_.size(); }
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

private:
  int lookup_or_add(const Point& canon, std::size_t limit) {
    auto [it, inserted] = index_.try_emplace(KeyCodec::encode(canon), static_cast<int>(reps_.size()));
    if (inserted) {
      if (reps_.size() >= limit)
        throw BudgetError("exact capacity: truncation ball radius " + std::to_string(rho_) +
                          " needs more than " + std::to_string(limit) +
                          " unknowns, over the memory budget; lower the truncation");
      reps_.push_back(canon);
    }
    return it->second;
  }

  void build(std::size_t budget) {
    const std::size_t per_unknown = 64 + 2 * d_ * 12 + 6 * 8;
    const std::size_t limit = std::max<std::size_t>(1, budget / per_unknown);
    Point nb;
    for (const auto& x : K_.points()) {
      nb = x;
      for (int a = 0; a < d_; ++a)
        for (int s : {1, -1}) {
          nb[a] = x[a] + s;
          if (l1_distance(nb, c_) <= rho_ && !K_.contains(nb)) lookup_or_add(group_.canonical(nb), limit);
          nb[a] = x[a];
        }
    }
    // breadth-first over orbit representatives; rows are built as they are dequeued
    row_start_.push_back(0);
    for (std::size_t i = 0; i < reps_.size(); ++i) {
      const Point z = reps_[i];
      weight_.push_back(double(group_.orbit_size(z)));
      double rhs = 0;
      const std::size_t first = cols_.size();
      nb = z;
      for (int a = 0; a < d_; ++a)
        for (int s : {1, -1}) {
          nb[a] = z[a] + s;
          if (l1_distance(nb, c_) > rho_) {
            rhs += 1;
          } else if (!K_.contains(nb)) {
            const int j = lookup_or_add(group_.canonical(nb), limit);
            bool merged = false;
            for (std::size_t t = first; t < cols_.size(); ++t)
              if (cols_[t] == j) {
                coef_[t] += 1;
                merged = true;
                break;
              }
            if (!merged) {
              cols_.push_back(j);
              coef_.push_back(1);
            }
          }
          nb[a] = z[a];
        }
      for (std::size_t t = first; t < cols_.size(); ++t) coef_[t] /= 2.0 * d_;
      rhs_.push_back(rhs / (2.0 * d_));
      row_start_.push_back(cols_.size());
    }
  }

  // q = (I - P) v
  void apply(const std::vector<double>& v, std::vector<double>& q) const {
    for (std::size_t i = 0; i < reps_.size(); ++i) {
      double s = v[i];
      for (std::size_t t = row_start_[i]; t < row_start_[i + 1]; ++t) s -= coef_[t] * v[cols_[t]];
      q[i] = s;
    }
  }

  void solve(double tol, std::size_t max_iter) {
    const std::size_t n = reps_.size();
    h_.assign(n, 0.0);
    if (n == 0) return;
    std::vector<double> r = rhs_, p = r, q(n);
    auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += weight_[i] * a[i] * b[i];
      return s;
    };
    auto maxabs = [&](const std::vector<double>& a) {
      double m = 0;
      for (double x : a) m = std::max(m, std::abs(x));
      return m;
    };
    double rz = wdot(r, r);
    residual_ = maxabs(r);
    while (residual_ >= tol) {
      if (iterations_ >= max_iter)
        throw BudgetError("exact capacity: no convergence after " + std::to_string(iterations_) +
                          " iterations (residual " + std::to_string(residual_) + ")");
      apply(p, q);
      const double alpha = rz / wdot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        h_[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++iterations_;
      // refresh the recursive residual now and then against drift
      if (iterations_ % 200 == 0) {
        apply(h_, q);
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs_[i] - q[i];
      }
      residual_ = maxabs(r);
      const double rz_new = wdot(r, r);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
  }

  const FiniteSet& K_;
  Point c_;
  int rho_;
  int d_;
  SignedPermGroup group_;
  absl::flat_hash_map<PointKey, int> index_;
  std::vector<Point> reps_;
  std::vector<double> weight_, rhs_, coef_, h_;
  std::vector<int> cols_;
  std::vector<std::size_t> row_start_;
  std::size_t iterations_ = 0;
  double residual_ = 0;
};

// One escape trial from x in K: first step, then success on leaving the ball
// before entering K.
inline bool escape_trial(const Point& x, const FiniteSet& K, const Point& c, int rho, RngStream& rng) {
  Point p = x;
  const std::uint32_t code = rng.below(static_cast<std::uint32_t>(2 * x.dim()));
  p[code >> 1] += (code & 1u) ? -1 : 1;
  if (K.contains(p)) return false;
  return walk_in_ball(p, c, rho, rng, [&](const Point& z, int) { return !K.contains(z); });
}

}  // namespace detail

/// e_K(x) = P_x[H~_K = infinity], read as "leaves the truncation ball before
/// returning to K". Weights are zero off K.
inline EquilibriumMeasure equilibrium_measure(const FiniteSet& K, Backend backend, const CapacityParams& params,
                                              RngStream& rng) {
  EquilibriumMeasure m;
  m.backend = backend;
  if (K.empty()) return m;
  detail::check_transient(K.dim());
  auto [c, rho] = detail::resolve_ball(K, params);
  m.center = c;
  m.truncation_radius = rho;
  m.support = K.points();
  if (backend == Backend::exact) {
    detail::HarmonicSolver solver(K, c, rho, params);
    for (const auto& x : m.support) m.weights.push_back(solver.escape_from(x));
    m.unknowns = solver.unknowns();
    m.iterations = solver.iterations();
    m.residual = solver.residual();
  } else {
    require(params.samples_per_point > 0, "MC backend needs samples_per_point > 0");
    const double n = double(params.samples_per_point);
    for (std::size_t i = 0; i < m.support.size(); ++i) {
      RngStream local = rng.split(i);
      std::size_t ok = 0;
      for (std::size_t s = 0; s < params.samples_per_point; ++s)
        ok += detail::escape_trial(m.support[i], K, c, rho, local) ? 1 : 0;
      const double p = double(ok) / n;
      m.weights.push_back(p);
      m.std_errors.push_back(std::sqrt(p * (1 - p) / n));
    }
  }
  return m;
}

inline CapacityEstimate capacity(const FiniteSet& K, Backend backend, const CapacityParams& params, RngStream& rng) {
  CapacityEstimate c;
  c.backend = backend;
  if (K.empty()) return c;
  const auto m = equilibrium_measure(K, backend, params, rng);
  c.value = m.total();
  c.truncation_radius = m.truncation_radius;
  double var = 0;
  for (double s : m.std_errors) var += s * s;
  c.std_error = std::sqrt(var);
  return c;
}

/// cap(K) from `walks` escape trials started at uniform points of K:
/// cap = |K| E[escape]. Cheaper than per-point estimates for large K.
inline CapacityEstimate capacity_uniform_mc(const FiniteSet& K, std::size_t walks, const CapacityParams& params,
                                            RngStream& rng) {
  CapacityEstimate c;
  c.backend = Backend::mc;
  if (K.empty()) return c;
  require(walks > 0, "capacity_uniform_mc needs walks > 0");
  detail::check_transient(K.dim());
  auto [ctr, rho] = detail::resolve_ball(K, params);
  const auto& pts = K.points();
  std::size_t ok = 0;
  for (std::size_t s = 0; s < walks; ++s) {
    const Point& x = pts[rng.below(static_cast<std::uint32_t>(pts.size()))];
    ok += detail::escape_trial(x, K, ctr, rho, rng) ? 1 : 0;
  }
  const double p = double(ok) / double(walks);
  c.value = double(K.size()) * p;
  c.std_error = double(K.size()) * std::sqrt(p * (1 - p) / double(walks));
  c.truncation_radius = rho;
  return c;
}

/// e_K / cap(K). MC weights are renormalized so they sum to one.
inline EquilibriumMeasure normalized_equilibrium_measure(const FiniteSet& K, Backend backend,
                                                         const CapacityParams& params, RngStream& rng) {
  require(!K.empty(), "normalized equilibrium measure of the empty set is undefined");
  auto m = equilibrium_measure(K, backend, params, rng);
  const double total = m.total();
  if (!(total > 0))
    throw ContractError("normalized equilibrium measure: capacity is zero at truncation " +
                        std::to_string(m.truncation_radius));
  for (auto& w : m.weights) w /= total;
  for (auto& s : m.std_errors) s /= total;
  return m;
}

}  // namespace interlace
