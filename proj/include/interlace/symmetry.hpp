#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "interlace/lattice.hpp"

namespace interlace {

/// A group of signed coordinate permutations about a center point, generated by
/// single-axis reflections (on `flippable` axes) and all permutations inside
/// each block of axes. Used to shrink lattice linear systems and lattice sums
/// to one unknown per orbit.
class SignedPermGroup {
public:
  SignedPermGroup() = default;
  explicit SignedPermGroup(const Point& center) : center_(center), dim_(center.dim()) {
    for (int i = 0; i < dim_; ++i) block_[i] = i;
  }

  /// Largest such group mapping the finite set onto itself.
  static SignedPermGroup stabilizer(const FiniteSet& K, const Point& center) {
    return detect(center, [&](auto&& map) {
      for (const auto& p : K.points())
        if (!K.contains(map(p))) return false;
      return true;
    });
  }

  /// Largest such group fixing every listed point.
  static SignedPermGroup pointwise_stabilizer(const std::vector<Point>& pts, const Point& center) {
    return detect(center, [&](auto&& map) {
      for (const auto& p : pts)
        if (!(map(p) == p)) return false;
      return true;
    });
  }

  static SignedPermGroup trivial(const Point& center) { return SignedPermGroup(center); }

  const Point& center() const { return center_; }
  bool flippable(int axis) const { return flip_[axis]; }
  int block(int axis) const { return block_[axis]; }

  /// Number of group elements (for diagnostics).
  double order() const {
    double o = 1;
    for (int i = 0; i < dim_; ++i)
      if (flip_[i]) o *= 2;
    std::array<int, kMaxDim> sizes{};
    for (int i = 0; i < dim_; ++i) ++sizes[block_[i]];
    for (int b = 0; b < dim_; ++b)
      for (int j = 2; j <= sizes[b]; ++j) o *= j;
    return o;
  }

  /// Orbit representative: |y| on flippable axes, then each block sorted descending.
  Point canonical(const Point& x) const {
    Point y = x - center_;
    for (int i = 0; i < dim_; ++i)
      if (flip_[i] && y[i] < 0) y[i] = -y[i];
    for (const auto& blk : blocks_) {
      if (blk.size() < 2) continue;
      std::array<int, kMaxDim> v{};
      for (std::size_t j = 0; j < blk.size(); ++j) v[j] = y[blk[j]];
      std::sort(v.begin(), v.begin() + blk.size(), std::greater<>());
      for (std::size_t j = 0; j < blk.size(); ++j) y[blk[j]] = v[j];
    }
    return y + center_;
  }

  /// Size of the orbit of x.
  std::uint64_t orbit_size(const Point& x) const {
    const Point y = canonical(x) - center_;
    std::uint64_t n = 1;
    for (int i = 0; i < dim_; ++i)
      if (flip_[i] && y[i] != 0) n *= 2;
    for (const auto& blk : blocks_) {
      // multinomial: |blk|! / prod(multiplicity!)
      std::uint64_t num = 1;
      for (std::size_t j = 2; j <= blk.size(); ++j) num *= j;
      std::vector<int> v;
      for (int a : blk) v.push_back(y[a]);
      std::sort(v.begin(), v.end());
      std::size_t run = 1;
      for (std::size_t j = 1; j <= v.size(); ++j) {
        if (j < v.size() && v[j] == v[j - 1]) {
          ++run;
        } else {
          for (std::size_t t = 2; t <= run; ++t) num /= t;
          run = 1;
        }
      }
      n *= num;
    }
    return n;
  }

private:
  template <typename Invariant>
  static SignedPermGroup detect(const Point& c, Invariant&& invariant) {
    SignedPermGroup g(c);
    const int d = c.dim();
    for (int i = 0; i < d; ++i)
      g.flip_[i] = invariant([&](const Point& p) {
        Point q = p;
        q[i] = 2 * c[i] - p[i];
        return q;
      });
    // union of axes connected by invariant transpositions
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        if (g.block_[j] != j) continue;
        if (g.flip_[i] != g.flip_[j]) continue;
        const bool ok = invariant([&](const Point& p) {
          Point q = p;
          q[i] = c[i] + (p[j] - c[j]);
          q[j] = c[j] + (p[i] - c[i]);
          return q;
        });
        if (ok) g.block_[j] = g.block_[i];
      }
    for (int b = 0; b < d; ++b) {
      std::vector<int> blk;
      for (int i = 0; i < d; ++i)
        if (g.block_[i] == b) blk.push_back(i);
      if (!blk.empty()) g.blocks_.push_back(blk);
    }
    return g;
  }

  Point center_;
  int dim_ = 0;
  std::array<bool, kMaxDim> flip_{};
  std::array<int, kMaxDim> block_{};
  std::vector<std::vector<int>> blocks_;
};

}  // namespace interlace
