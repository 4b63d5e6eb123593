#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <absl/container/flat_hash_set.h>

#include "interlace/errors.hpp"
#include "interlace/rng.hpp"

namespace interlace {

inline constexpr int kMaxDim = 12;

/// A point of Z^d, d <= kMaxDim. Unused coordinates are kept at zero.
class Point {
public:
  Point() = default;
  explicit Point(int dim) : dim_(dim) {
    require(dim >= 1 && dim <= kMaxDim, "dimension out of range: " + std::to_string(dim));
  }
  Point(std::initializer_list<int> coords) : Point(static_cast<int>(coords.size())) {
    std::copy(coords.begin(), coords.end(), x_.begin());
  }
  explicit Point(const std::vector<int>& coords) : Point(static_cast<int>(coords.size())) {
    std::copy(coords.begin(), coords.end(), x_.begin());
  }

  static Point origin(int dim) { return Point(dim); }
  static Point unit(int dim, int axis, int sign = 1) {
    Point p(dim);
    p[axis] = sign;
    return p;
  }

  int dim() const { return dim_; }
  int operator[](int i) const { return x_[i]; }
  std::int32_t& operator[](int i) { return x_[i]; }

  Point& operator+=(const Point& o) {
    for (int i = 0; i < dim_; ++i) x_[i] += o.x_[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    for (int i = 0; i < dim_; ++i) x_[i] -= o.x_[i];
    return *this;
  }
  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(int s, Point a) {
    for (int i = 0; i < a.dim_; ++i) a.x_[i] *= s;
    return a;
  }

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    if (auto c = a.dim_ <=> b.dim_; c != 0) return c;
    return a.x_ <=> b.x_;
  }

  std::vector<int> coords() const { return {x_.begin(), x_.begin() + dim_}; }
  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < dim_; ++i) s += (i ? "," : "") + std::to_string(x_[i]);
    return s + ")";
  }

  template <typename H>
  friend H AbslHashValue(H h, const Point& p) {
    return H::combine(std::move(h), p.x_, p.dim_);
  }

private:
  std::array<std::int32_t, kMaxDim> x_{};
  int dim_ = 0;
};

inline int l1_norm(const Point& p) {
  int s = 0;
  for (int i = 0; i < p.dim(); ++i) s += std::abs(p[i]);
  return s;
}

inline int l1_distance(const Point& a, const Point& b) {
  if (a.dim() != b.dim())
    throw ContractError("l1_distance: dimension mismatch " + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()));
  int s = 0;
  for (int i = 0; i < a.dim(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double l2_norm_sq(const Point& p) {
  double s = 0;
  for (int i = 0; i < p.dim(); ++i) s += double(p[i]) * p[i];
  return s;
}

// Direction code c in [0, 2d): axis c / 2, positive when c is even.
inline Point direction(int dim, int code) { return Point::unit(dim, code / 2, code % 2 == 0 ? 1 : -1); }

inline int direction_code(const Point& step) {
  for (int i = 0; i < step.dim(); ++i)
    if (step[i] != 0) return 2 * i + (step[i] > 0 ? 0 : 1);
  throw ContractError("not a unit step: " + step.str());
}

/// Packing of points into 64-bit keys: 64/d bits per coordinate, biased so that
/// a +-1 move of an in-range point stays inside its field.
using PointKey = std::uint64_t;

struct KeyCodec {
  static int bits(int dim) { return 64 / dim; }
  static std::int64_t offset(int dim) { return std::int64_t{1} << (bits(dim) - 1); }
  /// Largest |coordinate| that can be packed.
  static int limit(int dim) { return static_cast<int>(offset(dim) - 2); }

  static bool fits(const Point& p) {
    const int lim = limit(p.dim());
    for (int i = 0; i < p.dim(); ++i)
      if (std::abs(p[i]) > lim) return false;
    return true;
  }

  static PointKey encode(const Point& p) {
    const int b = bits(p.dim());
    const std::int64_t off = offset(p.dim());
    const int lim = limit(p.dim());
    PointKey k = 0;
    for (int i = 0; i < p.dim(); ++i) {
      if (std::abs(p[i]) > lim)
        throw ContractError("coordinate " + std::to_string(p[i]) + " exceeds packing range +-" +
                            std::to_string(lim) + " in dimension " + std::to_string(p.dim()));
      k |= static_cast<PointKey>(p[i] + off) << (b * i);
    }
    return k;
  }

  static Point decode(PointKey k, int dim) {
    const int b = bits(dim);
    const std::int64_t off = offset(dim);
    const PointKey mask = (b == 64) ? ~PointKey{0} : ((PointKey{1} << b) - 1);
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = static_cast<int>(static_cast<std::int64_t>((k >> (b * i)) & mask) - off);
    return p;
  }

  /// Key of the neighbor in direction `code`.
  static PointKey step(PointKey k, int dim, int code) {
    const PointKey unit = PointKey{1} << (bits(dim) * (code / 2));
    return code % 2 == 0 ? k + unit : k - unit;
  }
};

/// Nearest-neighbor path, stored as a start point and direction codes.
class PathSegment {
public:
  PathSegment() = default;
  explicit PathSegment(Point start) : start_(start) {}
  PathSegment(Point start, std::vector<std::uint8_t> steps) : start_(start), steps_(std::move(steps)) {
    for (auto c : steps_) require(c < 2 * start_.dim(), "direction code out of range");
  }

  /// Builds a segment from explicit points; consecutive points must be at l1 distance 1.
  static PathSegment from_points(const std::vector<Point>& pts) {
    require(!pts.empty(), "path segment must be nonempty");
    PathSegment seg(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (l1_distance(pts[i - 1], pts[i]) != 1)
        throw ContractError("path points " + pts[i - 1].str() + " and " + pts[i].str() +
                            " are not nearest neighbors");
      seg.steps_.push_back(static_cast<std::uint8_t>(direction_code(pts[i] - pts[i - 1])));
    }
    return seg;
  }

  const Point& start() const { return start_; }
  int dim() const { return start_.dim(); }
  std::size_t size() const { return steps_.size() + 1; }
  std::size_t steps() const { return steps_.size(); }
  const std::vector<std::uint8_t>& codes() const { return steps_; }

  void push(int code) {
    steps_.push_back(static_cast<std::uint8_t>(code));
  }

  /// Calls f(index, point) for every point, in order; stops early if f returns false.
  template <typename F>
  void visit(F&& f) const {
    Point p = start_;
    if (!f(std::size_t{0}, static_cast<const Point&>(p))) return;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const int c = steps_[i];
      p[c / 2] += (c % 2 == 0) ? 1 : -1;
      if (!f(i + 1, static_cast<const Point&>(p))) return;
    }
  }

  Point point_at(std::size_t index) const {
    require(index < size(), "path index out of range");
    Point p = start_;
    for (std::size_t i = 0; i < index; ++i) {
      const int c = steps_[i];
      p[c / 2] += (c % 2 == 0) ? 1 : -1;
    }
    return p;
  }

  Point end_point() const { return point_at(steps_.size()); }

  std::vector<Point> points() const {
    std::vector<Point> out;
    out.reserve(size());
    visit([&](std::size_t, const Point& p) {
      out.push_back(p);
      return true;
    });
    return out;
  }

  friend bool operator==(const PathSegment&, const PathSegment&) = default;

private:
  Point start_;
  std::vector<std::uint8_t> steps_;
};

/// Closed l1 ball {z : |z - center|_1 <= radius}.
struct Ball {
  Point center;
  int radius = 0;
  bool contains(const Point& p) const { return l1_distance(p, center) <= radius; }
};

/// Finite subset of Z^d with O(1) membership.
class FiniteSet {
public:
  FiniteSet() = default;
  explicit FiniteSet(int dim) : dim_(dim) {}
  FiniteSet(int dim, const std::vector<Point>& pts) : dim_(dim) {
    for (const auto& p : pts) insert(p);
  }
  FiniteSet(std::initializer_list<Point> pts) {
    require(pts.size() > 0, "use FiniteSet(dim) for the empty set");
    dim_ = pts.begin()->dim();
    for (const auto& p : pts) insert(p);
  }

  static FiniteSet ball(const Point& center, int radius) {
    FiniteSet s(center.dim());
    Point z = center;
    enumerate_ball(center, radius, 0, radius, z, s);
    return s;
  }

  bool insert(const Point& p) {
    if (dim_ == 0) dim_ = p.dim();
    require(p.dim() == dim_, "FiniteSet: dimension mismatch");
    if (!keys_.insert(KeyCodec::encode(p)).second) return false;
    if (points_.empty()) {
      lo_ = hi_ = p;
    } else {
      for (int i = 0; i < dim_; ++i) {
        lo_[i] = std::min(lo_[i], p[i]);
        hi_[i] = std::max(hi_[i], p[i]);
      }
    }
    points_.push_back(p);
    sorted_ = false;
    return true;
  }

  bool contains(const Point& p) const {
    if (points_.empty() || p.dim() != dim_) return false;
    for (int i = 0; i < dim_; ++i)
      if (p[i] < lo_[i] || p[i] > hi_[i]) return false;
    return keys_.contains(KeyCodec::encode(p));
  }
  bool contains_key(PointKey k) const { return keys_.contains(k); }

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Points in lexicographic order.
  const std::vector<Point>& points() const {
    if (!sorted_) {
      std::sort(points_.begin(), points_.end());
      sorted_ = true;
    }
    return points_;
  }
  const Point& lower() const { return lo_; }
  const Point& upper() const { return hi_; }

  /// Rounded-down midpoint of the bounding box.
  Point center() const {
    require(!empty(), "center of empty set");
    Point c(dim_);
    for (int i = 0; i < dim_; ++i) c[i] = static_cast<int>(std::floor((double(lo_[i]) + hi_[i]) / 2.0));
    return c;
  }

  /// Max pairwise l1 distance, via max over sign patterns of (max - min) of s.x.
  int diameter() const {
    if (points_.size() < 2) return 0;
    int best = 0;
    for (unsigned mask = 0; mask < (1u << (dim_ - 1)); ++mask) {
      long lo = 0, hi = 0;
      bool first = true;
      for (const auto& p : points_) {
        long v = 0;
        for (int i = 0; i < dim_; ++i) v += ((mask >> i) & 1u) ? -p[i] : p[i];
        if (first) {
          lo = hi = v;
          first = false;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      best = std::max(best, static_cast<int>(hi - lo));
    }
    return best;
  }

  /// Largest l1 distance from `c` to a point of the set.
  int radius_about(const Point& c) const {
    int r = 0;
    for (const auto& p : points_) r = std::max(r, l1_distance(p, c));
    return r;
  }

  friend bool operator==(const FiniteSet& a, const FiniteSet& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_;
  }

  FiniteSet united(const FiniteSet& other) const {
    FiniteSet out = *this;
    for (const auto& p : other.points_) out.insert(p);
    return out;
  }

private:
  static void enumerate_ball(const Point& center, int radius, int axis, int budget, Point& z, FiniteSet& out) {
    if (axis == center.dim()) {
      out.insert(z);
      return;
    }
    for (int v = -budget; v <= budget; ++v) {
      z[axis] = center[axis] + v;
      enumerate_ball(center, radius, axis + 1, budget - std::abs(v), z, out);
    }
    z[axis] = center[axis];
  }

  int dim_ = 0;
  mutable std::vector<Point> points_;
  mutable bool sorted_ = true;
  absl::flat_hash_set<PointKey> keys_;
  Point lo_, hi_;
};

}  // namespace interlace
