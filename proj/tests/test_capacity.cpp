#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "interlace/capacity.hpp"
#include "interlace/stats.hpp"

using namespace interlace;

namespace {

CapacityParams exact_at(int rho, std::optional<Point> center = std::nullopt) {
  CapacityParams p;
  p.truncation = rho;
  p.center = center;
  return p;
}

FiniteSet random_set(RngStream& rng, int d, int span, int n) {
  FiniteSet K(d);
  while (int(K.size()) < n) {
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = int(rng.below(2 * span + 1)) - span;
    K.insert(p);
  }
  return K;
}

}  // namespace

TEST(Capacity, EmptySet) {
  RngStream rng(1);
  FiniteSet K(5);
  for (auto b : {Backend::exact, Backend::mc}) {
    EXPECT_TRUE(equilibrium_measure(K, b, {}, rng).empty());
    EXPECT_EQ(capacity(K, b, {}, rng).value, 0.0);
  }
  EXPECT_THROW(normalized_equilibrium_measure(K, Backend::exact, {}, rng), ContractError);
}

TEST(Capacity, WeightVanishesOffK) {
  RngStream rng(2);
  FiniteSet K{Point{0, 0, 0, 0, 0}, Point{1, 0, 0, 0, 0}};
  auto e = equilibrium_measure(K, Backend::exact, exact_at(16), rng);
  EXPECT_EQ(e.weight(Point{2, 0, 0, 0, 0}), 0.0);
  EXPECT_EQ(e.weight(Point{0, 1, 0, 0, 0}), 0.0);
  EXPECT_GT(e.weight(Point{0, 0, 0, 0, 0}), 0.0);
}

TEST(Capacity, SinglePointEscapeIsReciprocalGreen) {
  const Point o = Point::origin(5);
  FiniteSet K{o};
  RngStream a(3, 0), b(3, 1);
  CapacityParams mc = exact_at(32);
  mc.samples_per_point = 100000;
  auto esc = equilibrium_measure(K, Backend::mc, mc, a);
  auto g = green_estimate(o, o, 100000, 32, b);
  const double inv = 1.0 / g.value, inv_se = g.std_error / (g.value * g.value);
  EXPECT_LT(std::abs(esc.weights[0] - inv), 3 * std::hypot(esc.std_errors[0], inv_se));

  auto ex = equilibrium_measure(K, Backend::exact, exact_at(32), a);
  EXPECT_LT(std::abs(ex.weights[0] - inv), 3 * inv_se);
  EXPECT_LT(std::abs(ex.weights[0] - esc.weights[0]), 3 * esc.std_errors[0]);
}

TEST(Capacity, TranslationInvariantSinglePoint) {
  RngStream rng(4);
  auto c0 = capacity(FiniteSet{Point{0, 0, 0, 0, 0}}, Backend::exact, {}, rng);
  auto c1 = capacity(FiniteSet{Point{7, 3, 0, 0, 0}}, Backend::exact, {}, rng);
  EXPECT_EQ(c0.value, c1.value);
  EXPECT_EQ(c0.std_error, 0.0);
  EXPECT_EQ(c0.truncation_radius, 32);
}

TEST(Capacity, SymmetryReductionMatchesFullSolve) {
  RngStream rng(5);
  auto K = FiniteSet::ball(Point::origin(4), 2);
  CapacityParams full = exact_at(12);
  full.use_symmetry = false;
  auto reduced = equilibrium_measure(K, Backend::exact, exact_at(12), rng);
  auto plain = equilibrium_measure(K, Backend::exact, full, rng);
  EXPECT_LT(reduced.unknowns * 50, plain.unknowns);
  for (std::size_t i = 0; i < K.size(); ++i) EXPECT_NEAR(reduced.weights[i], plain.weights[i], 1e-9);
}

TEST(Capacity, BallCapacityGrowsWithLocalSlopeRisingTowardThree) {
  RngStream rng(6);
  std::vector<double> c;
  const std::vector<int> radii{2, 4, 6, 8};
  for (int radius : radii)
    c.push_back(capacity(FiniteSet::ball(Point::origin(5), radius), Backend::exact, exact_at(64), rng).value);
  double prev_slope = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    EXPECT_GT(c[i], c[i - 1]);
    const double local = std::log(c[i] / c[i - 1]) / std::log(double(radii[i]) / radii[i - 1]);
    EXPECT_GT(local, prev_slope);
    EXPECT_LT(local, 3.3);
    prev_slope = local;
  }
}

TEST(Capacity, NormalizedMeasure) {
  RngStream rng(7);
  auto single = normalized_equilibrium_measure(FiniteSet{Point{3, 1, 0, 0, 0}}, Backend::exact, {}, rng);
  ASSERT_EQ(single.weights.size(), 1u);
  EXPECT_NEAR(single.weights[0], 1.0, 1e-12);

  for (int r : {1, 3, 5}) {
    FiniteSet K{Point{-r, 0, 0, 0, 0}, Point{r, 0, 0, 0, 0}};
    auto m = normalized_equilibrium_measure(K, Backend::exact, {}, rng);
    EXPECT_NEAR(m.weights[0], 0.5, 1e-9);
    EXPECT_NEAR(m.weights[1], 0.5, 1e-9);
  }
  for (int t = 0; t < 5; ++t) {
    auto K = random_set(rng, 5, 2, 6);
    auto m = normalized_equilibrium_measure(K, Backend::exact, exact_at(12), rng);
    EXPECT_NEAR(m.total(), 1.0, 1e-9);
    CapacityParams mc = exact_at(12);
    mc.samples_per_point = 200;
    EXPECT_NEAR(normalized_equilibrium_measure(K, Backend::mc, mc, rng).total(), 1.0, 1e-12);
  }
}

TEST(Capacity, MonotoneUnderInclusion) {
  RngStream rng(8);
  const Point c = Point::origin(5);
  for (int t = 0; t < 20; ++t) {
    auto B = random_set(rng, 5, 2, 8);
    FiniteSet A(5);
    for (const auto& p : B.points())
      if (rng.below(2) || A.empty()) A.insert(p);
    auto ca = capacity(A, Backend::exact, exact_at(12, c), rng).value;
    auto cb = capacity(B, Backend::exact, exact_at(12, c), rng).value;
    EXPECT_LE(ca, cb + 1e-9);
  }
}

TEST(Capacity, Subadditive) {
  RngStream rng(9);
  const Point c = Point::origin(5);
  for (int t = 0; t < 20; ++t) {
    auto A = random_set(rng, 5, 2, 4), B = random_set(rng, 5, 2, 4);
    auto cu = capacity(A.united(B), Backend::exact, exact_at(12, c), rng).value;
    auto ca = capacity(A, Backend::exact, exact_at(12, c), rng).value;
    auto cb = capacity(B, Backend::exact, exact_at(12, c), rng).value;
    EXPECT_LE(cu, ca + cb + 1e-9);
  }
}

TEST(Capacity, MonteCarloAgreesWithExact) {
  RngStream rng(10);
  for (int t = 0; t < 10; ++t) {
    auto K = random_set(rng, 5, 1, 3 + int(rng.below(4)));
    if (K.diameter() > 8) {
      --t;
      continue;
    }
    CapacityParams p = exact_at(16);
    p.samples_per_point = 4000;
    auto ex = capacity(K, Backend::exact, p, rng);
    auto mc = capacity(K, Backend::mc, p, rng);
    EXPECT_LT(std::abs(ex.value - mc.value), 3 * mc.std_error) << "set " << t;
    auto em = equilibrium_measure(K, Backend::mc, p, rng);
    for (double w : em.weights) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
  }
}

TEST(Capacity, UniformStartEstimatorAgreesWithExact) {
  RngStream rng(11);
  auto K = FiniteSet::ball(Point::origin(5), 2);
  auto ex = capacity(K, Backend::exact, exact_at(24), rng);
  auto mc = capacity_uniform_mc(K, 40000, exact_at(24), rng);
  EXPECT_LT(std::abs(ex.value - mc.value), 3 * mc.std_error);
}

TEST(Capacity, TruncatedEscapeDecreasesTowardLimit) {
  // a larger absorbing ball makes escape harder, so truncated e_K falls with rho
  RngStream rng(12);
  FiniteSet K{Point{0, 0, 0, 0, 0}, Point{1, 0, 0, 0, 0}, Point{0, 1, 0, 0, 0}};
  const Point c = Point::origin(5);
  std::vector<double> prev;
  double last_gap = 1;
  for (int rho : {4, 8, 16, 32}) {
    auto m = equilibrium_measure(K, Backend::exact, exact_at(rho, c), rng);
    for (double w : m.weights) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
    if (!prev.empty()) {
      double gap = 0;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        EXPECT_LT(m.weights[i], prev[i]);
        gap = std::max(gap, prev[i] - m.weights[i]);
      }
      EXPECT_LT(gap, last_gap);
      last_gap = gap;
    }
    prev = m.weights;
  }
}

TEST(Capacity, GuardsAndContracts) {
  RngStream rng(13);
  auto K = FiniteSet::ball(Point::origin(5), 1);
  CapacityParams tight = exact_at(40);
  tight.use_symmetry = false;
  tight.memory_budget = 1 << 20;
  EXPECT_THROW(capacity(K, Backend::exact, tight, rng), BudgetError);
  EXPECT_THROW(capacity(K, Backend::exact, exact_at(1), rng), ContractError);
  EXPECT_THROW(capacity(FiniteSet{Point{0, 0}}, Backend::exact, {}, rng), ContractError);
}
