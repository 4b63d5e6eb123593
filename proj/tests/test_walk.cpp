#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "interlace/stats.hpp"
#include "interlace/walk.hpp"

using namespace interlace;

namespace {
double combined(double a, double b) { return std::sqrt(a * a + b * b); }

Point random_point(RngStream& rng, int d, int span) {
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = int(rng.below(2 * span + 1)) - span;
  return p;
}
}  // namespace

TEST(Green, SymmetricAtDistanceFive) {
  RngStream a(21, 0), b(21, 1);
  const Point x{0, 0, 0, 0, 0}, y{2, 1, 0, -1, 1};
  ASSERT_EQ(l1_distance(x, y), 5);
  auto gxy = green_estimate(x, y, 200000, 0, a);
  auto gyx = green_estimate(y, x, 200000, 0, b);
  EXPECT_GT(gxy.value, 0);
  EXPECT_LT(std::abs(gxy.value - gyx.value), 3 * combined(gxy.std_error, gyx.std_error));
}

TEST(Green, SymmetricOverRandomPairs) {
  RngStream rng(22);
  int checked = 0;
  while (checked < 10) {
    const Point x = random_point(rng, 5, 3), y = random_point(rng, 5, 3);
    const int r = l1_distance(x, y);
    if (r < 2 || r > 6) continue;
    RngStream s1 = rng.split(2 * checked), s2 = rng.split(2 * checked + 1);
    auto gxy = green_estimate(x, y, 60000, 48, s1);
    auto gyx = green_estimate(y, x, 60000, 48, s2);
    EXPECT_LT(std::abs(gxy.value - gyx.value), 3 * combined(gxy.std_error, gyx.std_error))
        << x.str() << " " << y.str();
    ++checked;
  }
}

TEST(Green, DiagonalCountsTimeZero) {
  RngStream rng(23);
  auto g = green_estimate(Point::origin(5), Point::origin(5), 2000, 0, rng);
  EXPECT_GT(g.value, 1.0);
  EXPECT_EQ(g.truncation_radius, 32);
}

TEST(Green, TruncationMustExceedDistance) {
  RngStream rng(24);
  EXPECT_THROW(green_estimate(Point::origin(5), Point{5, 0, 0, 0, 0}, 10, 5, rng), ContractError);
  EXPECT_THROW(green_estimate(Point::origin(2), Point{1, 0}, 10, 8, rng), ContractError);
}

TEST(Green, ProfileAgreesWithDirectEstimate) {
  RngStream a(25, 0), b(25, 1);
  const Point z{1, 1, 1, 0, 0};
  auto direct = green_estimate(Point::origin(5), z, 200000, 40, a);
  auto profile = green_profile(z, 50000, 40, b);
  EXPECT_LT(std::abs(direct.value - profile.value), 3 * combined(direct.std_error, profile.std_error));
}

TEST(Green, DecaySlopeMinusThree) {
  RngStream rng(26);
  std::vector<double> r, g;
  for (int k = 1; k <= 8; ++k) {
    const Point z = k * Point{1, 1, 1, 1, 1};
    RngStream local = rng.split(k);
    auto e = green_profile(z, 20000, 4 * l1_norm(z), local);
    r.push_back(l1_norm(z));
    g.push_back(e.value);
  }
  EXPECT_NEAR(stats::loglog_fit(r, g).slope, -3.0, 0.45);
}

TEST(Hitting, InsideKIsExactlyOne) {
  RngStream rng(27);
  FiniteSet K{Point{0, 0, 0, 0, 0}, Point{1, 0, 0, 0, 0}};
  auto h = hitting_probability(Point{1, 0, 0, 0, 0}, K, 10, 0, rng);
  EXPECT_EQ(h.value, 1.0);
  EXPECT_EQ(h.std_error, 0.0);
}

TEST(Hitting, ZeroSamplesRejected) {
  RngStream rng(28);
  FiniteSet K{Point{0, 0, 0, 0, 0}};
  EXPECT_THROW(hitting_probability(Point{3, 0, 0, 0, 0}, K, 0, 0, rng), ContractError);
  EXPECT_THROW(hitting_probability(Point{30, 0, 0, 0, 0}, K, 10, 20, rng), ContractError);
}

TEST(Hitting, BinomialStdError) {
  RngStream rng(29);
  FiniteSet K{Point{0, 0, 0, 0, 0}};
  auto h = hitting_probability(Point{1, 0, 0, 0, 0}, K, 20000, 0, rng);
  EXPECT_GE(h.value, 0.0);
  EXPECT_LE(h.value, 1.0);
  EXPECT_NEAR(h.std_error, std::sqrt(h.value * (1 - h.value) / 20000), 1e-15);
}

TEST(Hitting, GreenIdentityAtDistanceSix) {
  // P_x[H_y < inf] g(y,y) = g(x,y)
  const Point x{0, 0, 0, 0, 0}, y{2, 2, 1, 1, 0};
  ASSERT_EQ(l1_distance(x, y), 6);
  RngStream a(30, 0), b(30, 1), c(30, 2);
  auto p = hitting_probability(x, FiniteSet{y}, 400000, 64, a);
  auto gyy = green_estimate(y, y, 100000, 64, b);
  auto gxy = green_estimate(x, y, 400000, 64, c);
  const double lhs = p.value * gyy.value;
  const double sigma = combined(combined(p.std_error * gyy.value, p.value * gyy.std_error), gxy.std_error);
  EXPECT_LT(std::abs(lhs - gxy.value), 3 * sigma);
}

TEST(Hitting, ProfileAgreesWithDirectEstimate) {
  RngStream a(31, 0), b(31, 1);
  const Point z{2, 1, 0, 0, 0};
  auto direct = hitting_probability(Point::origin(5), FiniteSet{z}, 200000, 40, a);
  auto profile = hitting_profile(z, 50000, 40, b);
  EXPECT_LT(std::abs(direct.value - profile.value), 3 * combined(direct.std_error, profile.std_error));
}

TEST(Hitting, DecaySlopeMinusThree) {
  RngStream rng(32);
  std::vector<double> r, p;
  for (int k = 1; k <= 8; ++k) {
    const Point z = k * Point{1, 1, 1, 1, 1};
    RngStream local = rng.split(k);
    auto e = hitting_profile(z, 20000, 4 * l1_norm(z), local);
    r.push_back(l1_norm(z));
    p.push_back(e.value);
  }
  EXPECT_NEAR(stats::loglog_fit(r, p).slope, -3.0, 0.45);
}

TEST(Hitting, OrbitOfDiagonalPoint) {
  EXPECT_EQ(hyperoctahedral_orbit(Point{2, 2, 2, 2, 2}).size(), 32u);
  EXPECT_EQ(hyperoctahedral_orbit(Point{1, 0, 0, 0, 0}).size(), 10u);
  EXPECT_EQ(hyperoctahedral_orbit(Point{2, 1, 0}).size(), 24u);
}
