#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "interlace/errors.hpp"

namespace interlace::stats {

struct Summary {
  double mean = 0;
  double variance = 0;  // unbiased
  std::size_t n = 0;
  double std_error() const { return n ? std::sqrt(variance / double(n)) : 0.0; }
};

template <typename Range>
Summary summarize(const Range& xs) {
  Summary s;
  double sum = 0;
  for (double x : xs) {
    sum += x;
    ++s.n;
  }
  if (s.n == 0) return s;
  s.mean = sum / double(s.n);
  double ss = 0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.variance = s.n > 1 ? ss / double(s.n - 1) : 0.0;
  return s;
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_std_error = 0;
};

/// Ordinary least squares y = a + b x.
inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "ols needs two or more paired values");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0, "ols needs at least two distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_std_error = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

/// OLS of log y on log x. Nonpositive values are rejected.
inline LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0 && y[i] > 0, "loglog_fit needs positive values");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return ols(lx, ly);
}

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = double(trials);
  const double p = double(successes) / n;
  const double denom = 1 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct ChiSquare {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
};

/// Pearson goodness of fit of observed counts against expected probabilities.
inline ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& probs) {
  require(observed.size() == probs.size() && observed.size() >= 2, "chi_square needs two or more cells");
  double total = 0;
  for (double o : observed) total += o;
  ChiSquare c;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = total * probs[i];
    require(e > 0, "chi_square: zero expected count");
    c.statistic += (observed[i] - e) * (observed[i] - e) / e;
  }
  c.dof = int(observed.size()) - 1;
  boost::math::chi_squared dist(c.dof);
  c.p_value = boost::math::cdf(boost::math::complement(dist, c.statistic));
  return c;
}

/// Two-sided normal p-value of a z score.
inline double normal_two_sided(double z) {
  boost::math::normal n;
  return 2 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

}  // namespace interlace::stats
