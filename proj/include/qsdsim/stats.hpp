#pragma once

// Small statistics helpers shared by the checks and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace qsdsim::stats {

struct ChiSquare {
  double statistic;
  std::size_t dof;
};

/// Two-sample chi-square on binned counts; bins empty in both samples are dropped.
inline ChiSquare two_sample_chi_square(std::span<const std::uint64_t> a,
                                       std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("histograms differ in length");
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("empty sample");
  const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  double stat = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
    if (x + y == 0.0) continue;
    ++used;
    const double d = ka * x - kb * y;
    stat += d * d / (x + y);
  }
  return {stat, used > 0 ? used - 1 : 0};
}

/// Pearson chi-square of observed counts against expected probabilities.
inline ChiSquare goodness_of_fit(std::span<const std::uint64_t> observed,
                                 std::span<const double> probabilities) {
  if (observed.size() != probabilities.size())
    throw std::invalid_argument("observed and expected differ in length");
  double n = 0.0;
  for (auto o : observed) n += static_cast<double>(o);
  double stat = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probabilities[i];
    if (e <= 0.0) continue;
    ++used;
    const double d = static_cast<double>(observed[i]) - e;
    stat += d * d / e;
  }
  return {stat, used > 0 ? used - 1 : 0};
}

inline double chi_square_quantile(std::size_t dof, double p) {
  if (dof == 0) return 0.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(dist, p);
}

/// Kolmogorov-Smirnov distance of a sample from a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw std::invalid_argument("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic KS critical value at level alpha, c(alpha) / sqrt(n).
inline double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct LineFit {
  double slope;
  double intercept;
  double slope_stderr;
};

/// Weighted least squares y = intercept + slope x. Empty weights mean equal weights,
/// in which case the slope error comes from the residual variance.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w = {}) {
  const std::size_t n = x.size();
  if (n != y.size() || (!w.empty() && w.size() != n)) throw std::invalid_argument("length mismatch");
  if (n < 2) throw std::invalid_argument("need at least two points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("x values are all equal");
  LineFit f{sxy / sxx, 0.0, 0.0};
  f.intercept = my - f.slope * mx;
  if (!w.empty()) {
    f.slope_stderr = std::sqrt(1.0 / sxx);
  } else if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

}  // namespace qsdsim::stats
