#pragma once

// Trait space [0,1] with the uniform base measure and the mutation
// location kernels g_y(z).

#include <algorithm>
#include <cmath>
#include <compare>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>

#include <boost/math/special_functions/erf.hpp>

#include "qsdsim/random.hpp"

namespace qsdsim {

/// A point of the trait space [0,1].
class TraitPoint {
 public:
  constexpr TraitPoint() = default;
  explicit TraitPoint(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0))
      throw std::out_of_range("trait outside [0,1]: " + std::to_string(value));
  }

  constexpr double value() const noexcept { return value_; }

  friend constexpr auto operator<=>(TraitPoint, TraitPoint) = default;

 private:
  double value_ = 0.0;
};

inline double distance(TraitPoint a, TraitPoint b) noexcept {
  return std::abs(a.value() - b.value());
}

/// One draw from the base measure sigma (uniform on [0,1]).
inline TraitPoint sample_base(RandomStream& rng) { return TraitPoint(rng.uniform()); }

namespace detail {

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace detail

/// Gaussian of the given scale centred at the parent, renormalized to [0,1].
struct TruncatedGaussian {
  double scale;
};

/// g_y(z) = 1 for every parent.
struct UniformOnSpace {};

class MutationKernel {
 public:
  using Family = std::variant<UniformOnSpace, TruncatedGaussian>;

  MutationKernel() : MutationKernel(UniformOnSpace{}) {}
  explicit MutationKernel(Family family) : family_(family) {
    if (auto* tg = std::get_if<TruncatedGaussian>(&family_)) {
      if (!(tg->scale > 0.0) || !std::isfinite(tg->scale))
        throw std::invalid_argument("truncated_gaussian scale must be positive");
      // Normalizer is smallest at the endpoints, where half the mass is cut.
      double z_min = detail::normal_cdf(1.0 / tg->scale) - 0.5;
      bound_ = 1.0 / (tg->scale * std::sqrt(2.0 * std::numbers::pi) * z_min);
    }
  }

  static MutationKernel uniform() { return MutationKernel(UniformOnSpace{}); }
  static MutationKernel truncated_gaussian(double scale) {
    return MutationKernel(TruncatedGaussian{scale});
  }

  const Family& family() const noexcept { return family_; }
  bool is_uniform() const noexcept { return std::holds_alternative<UniformOnSpace>(family_); }

  /// sup over (y, z) of g_y(z).
  double bound() const noexcept { return bound_; }

  /// g_parent(child) with respect to sigma.
  double density(TraitPoint parent, TraitPoint child) const {
    if (is_uniform()) return 1.0;
    double s = std::get<TruncatedGaussian>(family_).scale;
    double x = (child.value() - parent.value()) / s;
    double pdf = std::exp(-0.5 * x * x) / (s * std::sqrt(2.0 * std::numbers::pi));
    return pdf / mass_on_space(parent, s);
  }

  /// Inverse-CDF draw from g_parent; exactly one uniform per call.
  TraitPoint sample(TraitPoint parent, RandomStream& rng) const {
    double u = rng.uniform();
    if (is_uniform()) return TraitPoint(u);
    double s = std::get<TruncatedGaussian>(family_).scale;
    double lo = detail::normal_cdf(-parent.value() / s);
    double hi = detail::normal_cdf((1.0 - parent.value()) / s);
    double z = parent.value() + s * detail::normal_quantile(lo + u * (hi - lo));
    return TraitPoint(std::clamp(z, 0.0, 1.0));
  }

  std::string name() const { return is_uniform() ? "uniform" : "truncated_gaussian"; }

 private:
  static double mass_on_space(TraitPoint parent, double s) {
    return detail::normal_cdf((1.0 - parent.value()) / s) -
           detail::normal_cdf(-parent.value() / s);
  }

  Family family_;
  double bound_ = 1.0;
};

}  // namespace qsdsim
