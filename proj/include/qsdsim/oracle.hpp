#pragma once

// Finite-state ground truth for trait-blind models: the total-mass chain on
// {1..N} with 0 absorbing, births out of N lost to truncation (a strict
// sub-generator), its principal left eigenpair and first-passage times.
// Also the Lyapunov exponent ODE da/dt = l*(1 - e^-a) + B*(1 - e^a).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsdsim/errors.hpp"
#include "qsdsim/rates.hpp"

namespace qsdsim {

class MassChainOracle {
 public:
  MassChainOracle(std::vector<double> birth, std::vector<double> death)
      : birth_(std::move(birth)), death_(std::move(death)) {
    if (birth_.size() != death_.size() || birth_.size() < 2)
      throw UnsupportedModel("mass chain needs N >= 2 states");
  }

  std::size_t size() const noexcept { return birth_.size(); }
  /// Rate k -> k+1 out of state k (1-based); at k = N this is the truncation loss.
  double birth(std::size_t k) const { return birth_.at(k - 1); }
  /// Rate k -> k-1 out of state k (1-based); at k = 1 this is absorption.
  double death(std::size_t k) const { return death_.at(k - 1); }
  double exit_rate(std::size_t k) const { return birth(k) + death(k); }
  double max_exit_rate() const {
    double m = 0.0;
    for (std::size_t k = 1; k <= size(); ++k) m = std::max(m, exit_rate(k));
    return m;
  }

  /// (x Q_sub)_j for a row vector x over states 1..N.
  std::vector<double> left_apply(const std::vector<double>& x) const {
    const std::size_t n = size();
    std::vector<double> y(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = -(birth_[j] + death_[j]) * x[j];
      if (j > 0) y[j] += birth_[j - 1] * x[j - 1];
      if (j + 1 < n) y[j] += death_[j + 1] * x[j + 1];
    }
    return y;
  }

  /// Row sum of Q_sub at state k: minus absorption minus truncation loss.
  double row_sum(std::size_t k) const {
    double s = -exit_rate(k);
    if (k > 1) s += death(k);
    if (k < size()) s += birth(k);
    return s;
  }

 private:
  std::vector<double> birth_;
  std::vector<double> death_;
};

/// Mass chain of a model whose rates depend on the configuration only
/// through its total mass. Evaluated on a single-trait configuration.
template <RateModelLike Model>
MassChainOracle build_mass_chain(const Model& model, std::size_t N) {
  if (!model.mass_only()) throw UnsupportedModel("rates depend on more than total mass");
  if (N < 2) throw UnsupportedModel("truncation N must be >= 2");
  std::vector<double> birth(N), death(N);
  for (std::size_t k = 1; k <= N; ++k) {
    auto c = Configuration::singleton(TraitPoint(0.5), static_cast<std::uint32_t>(k));
    EventTable t = event_table(model, c);
    birth[k - 1] = t.birth_total();
    death[k - 1] = t.death_total;
  }
  return MassChainOracle(std::move(birth), std::move(death));
}

struct Eigenpair {
  double theta;            // decay rate: nu Q_sub = -theta nu
  std::vector<double> nu;  // index k-1 holds nu(k)
  double residual;         // || nu Q_sub + theta nu ||_1
  std::size_t iterations;
};

/// Power iteration on K = I + Q_sub / Lambda. Lambda defaults to the maximal
/// exit rate; any Lambda at least that large gives the same eigenpair.
inline Eigenpair principal_left_eigenpair(const MassChainOracle& o, double tol,
                                          std::size_t max_iters,
                                          std::optional<double> uniformization = std::nullopt) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const double lambda_u = uniformization.value_or(o.max_exit_rate());
  if (lambda_u < o.max_exit_rate())
    throw std::invalid_argument("uniformization rate below the maximal exit rate");
  const std::size_t n = o.size();
  std::vector<double> nu(n, 1.0 / static_cast<double>(n));
  auto residual_of = [&](const std::vector<double>& v, double theta) {
    auto q = o.left_apply(v);
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += std::abs(q[j] + theta * v[j]);
    return r;
  };
  for (std::size_t it = 1; it <= max_iters; ++it) {
    auto q = o.left_apply(nu);
    double mass = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      nu[j] += q[j] / lambda_u;
      nu[j] = std::max(nu[j], 0.0);
      mass += nu[j];
    }
    for (double& v : nu) v /= mass;
    const double theta = lambda_u * (1.0 - mass);
    // Cheap check first; the residual is the contract.
    if (it % 16 == 0 || it == max_iters) {
      double r = residual_of(nu, theta);
      if (r <= tol) {
        // theta from the Rayleigh-type ratio of the normalized vector
        auto qn = o.left_apply(nu);
        double th = 0.0;
        for (double v : qn) th -= v;
        return {th, nu, residual_of(nu, th), it};
      }
    }
  }
  throw NoConvergence("power iteration did not reach tol within max_iters");
}

/// Expected absorption time from k0: solves Q_sub u = -1 (tridiagonal).
inline double mean_extinction_time(const MassChainOracle& o, std::size_t k0) {
  const std::size_t n = o.size();
  if (k0 < 1 || k0 > n) throw std::out_of_range("k0 outside 1..N");
  // Thomas algorithm on rows j: sub = death(j), diag = -exit(j), super = birth(j).
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = j + 1;
    double sub = j > 0 ? o.death(k) : 0.0;
    double diag = -o.exit_rate(k);
    double sup = j + 1 < n ? o.birth(k) : 0.0;
    double denom = diag - (j > 0 ? sub * c[j - 1] : 0.0);
    if (std::abs(denom) < 1e-300) throw SingularSystem("zero pivot in first-passage system");
    c[j] = sup / denom;
    d[j] = (-1.0 - (j > 0 ? sub * d[j - 1] : 0.0)) / denom;
  }
  std::vector<double> u(n);
  u[n - 1] = d[n - 1];
  for (std::size_t j = n - 1; j-- > 0;) u[j] = d[j] - c[j] * u[j + 1];
  return u[k0 - 1];
}

struct OdePoint {
  double t;
  double a;
};

namespace detail {
inline double lyapunov_rhs(double a, double lambda_star, double b_star) {
  return lambda_star * (-std::expm1(-a)) - b_star * std::expm1(a);
}
}  // namespace detail

/// Classical RK4 with step t_end / ceil(t_end / dt). a0 may sit on the upper
/// fixed point log(l*/B*), which yields a constant trajectory.
inline std::vector<OdePoint> ode_trajectory(double lambda_star, double b_star, double a0,
                                            double t_end, double dt) {
  if (!(lambda_star > b_star) || !(b_star > 0.0))
    throw InvalidRegime("needs lambda_* > B* > 0");
  const double upper = std::log(lambda_star / b_star);
  if (!(a0 > 0.0 && a0 <= upper)) throw InvalidRegime("a0 must lie in (0, log(lambda_*/B*)]");
  if (!(dt > 0.0) || t_end < 0.0) throw std::invalid_argument("need dt > 0 and t_end >= 0");
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt));
  const double h = steps ? t_end / static_cast<double>(steps) : 0.0;
  std::vector<OdePoint> out;
  out.reserve(steps + 1);
  double a = a0;
  out.push_back({0.0, a});
  auto f = [&](double x) { return detail::lyapunov_rhs(x, lambda_star, b_star); };
  for (std::size_t i = 1; i <= steps; ++i) {
    double k1 = f(a);
    double k2 = f(a + 0.5 * h * k1);
    double k3 = f(a + 0.5 * h * k2);
    double k4 = f(a + h * k3);
    a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back({i == steps ? t_end : h * static_cast<double>(i), a});
  }
  return out;
}

/// a(t) at one time, integrated with steps no longer than dt.
inline double ode_value_at(double lambda_star, double b_star, double a0, double t,
                           double dt = 1e-3) {
  return ode_trajectory(lambda_star, b_star, a0, t, dt).back().a;
}

}  // namespace qsdsim
