#pragma once

// The coupled process (eta, m) on J = {||eta|| <= m}: the first coordinate
// follows the population process, the second a birth-death chain with
// per-capita rates B* (birth) and lambda_* (death). Also the dominating
// pure-birth tail and the geometric q.s.d. of the linear birth-death chain.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qsdsim/errors.hpp"
#include "qsdsim/rates.hpp"
#include "qsdsim/simulator.hpp"

namespace qsdsim {

struct CoupledState {
  Configuration config;
  std::uint64_t counter = 0;

  bool in_domain() const noexcept { return config.mass() <= counter; }
};

/// The six transition lines of the coupled generator.
enum class CouplingLine : std::uint8_t {
  clonal_both,       // (eta + delta_y, m + 1), rate eta_y b_y
  mutation_both,     // (eta + delta_z, m + 1), density G(eta, z)
  counter_birth,     // (eta, m + 1),          rate m B* - sum eta_y (b_y + m_y)
  death_both,        // (eta - delta_y, m - 1), rate lambda_* eta_y
  death_first_only,  // (eta - delta_y, m),     rate eta_y (lambda_y - lambda_*)
  counter_death,     // (eta, m - 1),          rate lambda_* (m - ||eta||)
  none,              // absorbed at (0, 0)
};

struct CouplingRates {
  double clonal_both = 0.0;
  double mutation_both = 0.0;
  double counter_birth = 0.0;
  double death_both = 0.0;
  double death_first_only = 0.0;
  double counter_death = 0.0;

  double total() const noexcept {
    return clonal_both + mutation_both + counter_birth + death_both + death_first_only +
           counter_death;
  }
};

namespace detail {
// Tolerance for rounding in the slack lines; anything more negative is a real breach.
inline double slack(double v, double scale, const char* line) {
  if (v < -1e-9 * std::max(1.0, scale))
    throw InvariantBreach(std::string(line) + " rate is negative (" + format_double(v) +
                          "); the model's bounds are not bounds");
  return v > 0.0 ? v : 0.0;
}
}  // namespace detail

/// Totals of each coupling line at state s.
template <RateModelLike Model>
CouplingRates coupling_rates(const Model& model, const CoupledState& s) {
  if (!s.in_domain()) throw InvariantBreach("state outside J: ||eta|| > m");
  EventTable t = event_table(model, s.config);
  const double m = static_cast<double>(s.counter);
  const double mass = static_cast<double>(s.config.mass());
  const double bstar = model.birth_bound();
  const double lstar = model.death_floor();
  CouplingRates r;
  r.clonal_both = t.clonal_total;
  r.mutation_both = t.mutation_total;
  r.counter_birth = detail::slack(m * bstar - t.birth_total(), m * bstar, "counter_birth");
  r.death_both = lstar * mass;
  r.death_first_only = detail::slack(t.death_total - lstar * mass, t.death_total, "death_first_only");
  r.counter_death = lstar * (m - mass);
  return r;
}

struct CoupledStep {
  double holding;  // +inf when absorbed at (0, 0)
  CoupledState next;
  CouplingLine line;
};

/// One jump of the coupled chain.
template <RateModelLike Model>
CoupledStep step_coupled(const Model& model, const CoupledState& s, RandomStream& rng) {
  CouplingRates r = coupling_rates(model, s);
  const double total = r.total();
  if (!(total > 0.0)) return {std::numeric_limits<double>::infinity(), s, CouplingLine::none};

  CoupledStep out{rng.exponential(total), s, CouplingLine::none};
  double target = rng.uniform() * total;
  auto entries = s.config.entries();
  const double lstar = model.death_floor();

  // Per-trait choice within a line, one uniform each.
  auto pick = [&](auto&& weight_of) {
    double sum = 0.0;
    std::vector<double> w(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) sum += (w[i] = weight_of(i));
    return entries[detail::pick_weighted(w, sum, rng.uniform())].trait;
  };

  if ((target -= r.clonal_both) < 0.0) {
    EventTable t = event_table(model, s.config);
    out.next.config.add(pick([&](std::size_t i) { return t.clonal[i]; }));
    ++out.next.counter;
    out.line = CouplingLine::clonal_both;
  } else if ((target -= r.mutation_both) < 0.0) {
    TraitPoint parent = sample_mutation_parent(model, s.config, rng);
    out.next.config.add(model.kernel().sample(parent, rng));
    ++out.next.counter;
    out.line = CouplingLine::mutation_both;
  } else if ((target -= r.counter_birth) < 0.0) {
    ++out.next.counter;
    out.line = CouplingLine::counter_birth;
  } else if ((target -= r.death_both) < 0.0) {
    out.next.config.remove(pick([&](std::size_t i) { return lstar * entries[i].weight; }));
    --out.next.counter;
    out.line = CouplingLine::death_both;
  } else if ((target -= r.death_first_only) < 0.0) {
    EventTable t = event_table(model, s.config);
    out.next.config.remove(pick([&](std::size_t i) {
      return std::max(0.0, t.death[i] - lstar * entries[i].weight);
    }));
    out.line = CouplingLine::death_first_only;
  } else {
    --out.next.counter;
    out.line = CouplingLine::counter_death;
  }
  if (!out.next.in_domain())
    throw InvariantBreach("coupled step left J: ||eta|| = " +
                          std::to_string(out.next.config.mass()) +
                          " > m = " + std::to_string(out.next.counter));
  return out;
}

struct CoupledPath {
  CoupledState final_state;
  std::uint64_t jumps = 0;
  /// Jumps after which ||eta|| > m was observed (must stay 0).
  std::uint64_t violations = 0;
};

/// Runs the coupled chain to the horizon, checking ||eta_t|| <= m_t after every jump.
template <RateModelLike Model>
CoupledPath simulate_coupled(const Model& model, CoupledState s, double horizon,
                             RandomStream& rng) {
  CoupledPath path;
  double t = 0.0;
  while (true) {
    CoupledStep step = step_coupled(model, s, rng);
    if (t + step.holding > horizon) break;
    t += step.holding;
    s = std::move(step.next);
    ++path.jumps;
    if (!s.in_domain()) ++path.violations;
  }
  path.final_state = std::move(s);
  return path;
}

/// Linear birth-death chain with per-capita rates; returns the count at the horizon.
inline std::uint64_t simulate_birth_death(double birth, double death, std::uint64_t start,
                                          double horizon, RandomStream& rng) {
  std::uint64_t n = start;
  double t = 0.0;
  while (n > 0) {
    double rate = static_cast<double>(n) * (birth + death);
    t += rng.exponential(rate);
    if (t > horizon) break;
    if (rng.uniform() * (birth + death) < birth)
      ++n;
    else
      --n;
  }
  return n;
}

/// P(Z_t >= K) for the pure-birth process Z with per-capita rate B* started at k0.
inline double pure_birth_tail(std::uint64_t k0, std::uint64_t K, double rate, double t) {
  if (K <= k0) return 1.0;
  if (k0 == 0) return 0.0;
  // Z_t - k0 is negative binomial: P(Z_t = m) = C(m-1, k0-1) p^k0 (1-p)^(m-k0), p = e^{-rate t}
  const double log_p = -rate * t;
  const double log_q = std::log1p(-std::exp(log_p));
  double below = 0.0;
  for (std::uint64_t m = k0; m < K; ++m) {
    double log_c = std::lgamma(static_cast<double>(m)) - std::lgamma(static_cast<double>(k0)) -
                   std::lgamma(static_cast<double>(m - k0 + 1));
    below += std::exp(log_c + static_cast<double>(k0) * log_p +
                      static_cast<double>(m - k0) * log_q);
  }
  return std::max(0.0, 1.0 - below);
}

struct BirthDeathQsd {
  std::vector<double> probabilities;  // index k-1 holds zeta(k)
  double tail_mass = 0.0;             // (b / lambda)^kmax, removed by truncation
};

/// zeta(k) = (b/lambda)^(k-1) (1 - b/lambda) for k = 1..kmax, renormalized.
inline BirthDeathQsd bd_qsd(double lambda, double b, std::uint64_t kmax = 60) {
  if (!(lambda > b)) throw InvalidRegime("a q.s.d. exists only when lambda > b");
  if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
  if (kmax < 1) throw std::invalid_argument("kmax must be >= 1");
  const double r = b / lambda;
  BirthDeathQsd out;
  out.tail_mass = std::pow(r, static_cast<double>(kmax));
  out.probabilities.reserve(kmax);
  double term = 1.0 - r;
  for (std::uint64_t k = 1; k <= kmax; ++k, term *= r) out.probabilities.push_back(term);
  const double kept = 1.0 - out.tail_mass;
  for (double& p : out.probabilities) p /= kept;
  return out;
}

}  // namespace qsdsim
