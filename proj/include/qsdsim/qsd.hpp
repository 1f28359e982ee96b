#pragma once

// Quasi-stationary distribution estimators (Yaglom, Fleming-Viot) and
// decay-rate estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <bit>
#include <numeric>
#include <string>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsdsim/ensemble.hpp"
#include "qsdsim/errors.hpp"
#include "qsdsim/rates.hpp"
#include "qsdsim/simulator.hpp"

namespace qsdsim {

/// Weighted collection of configurations; weights sum to one.
class WeightedSample {
 public:
  WeightedSample() = default;
  WeightedSample(std::vector<Configuration> configs, std::vector<double> weights)
      : configs_(std::move(configs)), weights_(std::move(weights)) {
    if (configs_.size() != weights_.size())
      throw std::invalid_argument("configs and weights differ in length");
    // long double sums keep large equal-weight samples normalized to ~1e-15
    long double total = 0.0L;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("negative weight");
      total += w;
    }
    if (!(total > 0.0L)) throw std::invalid_argument("sample has zero total weight");
    cumulative_.resize(weights_.size());
    long double acc = 0.0L;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      weights_[i] = static_cast<double>(weights_[i] / total);
      cumulative_[i] = static_cast<double>(acc / total);
    }
  }

  static WeightedSample equal(std::vector<Configuration> configs) {
    std::vector<double> w(configs.size(), 1.0);
    return WeightedSample(std::move(configs), std::move(w));
  }

  std::size_t size() const noexcept { return configs_.size(); }
  const std::vector<Configuration>& configs() const noexcept { return configs_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// One configuration drawn with probability equal to its weight.
  const Configuration& draw(RandomStream& rng) const {
    double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t i = std::min<std::size_t>(it - cumulative_.begin(), configs_.size() - 1);
    return configs_[i];
  }

  /// Kish effective sample size.
  double effective_size() const {
    double s2 = 0.0;
    for (double w : weights_) s2 += w * w;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
  }

 private:
  std::vector<Configuration> configs_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Callable initial source drawing from a sample.
struct DrawFrom {
  const WeightedSample* sample;
  Configuration operator()(RandomStream& rng) const { return sample->draw(rng); }
};

struct QsdDiagnostics {
  double effective_sample_size = 0.0;
  double burn_in = 0.0;
  double horizon = 0.0;
  std::size_t particles = 0;
  std::size_t replicas = 0;
  std::size_t survivors = 0;
};

/// Estimate of a q.s.d.: the sample plus its mass and support marginals.
/// Marginals are always derived from the sample.
struct QsdEstimate {
  WeightedSample sample;
  std::vector<double> mass_marginal;     // index k-1 holds P(||eta|| = k)
  std::vector<double> support_marginal;  // index j-1 holds P(#eta = j)
  QsdDiagnostics diagnostics;

  static QsdEstimate from_sample(WeightedSample sample, QsdDiagnostics diag) {
    QsdEstimate e;
    std::vector<long double> mass, support;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const Configuration& c = sample.configs()[i];
      if (c.empty()) throw std::invalid_argument("q.s.d. sample contains the void configuration");
      long double w = sample.weights()[i];
      if (mass.size() < c.mass()) mass.resize(c.mass(), 0.0L);
      if (support.size() < c.support_size()) support.resize(c.support_size(), 0.0L);
      mass[c.mass() - 1] += w;
      support[c.support_size() - 1] += w;
    }
    e.mass_marginal.assign(mass.begin(), mass.end());
    e.support_marginal.assign(support.begin(), support.end());
    diag.effective_sample_size = sample.effective_size();
    e.diagnostics = diag;
    e.sample = std::move(sample);
    return e;
  }

  /// E ||eta|| under the estimate.
  double mean_mass() const {
    double m = 0.0;
    for (std::size_t k = 0; k < mass_marginal.size(); ++k)
      m += static_cast<double>(k + 1) * mass_marginal[k];
    return m;
  }
};

/// Law of Y_t among surviving replicas, equal weights.
template <RateModelLike Model, InitialSource Init>
QsdEstimate yaglom_estimate(const Model& model, const Init& initial, double t,
                            std::size_t replicas, RandomStream& rng, Parallelism par = {}) {
  if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  struct Survivors {
    std::vector<Configuration> configs;
    void merge(const Survivors& o) {
      configs.insert(configs.end(), o.configs.begin(), o.configs.end());
    }
  };
  auto acc = run_ensemble(
      replicas, rng.next(), hash_name("yaglom"), Survivors{},
      [&](std::size_t, RandomStream& r, Survivors& a) {
        ObserverBase obs;
        auto final_state = run_gillespie(model, draw_initial(initial, r), t, r, obs);
        if (!final_state.empty()) a.configs.push_back(std::move(final_state));
      },
      par);
  if (acc.configs.empty()) throw AllExtinct("no replica survived to t");
  QsdDiagnostics diag;
  diag.horizon = t;
  diag.replicas = replicas;
  diag.survivors = acc.configs.size();
  return QsdEstimate::from_sample(WeightedSample::equal(std::move(acc.configs)), diag);
}

namespace detail {

/// Fenwick tree over nonnegative rates with prefix-sum search.
class RateTree {
 public:
  explicit RateTree(std::size_t n) : tree_(n + 1, 0.0), values_(n, 0.0) {}

  void set(std::size_t i, double v) {
    double delta = v - values_[i];
    values_[i] = v;
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }
  double value(std::size_t i) const { return values_[i]; }

  double total() const {
    double s = 0.0;
    for (std::size_t j = tree_.size() - 1; j > 0; j -= j & (~j + 1)) s += tree_[j];
    return s;
  }

  /// Smallest i with prefix(i) > target.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = std::bit_floor(tree_.size() - 1);
    for (; step > 0; step >>= 1) {
      if (pos + step < tree_.size() && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    // guard against rounding landing on a zero-rate slot
    std::size_t i = std::min(pos, values_.size() - 1);
    while (i > 0 && values_[i] <= 0.0) --i;
    while (i + 1 < values_.size() && values_[i] <= 0.0) ++i;
    return i;
  }

  /// Recomputes internal sums from the stored values (limits drift).
  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += values_[i];
    }
  }

 private:
  std::vector<double> tree_;
  std::vector<double> values_;
};

}  // namespace detail

struct FlemingViotOptions {
  /// Spacing of the snapshots that make up the time average.
  double snapshot_interval = 1.0;
};

/// Fleming-Viot particle system: `particles` copies evolve under one global
/// next-event race; a copy that hits 0 takes the state of a uniformly chosen
/// other copy. The estimate averages the empirical measure over
/// [burn_in, horizon] on a regular snapshot grid. Particles start as single
/// individuals at sigma-distributed traits.
template <RateModelLike Model>
QsdEstimate fleming_viot_estimate(const Model& model, std::size_t particles, double burn_in,
                                  double horizon, RandomStream& rng,
                                  FlemingViotOptions options = {}) {
  if (particles < 2) throw std::invalid_argument("particles must be >= 2");
  if (!(burn_in < horizon) || burn_in < 0.0)
    throw std::invalid_argument("need 0 <= burn_in < horizon");
  if (!(options.snapshot_interval > 0.0))
    throw std::invalid_argument("snapshot_interval must be positive");

  std::vector<Configuration> state(particles);
  detail::RateTree rates(particles);
  EventTable table;
  auto refresh = [&](std::size_t i) {
    fill_event_table(model, state[i], table);
    rates.set(i, table.total());
  };
  for (std::size_t i = 0; i < particles; ++i) {
    state[i] = Configuration::singleton(sample_base(rng));
    refresh(i);
  }

  std::vector<Configuration> snapshots;
  double next_snapshot = burn_in;
  auto take_snapshots_before = [&](double t) {
    while (next_snapshot < t && next_snapshot <= horizon) {
      snapshots.insert(snapshots.end(), state.begin(), state.end());
      next_snapshot += options.snapshot_interval;
    }
  };

  double t = 0.0;
  std::uint64_t events = 0;
  while (true) {
    const double total = rates.total();
    if (!(total > 0.0)) throw Degenerate("all particles extinct");
    const double dt = rng.exponential(total);
    take_snapshots_before(std::min(t + dt, std::nextafter(horizon, INFINITY)));
    if (t + dt > horizon) break;
    t += dt;
    std::size_t i = rates.find(rng.uniform() * total);
    fill_event_table(model, state[i], table);
    Jump j = sample_jump(model, state[i], table, rng);
    apply_jump(state[i], j);
    if (state[i].empty()) {
      std::size_t donor = rng.index(particles - 1);
      if (donor >= i) ++donor;
      if (state[donor].empty()) throw Degenerate("donor particle is extinct");
      state[i] = state[donor];
    }
    refresh(i);
    if (++events % 65536 == 0) rates.rebuild();
  }

  QsdDiagnostics diag;
  diag.burn_in = burn_in;
  diag.horizon = horizon;
  diag.particles = particles;
  return QsdEstimate::from_sample(WeightedSample::equal(std::move(snapshots)), diag);
}

struct DecayEstimate {
  double theta;
  double stderr_;
};

/// Weighted least-squares slope of -log S(t) against t over the points with
/// S in [0.05, 0.95]. Weights are inverse delta-method variances; with
/// zero reported errors (noiseless input) the fit is unweighted.
inline DecayEstimate decay_rate_from_survival(std::span<const SurvivalPoint> curve) {
  std::vector<const SurvivalPoint*> window;
  for (const auto& p : curve)
    if (p.survival >= 0.05 && p.survival <= 0.95) window.push_back(&p);
  if (window.size() < 3) throw WindowTooSmall("fewer than 3 points with survival in [0.05, 0.95]");

  bool weighted = std::all_of(window.begin(), window.end(),
                              [](const SurvivalPoint* p) { return p->stderr_ > 0.0; });
  double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (const SurvivalPoint* p : window) {
    double rel = p->stderr_ / p->survival;
    double w = weighted ? 1.0 / (rel * rel) : 1.0;
    double y = -std::log(p->survival);
    sw += w;
    st += w * p->t;
    sy += w * y;
    stt += w * p->t * p->t;
    sty += w * p->t * y;
  }
  const double det = sw * stt - st * st;
  if (!(det > 0.0)) throw WindowTooSmall("admissible points share a single time");
  const double slope = (sw * sty - st * sy) / det;
  const double intercept = (sy - slope * st) / sw;
  double se;
  if (weighted) {
    se = std::sqrt(sw / det);
  } else {
    double rss = 0.0;
    for (const SurvivalPoint* p : window) {
      double r = -std::log(p->survival) - intercept - slope * p->t;
      rss += r * r;
    }
    double n = static_cast<double>(window.size());
    se = std::sqrt(rss / (n - 2.0) * sw / det);
  }
  return {slope, se};
}

/// theta = sum over mass-one configurations {y} of weight * lambda_y({y}).
template <RateModelLike Model>
double decay_rate_from_singletons(const Model& model, const QsdEstimate& est) {
  double theta = 0.0;
  double singleton_weight = 0.0;
  const auto& configs = est.sample.configs();
  const auto& weights = est.sample.weights();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (configs[i].mass() != 1) continue;
    TraitPoint y = configs[i].entries()[0].trait;
    theta += weights[i] * model.death_rate(configs[i], y);
    singleton_weight += weights[i];
  }
  if (!(singleton_weight > 0.0)) throw NoSingletonMass("estimate puts no weight on mass-one states");
  return theta;
}

/// (1/2) sum |p_k - q_k|, shorter vector padded with zeros.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  auto check = [](std::span<const double> v, const char* name) {
    double s = 0.0;
    for (double x : v) {
      if (x < 0.0) throw NotNormalized(std::string(name) + " has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw NotNormalized(std::string(name) + " does not sum to 1");
  };
  check(p, "p");
  check(q, "q");
  double d = 0.0;
  for (std::size_t k = 0; k < std::max(p.size(), q.size()); ++k) {
    double a = k < p.size() ? p[k] : 0.0;
    double b = k < q.size() ? q[k] : 0.0;
    d += std::abs(a - b);
  }
  return 0.5 * d;
}

/// Lifts a law on masses to configurations: mass k with probability
/// zeta[k-1], then k traits drawn independently from sigma.
struct LiftedMassLaw {
  std::vector<double> zeta;

  Configuration operator()(RandomStream& rng) const {
    double u = rng.uniform();
    std::size_t k = 1;
    double acc = 0.0;
    for (; k < zeta.size(); ++k) {
      acc += zeta[k - 1];
      if (u < acc) break;
    }
    std::vector<Entry> entries;
    entries.reserve(k);
    for (std::size_t i = 0; i < k; ++i) entries.push_back({sample_base(rng), 1});
    return Configuration::from_entries(std::move(entries));
  }
};

/// beta = E_nu ||Y_1|| / E_nu ||eta||; equals e^{-theta} in the uniform case.
template <RateModelLike Model>
DecayEstimate beta_diagnostic(const Model& model, const QsdEstimate& est, std::size_t replicas,
                              RandomStream& rng, Parallelism par = {}) {
  const double grid[] = {1.0};
  auto m = mean_mass(model, DrawFrom{&est.sample}, grid, replicas, rng, par);
  const double denom = est.mean_mass();
  return {m[0].mean / denom, m[0].stderr_ / denom};
}

}  // namespace qsdsim
