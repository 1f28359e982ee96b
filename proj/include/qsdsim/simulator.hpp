#pragma once

// Exact-event simulation of the population process with two engines:
//  * run_gillespie: holding time Exp(Q(eta)), branch chosen from the event table.
//  * run_thinning:  candidate points of the two driving Poisson measures at a
//                   bounding intensity, accepted through the indicator bands of
//                   the pathwise construction.
// Both engines report to an observer; simulate_* wrap them with a recorder.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "qsdsim/configuration.hpp"
#include "qsdsim/ensemble.hpp"
#include "qsdsim/rates.hpp"
#include "qsdsim/trajectory.hpp"

namespace qsdsim {

/// Observers receive the initial state, every jump (with the state after
/// it) and the stop (extinction time or horizon). Derive and override.
struct ObserverBase {
  void on_start(const Configuration&) {}
  void on_jump(double, const Jump&, const Configuration&) {}
  void on_stop(double, const Configuration&) {}
};

template <class O>
concept PathObserver = requires(O& o, const Configuration& c, const Jump& j) {
  o.on_start(c);
  o.on_jump(0.0, j, c);
  o.on_stop(0.0, c);
};

/// Branch of one jump out of `state` given its event table; one uniform for
/// the branch and entry, plus parent and child draws for a mutation.
template <RateModelLike Model>
Jump sample_jump(const Model& model, const Configuration& state, const EventTable& table,
                 RandomStream& rng) {
  auto entries = state.entries();
  double target = rng.uniform() * table.total();
  if (target < table.clonal_total) {
    return {EventKind::clonal, entries[detail::pick_weighted(table.clonal, table.clonal_total,
                                                             target / table.clonal_total)]
                                   .trait,
            TraitPoint{}};
  }
  target -= table.clonal_total;
  if (target < table.death_total || table.mutation_total <= 0.0) {
    double u = std::min(target / table.death_total, std::nextafter(1.0, 0.0));
    return {EventKind::death, entries[detail::pick_weighted(table.death, table.death_total, u)].trait,
            TraitPoint{}};
  }
  TraitPoint parent =
      entries[detail::pick_weighted(table.mutation, table.mutation_total, rng.uniform())].trait;
  return {EventKind::mutation, parent, model.kernel().sample(parent, rng)};
}

/// Gillespie loop from `state` up to min(horizon, T_0). Returns the final state.
template <RateModelLike Model, PathObserver Observer>
Configuration run_gillespie(const Model& model, Configuration state, double horizon,
                            RandomStream& rng, Observer& obs) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be non-negative");
  obs.on_start(state);
  EventTable table;
  double t = 0.0;
  while (!state.empty()) {
    fill_event_table(model, state, table);
    double dt = rng.exponential(table.total());
    if (t + dt > horizon) break;
    t += dt;
    Jump j = sample_jump(model, state, table, rng);
    apply_jump(state, j);
    obs.on_jump(t, j, state);
  }
  obs.on_stop(state.empty() ? t : horizon, state);
  return state;
}

struct ThinningStats {
  std::uint64_t candidates = 0;
  std::uint64_t accepted = 0;
  double acceptance() const {
    return candidates ? static_cast<double>(accepted) / static_cast<double>(candidates) : 0.0;
  }
};

/// Thinning engine. Candidate points carry an individual index i <= ||Y||, a
/// mark z ~ sigma for the birth measure, and a level theta uniform below
/// B* g* (births) or sup_y lambda_y(Y) (deaths). The candidate stream is
/// regenerated after each accepted jump.
template <RateModelLike Model, PathObserver Observer>
Configuration run_thinning(const Model& model, Configuration state, double horizon,
                           RandomStream& rng, Observer& obs, ThinningStats* stats = nullptr) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be non-negative");
  obs.on_start(state);
  const MutationKernel& kernel = model.kernel();
  const double birth_level = model.birth_bound() * kernel.bound();
  double t = 0.0;
  while (!state.empty()) {
    const double n = static_cast<double>(state.mass());
    const double death_level = model.death_bound(state);
    const double birth_intensity = n * birth_level;
    const double total = birth_intensity + n * death_level;
    while (true) {
      double dt = rng.exponential(total);
      if (t + dt > horizon) {
        t = horizon;
        break;
      }
      t += dt;
      if (stats) ++stats->candidates;
      bool birth_measure = rng.uniform() * total < birth_intensity;
      TraitPoint y = state.individual(1 + rng.index(state.mass()));
      if (birth_measure) {
        TraitPoint z = sample_base(rng);
        double level = rng.uniform() * birth_level;
        double gz = kernel.density(y, z);
        double clonal_band = model.clonal_rate(state, y) * gz;
        double mutation_band = clonal_band + model.mutation_rate(state, y) * gz;
        if (level < clonal_band) {
          Jump j{EventKind::clonal, y, TraitPoint{}};
          apply_jump(state, j);
          if (stats) ++stats->accepted;
          obs.on_jump(t, j, state);
          break;
        }
        if (level < mutation_band) {
          Jump j{EventKind::mutation, y, z};
          apply_jump(state, j);
          if (stats) ++stats->accepted;
          obs.on_jump(t, j, state);
          break;
        }
      } else {
        double level = rng.uniform() * death_level;
        if (level < model.death_rate(state, y)) {
          Jump j{EventKind::death, y, TraitPoint{}};
          apply_jump(state, j);
          if (stats) ++stats->accepted;
          obs.on_jump(t, j, state);
          break;
        }
      }
    }
    if (t >= horizon) break;
  }
  obs.on_stop(state.empty() ? t : horizon, state);
  return state;
}

/// Records the full event log and the stopping times.
class TrajectoryRecorder : public ObserverBase {
 public:
  explicit TrajectoryRecorder(double horizon) { out_.horizon = horizon; }

  void on_start(const Configuration& c) {
    out_.initial = c;
    tracker_.emplace(c);
  }
  void on_jump(double t, const Jump& j, const Configuration& after) {
    out_.events.push_back({t, j});
    tracker_->on_jump(t, j, after);
  }
  void on_stop(double, const Configuration& final_state) {
    out_.final_state = final_state;
    out_.extinction_time = tracker_->extinction_time();
    out_.first_mutation_time = tracker_->first_mutation_time();
    out_.initial_traits_lost_time = tracker_->initial_traits_lost_time();
    out_.max_mass = tracker_->max_mass();
    out_.record_times = tracker_->record_times();
  }

  Trajectory take() { return std::move(out_); }

 private:
  Trajectory out_;
  std::optional<PathTracker> tracker_;
};

template <RateModelLike Model>
Trajectory simulate_gillespie(const Model& model, const Configuration& initial, double horizon,
                              RandomStream& rng) {
  TrajectoryRecorder rec(horizon);
  run_gillespie(model, initial, horizon, rng, rec);
  return rec.take();
}

template <RateModelLike Model>
Trajectory simulate_thinning(const Model& model, const Configuration& initial, double horizon,
                             RandomStream& rng, ThinningStats* stats = nullptr) {
  TrajectoryRecorder rec(horizon);
  run_thinning(model, initial, horizon, rng, rec, stats);
  return rec.take();
}

enum class Engine { gillespie, thinning };

template <RateModelLike Model, PathObserver Observer>
Configuration run_engine(Engine engine, const Model& model, Configuration state, double horizon,
                         RandomStream& rng, Observer& obs) {
  if (engine == Engine::thinning) return run_thinning(model, std::move(state), horizon, rng, obs);
  return run_gillespie(model, std::move(state), horizon, rng, obs);
}

/// States at a sorted list of observation times (right-continuous).
class StateAtTimes : public ObserverBase {
 public:
  explicit StateAtTimes(std::span<const double> times) : times_(times) {}

  void on_start(const Configuration& c) {
    current_mass_ = c.mass();
    next_ = 0;
    masses_.assign(times_.size(), 0);
    extinction_ = StoppingTime::never();
    if (c.empty()) extinction_ = StoppingTime::at(0.0);
  }
  void on_jump(double t, const Jump&, const Configuration& after) {
    flush_before(t);
    current_mass_ = after.mass();
    if (after.empty() && !extinction_.reached()) extinction_ = StoppingTime::at(t);
  }
  void on_stop(double end, const Configuration& final_state) {
    current_mass_ = final_state.mass();
    while (next_ < times_.size() && (times_[next_] <= end || final_state.empty()))
      masses_[next_++] = current_mass_;
  }

  const std::vector<std::uint64_t>& masses() const { return masses_; }
  StoppingTime extinction_time() const { return extinction_; }

 private:
  void flush_before(double t) {
    while (next_ < times_.size() && times_[next_] < t) masses_[next_++] = current_mass_;
  }

  std::span<const double> times_;
  std::vector<std::uint64_t> masses_;
  std::size_t next_ = 0;
  std::uint64_t current_mass_ = 0;
  StoppingTime extinction_ = StoppingTime::never();
};

/// Source of initial configurations for an ensemble: a fixed configuration
/// or any callable drawing one from the replica's stream.
template <class Init>
concept InitialSource = std::same_as<std::remove_cvref_t<Init>, Configuration> ||
                        requires(const Init& init, RandomStream& rng) {
                          { init(rng) } -> std::convertible_to<Configuration>;
                        };

template <class Init>
Configuration draw_initial(const Init& init, RandomStream& rng) {
  if constexpr (std::same_as<std::remove_cvref_t<Init>, Configuration>)
    return init;
  else
    return init(rng);
}

struct SurvivalPoint {
  double t;
  double survival;
  double stderr_;
};

namespace detail {

struct CountVector {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  void merge(const CountVector& o) {
    if (counts.size() < o.counts.size()) counts.resize(o.counts.size(), 0);
    for (std::size_t i = 0; i < o.counts.size(); ++i) counts[i] += o.counts[i];
    total += o.total;
  }
};

inline void check_grid(std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
  if (!grid.empty() && grid.front() < 0.0) throw std::invalid_argument("grid times must be >= 0");
}

}  // namespace detail

/// Fraction of replicas with T_0 > t at each grid time, with binomial errors.
template <RateModelLike Model, InitialSource Init>
std::vector<SurvivalPoint> survival_curve(const Model& model, const Init& initial,
                                          std::span<const double> grid, std::size_t replicas,
                                          RandomStream& rng, Parallelism par = {},
                                          Engine engine = Engine::gillespie) {
  detail::check_grid(grid);
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (grid.empty()) return {};
  const double horizon = grid.back();
  detail::CountVector zero{std::vector<std::uint64_t>(grid.size(), 0), 0};
  auto acc = run_ensemble(
      replicas, rng.next(), hash_name("survival"), zero,
      [&](std::size_t, RandomStream& r, detail::CountVector& a) {
        struct ExtinctionOnly : ObserverBase {
          StoppingTime t0 = StoppingTime::never();
          void on_start(const Configuration& c) {
            if (c.empty()) t0 = StoppingTime::at(0.0);
          }
          void on_jump(double t, const Jump&, const Configuration& after) {
            if (after.empty()) t0 = StoppingTime::at(t);
          }
        } obs;
        run_engine(engine, model, draw_initial(initial, r), horizon, r, obs);
        for (std::size_t i = 0; i < grid.size(); ++i)
          if (!obs.t0.by(grid[i])) ++a.counts[i];
        ++a.total;
      },
      par);
  std::vector<SurvivalPoint> out;
  const double n = static_cast<double>(acc.total);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double p = static_cast<double>(acc.counts[i]) / n;
    out.push_back({grid[i], p, std::sqrt(p * (1.0 - p) / n)});
  }
  return out;
}

struct HittingPoint {
  std::uint64_t K;
  double probability;
};

/// Empirical P(T_K <= t) for each K, from one shared replica set.
template <RateModelLike Model>
std::vector<HittingPoint> hitting_tail(const Model& model, const Configuration& initial, double t,
                                       std::span<const std::uint64_t> K_values,
                                       std::size_t replicas, RandomStream& rng,
                                       Parallelism par = {}) {
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  detail::CountVector zero{{}, 0};
  // counts[m] = number of replicas whose running maximum of the mass by t is m
  auto acc = run_ensemble(
      replicas, rng.next(), hash_name("hitting"), zero,
      [&](std::size_t, RandomStream& r, detail::CountVector& a) {
        struct MaxMass : ObserverBase {
          std::uint64_t max = 0;
          void on_start(const Configuration& c) { max = c.mass(); }
          void on_jump(double, const Jump&, const Configuration& after) {
            max = std::max<std::uint64_t>(max, after.mass());
          }
        } obs;
        run_gillespie(model, initial, t, r, obs);
        if (a.counts.size() <= obs.max) a.counts.resize(obs.max + 1, 0);
        ++a.counts[obs.max];
        ++a.total;
      },
      par);
  std::vector<HittingPoint> out;
  for (std::uint64_t K : K_values) {
    std::uint64_t hits = 0;
    for (std::size_t m = K; m < acc.counts.size(); ++m) hits += acc.counts[m];
    out.push_back({K, static_cast<double>(hits) / static_cast<double>(acc.total)});
  }
  return out;
}

/// Histogram of ||Y_t|| over replicas; bins 0..max_bin-1 exact, last bin is >= max_bin.
template <RateModelLike Model, InitialSource Init>
std::vector<std::uint64_t> mass_histogram(const Model& model, const Init& initial, double t,
                                          std::size_t replicas, std::size_t max_bin,
                                          RandomStream& rng, Engine engine = Engine::gillespie,
                                          Parallelism par = {}) {
  detail::CountVector zero{std::vector<std::uint64_t>(max_bin + 1, 0), 0};
  auto acc = run_ensemble(
      replicas, rng.next(), hash_name("mass_histogram"), zero,
      [&](std::size_t, RandomStream& r, detail::CountVector& a) {
        ObserverBase obs;
        auto final_state = run_engine(engine, model, draw_initial(initial, r), t, r, obs);
        ++a.counts[std::min<std::uint64_t>(final_state.mass(), max_bin)];
        ++a.total;
      },
      par);
  return acc.counts;
}

struct MomentPoint {
  double t;
  double mean;
  double stderr_;
};

/// Empirical E ||Y_t|| at each grid time (extinct replicas count as 0).
template <RateModelLike Model, InitialSource Init>
std::vector<MomentPoint> mean_mass(const Model& model, const Init& initial,
                                   std::span<const double> grid, std::size_t replicas,
                                   RandomStream& rng, Parallelism par = {}) {
  detail::check_grid(grid);
  if (grid.empty()) return {};
  struct Acc {
    std::vector<MeanAccumulator> at;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < at.size(); ++i) at[i].merge(o.at[i]);
    }
  };
  Acc zero{std::vector<MeanAccumulator>(grid.size())};
  auto acc = run_ensemble(
      replicas, rng.next(), hash_name("mean_mass"), zero,
      [&](std::size_t, RandomStream& r, Acc& a) {
        StateAtTimes obs(grid);
        run_gillespie(model, draw_initial(initial, r), grid.back(), r, obs);
        for (std::size_t i = 0; i < grid.size(); ++i)
          a.at[i].add(static_cast<double>(obs.masses()[i]));
      },
      par);
  std::vector<MomentPoint> out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.push_back({grid[i], acc.at[i].mean(), acc.at[i].stderr_of_mean()});
  return out;
}

}  // namespace qsdsim
