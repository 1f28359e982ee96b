#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsdsim/configuration.hpp"

namespace qsdsim {

/// A random time that may not be reached before the horizon. Unreached
/// times carry no number at all, so they cannot leak into statistics.
class StoppingTime {
 public:
  static StoppingTime never() { return StoppingTime(); }
  static StoppingTime at(double t) { return StoppingTime(t); }

  bool reached() const noexcept { return t_.has_value(); }
  double value() const {
    if (!t_) throw std::logic_error("stopping time not reached");
    return *t_;
  }
  /// True when reached at or before t.
  bool by(double t) const noexcept { return t_ && *t_ <= t; }

  std::string to_string() const;

  friend bool operator==(const StoppingTime&, const StoppingTime&) = default;

 private:
  StoppingTime() = default;
  explicit StoppingTime(double t) : t_(t) {}
  std::optional<double> t_;
};

enum class EventKind : std::uint8_t { clonal, death, mutation };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::clonal: return "clonal";
    case EventKind::death: return "death";
    case EventKind::mutation: return "mutation";
  }
  return "?";
}

/// One jump. For a death `parent` is the victim; `child` is meaningful only
/// for mutations.
struct Jump {
  EventKind kind;
  TraitPoint parent;
  TraitPoint child;

  friend bool operator==(const Jump&, const Jump&) = default;
};

struct Event {
  double time;
  Jump jump;

  friend bool operator==(const Event&, const Event&) = default;
};

inline void apply_jump(Configuration& c, const Jump& j) {
  switch (j.kind) {
    case EventKind::clonal: c.add(j.parent); break;
    case EventKind::death: c.remove(j.parent); break;
    case EventKind::mutation: c.add(j.child); break;
  }
}

/// Online computation of T_0, chi, kappa and the hitting times T_K.
class PathTracker {
 public:
  explicit PathTracker(const Configuration& initial)
      : initial_support_(initial.entries().begin(), initial.entries().end()),
        initial_carriers_(initial.mass()),
        max_mass_(initial.mass()) {
    if (initial.empty()) {
      extinction_ = StoppingTime::at(0.0);
      initial_lost_ = StoppingTime::at(0.0);
    }
  }

  void on_jump(double t, const Jump& j, const Configuration& after) {
    switch (j.kind) {
      case EventKind::clonal:
        if (in_initial(j.parent)) ++initial_carriers_;
        break;
      case EventKind::death:
        if (in_initial(j.parent) && --initial_carriers_ == 0 && !initial_lost_.reached())
          initial_lost_ = StoppingTime::at(t);
        break;
      case EventKind::mutation:
        if (in_initial(j.child))
          ++initial_carriers_;
        else if (!first_mutation_.reached())
          first_mutation_ = StoppingTime::at(t);
        break;
    }
    if (after.mass() > max_mass_) {
      max_mass_ = after.mass();
      hitting_.push_back(t);
    }
    if (after.empty() && !extinction_.reached()) extinction_ = StoppingTime::at(t);
  }

  StoppingTime extinction_time() const { return extinction_; }
  StoppingTime first_mutation_time() const { return first_mutation_; }
  StoppingTime initial_traits_lost_time() const { return initial_lost_; }
  std::uint64_t max_mass() const { return max_mass_; }
  /// Times at which masses initial+1, initial+2, ... were first reached.
  const std::vector<double>& record_times() const { return hitting_; }

 private:
  bool in_initial(TraitPoint y) const {
    auto it = std::lower_bound(initial_support_.begin(), initial_support_.end(), y,
                               [](const Entry& e, TraitPoint v) { return e.trait < v; });
    return it != initial_support_.end() && it->trait == y;
  }

  std::vector<Entry> initial_support_;
  std::uint64_t initial_carriers_;
  std::uint64_t max_mass_;
  std::vector<double> hitting_;
  StoppingTime extinction_ = StoppingTime::never();
  StoppingTime first_mutation_ = StoppingTime::never();
  StoppingTime initial_lost_ = StoppingTime::never();
};

/// A piecewise-constant sample path with its event log and stopping times.
struct Trajectory {
  Configuration initial;
  std::vector<Event> events;
  double horizon = 0.0;
  Configuration final_state;
  StoppingTime extinction_time = StoppingTime::never();
  StoppingTime first_mutation_time = StoppingTime::never();
  /// kappa: first time none of the initial traits is present.
  StoppingTime initial_traits_lost_time = StoppingTime::never();
  std::uint64_t max_mass = 0;
  /// record_times[j] is T_K for K = initial.mass() + 1 + j.
  std::vector<double> record_times;

  /// T_K = inf { t : ||Y_t|| >= K }.
  StoppingTime hitting_time(std::uint64_t K) const {
    if (K <= initial.mass()) return StoppingTime::at(0.0);
    std::uint64_t j = K - initial.mass() - 1;
    if (j < record_times.size()) return StoppingTime::at(record_times[j]);
    return StoppingTime::never();
  }

  /// Mass at time t (right-continuous), by replaying the log.
  std::uint64_t mass_at(double t) const {
    std::uint64_t m = initial.mass();
    for (const Event& e : events) {
      if (e.time > t) break;
      m = e.jump.kind == EventKind::death ? m - 1 : m + 1;
    }
    return m;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Rebuilds the stopping times and final state from initial + events alone.
inline Trajectory replay(const Configuration& initial, std::span<const Event> events,
                         double horizon) {
  Trajectory out;
  out.initial = initial;
  out.horizon = horizon;
  out.events.assign(events.begin(), events.end());
  Configuration state = initial;
  PathTracker tracker(initial);
  for (const Event& e : events) {
    apply_jump(state, e.jump);
    tracker.on_jump(e.time, e.jump, state);
  }
  out.final_state = std::move(state);
  out.extinction_time = tracker.extinction_time();
  out.first_mutation_time = tracker.first_mutation_time();
  out.initial_traits_lost_time = tracker.initial_traits_lost_time();
  out.max_mass = tracker.max_mass();
  out.record_times = tracker.record_times();
  return out;
}

inline std::string StoppingTime::to_string() const {
  return t_ ? detail::format_double(*t_) : std::string("inf");
}

/// CSV: time,event_kind,parent_trait,child_trait,total_mass_after.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "time,event_kind,parent_trait,child_trait,total_mass_after\n";
  std::uint64_t mass = tr.initial.mass();
  for (const Event& e : tr.events) {
    mass = e.jump.kind == EventKind::death ? mass - 1 : mass + 1;
    os << detail::format_double(e.time) << ',' << to_string(e.jump.kind) << ','
       << detail::format_double(e.jump.parent.value()) << ',';
    if (e.jump.kind == EventKind::mutation) os << detail::format_double(e.jump.child.value());
    os << ',' << mass << '\n';
  }
}

}  // namespace qsdsim
