#pragma once

// Per-individual rates b_y(eta), m_y(eta), lambda_y(eta), the event-rate
// table, the total jump mass Q(eta) and the mutation location kernel G.
//
// Engines are templates over RateModelLike. A user model is any type that
// provides the members below; it is the user's obligation that the process
// goes extinct almost surely and that the reported bounds are true bounds.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qsdsim/configuration.hpp"
#include "qsdsim/errors.hpp"
#include "qsdsim/trait_space.hpp"

namespace qsdsim {

template <class M>
concept RateModelLike = requires(const M& m, const Configuration& c, TraitPoint y) {
  { m.clonal_rate(c, y) } -> std::convertible_to<double>;
  { m.mutation_rate(c, y) } -> std::convertible_to<double>;
  { m.death_rate(c, y) } -> std::convertible_to<double>;
  // B* = sup (b + m)
  { m.birth_bound() } -> std::convertible_to<double>;
  // lambda_* = inf lambda
  { m.death_floor() } -> std::convertible_to<double>;
  // lambda-bar_1 = sup of lambda over mass-one configurations
  { m.singleton_death_sup() } -> std::convertible_to<double>;
  // sup_y lambda_y(eta) for the given state
  { m.death_bound(c) } -> std::convertible_to<double>;
  { m.kernel() } -> std::convertible_to<const MutationKernel&>;
  // true when rates depend on the configuration only through its total mass
  { m.mass_only() } -> std::convertible_to<bool>;
};

/// lambda_y = lambda, b_y = b(1 - rho), m_y = b rho.
struct UniformRates {
  double lambda;
  double b;
  double rho;
};

/// b_y = b(1 - rho), m_y = b rho, lambda_y = d + c(||eta|| - 1).
struct LogisticRates {
  double b;
  double rho;
  double d;
  double c;
};

class RateModel {
 public:
  using Kind = std::variant<UniformRates, LogisticRates>;

  RateModel(Kind kind, MutationKernel kernel = MutationKernel::uniform())
      : kind_(kind), kernel_(std::move(kernel)) {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be positive");
    };
    auto unit = [](double rho) {
      if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
    };
    if (auto* u = std::get_if<UniformRates>(&kind_)) {
      positive(u->lambda, "lambda");
      positive(u->b, "b");
      unit(u->rho);
    } else {
      auto& l = std::get<LogisticRates>(kind_);
      positive(l.b, "b");
      positive(l.d, "d");
      positive(l.c, "c");
      unit(l.rho);
    }
  }

  const Kind& kind() const noexcept { return kind_; }
  bool is_uniform() const noexcept { return std::holds_alternative<UniformRates>(kind_); }
  const MutationKernel& kernel() const noexcept { return kernel_; }
  bool mass_only() const noexcept { return true; }

  double clonal_rate(const Configuration& c, TraitPoint) const noexcept {
    if (c.empty()) return 0.0;
    return base_b() * (1.0 - rho());
  }
  double mutation_rate(const Configuration& c, TraitPoint) const noexcept {
    if (c.empty()) return 0.0;
    return base_b() * rho();
  }
  double death_rate(const Configuration& c, TraitPoint) const noexcept {
    return death_at_mass(c.mass());
  }

  /// Per-individual death rate for a population of the given total mass.
  double death_at_mass(std::uint64_t mass) const noexcept {
    if (mass == 0) return 0.0;
    if (auto* u = std::get_if<UniformRates>(&kind_)) return u->lambda;
    auto& l = std::get<LogisticRates>(kind_);
    return l.d + l.c * static_cast<double>(mass - 1);
  }

  double birth_bound() const noexcept { return base_b(); }
  double death_floor() const noexcept {
    if (auto* u = std::get_if<UniformRates>(&kind_)) return u->lambda;
    return std::get<LogisticRates>(kind_).d;
  }
  double singleton_death_sup() const noexcept { return death_floor(); }
  double death_bound(const Configuration& c) const noexcept { return death_at_mass(c.mass()); }

  std::string name() const { return is_uniform() ? "uniform" : "logistic"; }

 private:
  double base_b() const noexcept {
    return std::visit([](const auto& k) { return k.b; }, kind_);
  }
  double rho() const noexcept {
    return std::visit([](const auto& k) { return k.rho; }, kind_);
  }

  Kind kind_;
  MutationKernel kernel_;
};

static_assert(RateModelLike<RateModel>);

/// Jump rates out of one configuration, entry-aligned with its support.
struct EventTable {
  std::vector<double> clonal;    // eta_y b_y(eta)
  std::vector<double> death;     // eta_y lambda_y(eta)
  std::vector<double> mutation;  // eta_y m_y(eta)
  double clonal_total = 0.0;
  double death_total = 0.0;
  double mutation_total = 0.0;

  /// Q(eta)
  double total() const noexcept { return clonal_total + death_total + mutation_total; }
  double birth_total() const noexcept { return clonal_total + mutation_total; }
};

/// Fills `table` for configuration `c`, reusing its storage.
template <RateModelLike Model>
void fill_event_table(const Model& model, const Configuration& c, EventTable& table) {
  auto n = c.support_size();
  table.clonal.resize(n);
  table.death.resize(n);
  table.mutation.resize(n);
  table.clonal_total = table.death_total = table.mutation_total = 0.0;
  auto entries = c.entries();
  for (std::size_t i = 0; i < n; ++i) {
    double w = entries[i].weight;
    TraitPoint y = entries[i].trait;
    table.clonal[i] = w * model.clonal_rate(c, y);
    table.death[i] = w * model.death_rate(c, y);
    table.mutation[i] = w * model.mutation_rate(c, y);
    table.clonal_total += table.clonal[i];
    table.death_total += table.death[i];
    table.mutation_total += table.mutation[i];
  }
}

template <RateModelLike Model>
EventTable event_table(const Model& model, const Configuration& c) {
  EventTable t;
  fill_event_table(model, c, t);
  return t;
}

/// G(eta, z) = sum_y eta_y m_y(eta) g_y(z).
template <RateModelLike Model>
double location_kernel_G(const Model& model, const Configuration& c, TraitPoint z) {
  double g = 0.0;
  for (const Entry& e : c.entries())
    g += e.weight * model.mutation_rate(c, e.trait) * model.kernel().density(e.trait, z);
  return g;
}

namespace detail {

/// Index i with probability weights[i] / total, from one uniform.
inline std::size_t pick_weighted(const std::vector<double>& weights, double total, double u) {
  double target = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // rounding: fall back to the last entry with positive weight
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

}  // namespace detail

/// Parent of a mutation event, chosen with probability eta_y m_y / sum eta m.
template <RateModelLike Model>
TraitPoint sample_mutation_parent(const Model& model, const Configuration& c,
                                  RandomStream& rng) {
  EventTable t = event_table(model, c);
  if (!(t.mutation_total > 0.0)) throw NoMutationMass("total mutation rate is zero");
  return c.entries()[detail::pick_weighted(t.mutation, t.mutation_total, rng.uniform())].trait;
}

/// Q_+(k) = sup { Q(eta) : ||eta|| <= k } for mass-only models.
template <RateModelLike Model>
double q_plus(const Model& model, std::uint64_t k) {
  if (!model.mass_only()) throw UnsupportedModel("q_plus needs rates that depend only on total mass");
  double best = 0.0;
  for (std::uint64_t n = 1; n <= k; ++n) {
    auto c = Configuration::singleton(TraitPoint(0.5), static_cast<std::uint32_t>(n));
    best = std::max(best, event_table(model, c).total());
  }
  return best;
}

}  // namespace qsdsim
