#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "qsdsim/coupling.hpp"
#include "qsdsim/stats.hpp"

using namespace qsdsim;

namespace {

const RateModel uniform_model{UniformRates{2.0, 1.0, 0.3}};
const RateModel logistic_model{LogisticRates{1.0, 0.3, 0.5, 0.5},
                               MutationKernel::truncated_gaussian(0.1)};

Configuration spread(std::uint32_t n) {
  std::vector<Entry> es;
  for (std::uint32_t i = 0; i < n; ++i) es.push_back({TraitPoint((i + 0.5) / n), 1});
  return Configuration::from_entries(es);
}

// Claims B* = 0.5 while births run at 1.0 per individual.
struct UnderstatedBirthBound {
  RateModel inner{UniformRates{2.0, 1.0, 0.3}};
  double clonal_rate(const Configuration& c, TraitPoint y) const { return inner.clonal_rate(c, y); }
  double mutation_rate(const Configuration& c, TraitPoint y) const { return inner.mutation_rate(c, y); }
  double death_rate(const Configuration& c, TraitPoint y) const { return inner.death_rate(c, y); }
  double birth_bound() const { return 0.5; }
  double death_floor() const { return 2.0; }
  double singleton_death_sup() const { return 2.0; }
  double death_bound(const Configuration& c) const { return inner.death_bound(c); }
  const MutationKernel& kernel() const { return inner.kernel(); }
  bool mass_only() const { return true; }
};

}  // namespace

TEST(CouplingRates, UniformSaturatesBirthBound) {
  CoupledState s{spread(2), 2};
  auto r = coupling_rates(uniform_model, s);
  EXPECT_DOUBLE_EQ(r.counter_birth, 0.0);
  EXPECT_DOUBLE_EQ(r.death_first_only, 0.0);
  EXPECT_DOUBLE_EQ(r.clonal_both, 1.4);
  EXPECT_DOUBLE_EQ(r.mutation_both, 0.6);
  EXPECT_DOUBLE_EQ(r.death_both, 4.0);
  EXPECT_DOUBLE_EQ(r.counter_death, 0.0);
}

TEST(CouplingRates, EmptyFirstCoordinateLeavesOnlyCounterLines) {
  CoupledState s{Configuration{}, 3};
  auto r = coupling_rates(uniform_model, s);
  EXPECT_EQ(r.clonal_both + r.mutation_both + r.death_both + r.death_first_only, 0.0);
  EXPECT_DOUBLE_EQ(r.counter_birth, 3.0);
  EXPECT_DOUBLE_EQ(r.counter_death, 6.0);
  RandomStream rng(1);
  for (int i = 0; i < 200; ++i) {
    auto step = step_coupled(uniform_model, s, rng);
    EXPECT_TRUE(step.line == CouplingLine::counter_birth || step.line == CouplingLine::counter_death);
    EXPECT_TRUE(step.next.config.empty());
  }
}

TEST(CouplingRates, MarginalsRecoverBothGenerators) {
  RandomStream rng(2);
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    for (int i = 0; i < 200; ++i) {
      Configuration c = spread(1 + static_cast<std::uint32_t>(rng.index(8)));
      std::uint64_t counter = c.mass() + rng.index(5);
      auto r = coupling_rates(*m, CoupledState{c, counter});
      auto t = event_table(*m, c);
      EXPECT_NEAR(r.clonal_both, t.clonal_total, 1e-12);
      EXPECT_NEAR(r.mutation_both, t.mutation_total, 1e-12);
      EXPECT_NEAR(r.death_both + r.death_first_only, t.death_total, 1e-12);
      double mm = static_cast<double>(counter);
      EXPECT_NEAR(r.clonal_both + r.mutation_both + r.counter_birth, mm * m->birth_bound(), 1e-12);
      EXPECT_NEAR(r.death_both + r.counter_death, mm * m->death_floor(), 1e-12);
    }
  }
}

TEST(CouplingRates, LogisticUsesDeathFirstOnlyLine) {
  auto r = coupling_rates(logistic_model, CoupledState{spread(2), 2});
  EXPECT_DOUBLE_EQ(r.death_first_only, 2.0 * (1.0 - 0.5));
}

TEST(CouplingRates, OutsideDomainThrows) {
  EXPECT_THROW(coupling_rates(uniform_model, CoupledState{spread(3), 2}), InvariantBreach);
}

TEST(CouplingRates, FalseBoundIsReported) {
  EXPECT_THROW(coupling_rates(UnderstatedBirthBound{}, CoupledState{spread(3), 3}), InvariantBreach);
}

TEST(StepCoupled, AbsorbedAtOrigin) {
  RandomStream rng(3);
  auto step = step_coupled(uniform_model, CoupledState{Configuration{}, 0}, rng);
  EXPECT_TRUE(std::isinf(step.holding));
  EXPECT_EQ(step.line, CouplingLine::none);
}

TEST(Domination, NoViolationsOverTenThousandPaths) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    RandomStream rng(4);
    std::uint64_t violations = 0, jumps = 0;
    for (int p = 0; p < 10000; ++p) {
      auto path = simulate_coupled(*m, CoupledState{spread(3), 3}, 2.0, rng);
      violations += path.violations;
      jumps += path.jumps;
      EXPECT_TRUE(path.final_state.in_domain());
    }
    EXPECT_EQ(violations, 0u) << m->name();
    EXPECT_GT(jumps, 10000u);
  }
}

TEST(Domination, FirstMarginalMatchesGillespie) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    const std::size_t n = 100000, bins = 16;
    std::vector<std::uint64_t> coupled(bins, 0), direct(bins, 0);
    RandomStream a(5), b(6);
    for (std::size_t i = 0; i < n; ++i) {
      auto path = simulate_coupled(*m, CoupledState{spread(3), 3}, 1.0, a);
      ++coupled[std::min<std::uint64_t>(path.final_state.config.mass(), bins - 1)];
      auto tr = simulate_gillespie(*m, spread(3), 1.0, b);
      ++direct[std::min<std::uint64_t>(tr.final_state.mass(), bins - 1)];
    }
    auto chi = stats::two_sample_chi_square(coupled, direct);
    EXPECT_LT(chi.statistic, stats::chi_square_quantile(chi.dof, 0.999)) << m->name();
  }
}

TEST(Domination, SecondMarginalMatchesBirthDeathChain) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    const std::size_t n = 100000, bins = 16;
    std::vector<std::uint64_t> coupled(bins, 0), direct(bins, 0);
    RandomStream a(7), b(8);
    for (std::size_t i = 0; i < n; ++i) {
      auto path = simulate_coupled(*m, CoupledState{spread(3), 3}, 1.0, a);
      ++coupled[std::min<std::uint64_t>(path.final_state.counter, bins - 1)];
      auto k = simulate_birth_death(m->birth_bound(), m->death_floor(), 3, 1.0, b);
      ++direct[std::min<std::uint64_t>(k, bins - 1)];
    }
    auto chi = stats::two_sample_chi_square(coupled, direct);
    EXPECT_LT(chi.statistic, stats::chi_square_quantile(chi.dof, 0.999)) << m->name();
  }
}

TEST(PureBirthTail, GeometricCaseFromOne) {
  // Yule process from one individual: Z_t is geometric with P(Z_t >= K) = (1 - e^{-rt})^{K-1}.
  for (std::uint64_t K = 1; K <= 30; ++K)
    EXPECT_NEAR(pure_birth_tail(1, K, 1.3, 0.7), std::pow(1 - std::exp(-1.3 * 0.7), K - 1.0), 1e-12);
}

TEST(PureBirthTail, MatchesSimulation) {
  RandomStream rng(9);
  const int n = 100000;
  std::vector<int> hit(20, 0);
  for (int i = 0; i < n; ++i) {
    auto z = simulate_birth_death(1.0, 1e-300, 5, 1.0, rng);
    for (std::uint64_t K = 0; K < 20; ++K) hit[K] += z >= K;
  }
  for (std::uint64_t K = 6; K < 20; ++K) {
    double p = pure_birth_tail(5, K, 1.0, 1.0);
    EXPECT_NEAR(hit[K] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n) + 1e-4) << K;
  }
}

TEST(BdQsd, ClosedFormValues) {
  auto q = bd_qsd(2.0, 1.0);
  EXPECT_NEAR(q.probabilities[0], 0.5, 1e-15);
  EXPECT_NEAR(q.probabilities[1], 0.25, 1e-15);
  EXPECT_NEAR(q.probabilities[2], 0.125, 1e-15);
}

TEST(BdQsd, TailMassReported) {
  auto q = bd_qsd(2.0, 1.0, 30);
  EXPECT_EQ(q.tail_mass, std::ldexp(1.0, -30));
  EXPECT_EQ(q.probabilities.size(), 30u);
}

TEST(BdQsd, NoQsdAtCriticality) {
  EXPECT_THROW(bd_qsd(1.0, 1.0), InvalidRegime);
  EXPECT_THROW(bd_qsd(1.0, 2.0), InvalidRegime);
}

TEST(BdQsd, NormalizedAndStrictlyDecreasing) {
  for (double b : {0.1, 0.5, 1.0, 1.9}) {
    auto q = bd_qsd(2.0, b, 60);
    EXPECT_NEAR(std::accumulate(q.probabilities.begin(), q.probabilities.end(), 0.0), 1.0, 1e-12);
    for (std::size_t k = 1; k < q.probabilities.size(); ++k)
      EXPECT_LT(q.probabilities[k], q.probabilities[k - 1]);
  }
}
