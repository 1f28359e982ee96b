#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "qsdsim/coupling.hpp"
#include "qsdsim/oracle.hpp"
#include "qsdsim/qsd.hpp"
#include "qsdsim/simulator.hpp"
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

}  // namespace

TEST(Gillespie, VoidStartHasNoEvents) {
  RandomStream rng(1);
  auto tr = simulate_gillespie(uniform_model, Configuration{}, 10.0, rng);
  EXPECT_TRUE(tr.events.empty());
  ASSERT_TRUE(tr.extinction_time.reached());
  EXPECT_EQ(tr.extinction_time.value(), 0.0);
}

TEST(Thinning, VoidStartHasNoEvents) {
  RandomStream rng(1);
  auto tr = simulate_thinning(uniform_model, Configuration{}, 10.0, rng);
  EXPECT_TRUE(tr.events.empty());
  ASSERT_TRUE(tr.extinction_time.reached());
  EXPECT_EQ(tr.extinction_time.value(), 0.0);
}

TEST(Gillespie, RejectsNegativeHorizon) {
  RandomStream rng(1);
  EXPECT_THROW(simulate_gillespie(uniform_model, spread(2), -1.0, rng), std::invalid_argument);
  EXPECT_THROW(simulate_thinning(uniform_model, spread(2), -1.0, rng), std::invalid_argument);
}

TEST(Gillespie, MeanExtinctionTimeFromOneIndividual) {
  // Linear birth-death from one individual: E T_0 = log(lambda / (lambda - b)) / b.
  const double closed_form = std::log(2.0);
  const double oracle = mean_extinction_time(build_mass_chain(uniform_model, 80), 1);
  EXPECT_NEAR(oracle, closed_form, 1e-8);

  RandomStream rng(101);
  auto acc = run_ensemble(100000, rng.next(), 7, MeanAccumulator{},
                          [&](std::size_t, RandomStream& r, MeanAccumulator& a) {
                            auto tr = simulate_gillespie(uniform_model, spread(1), 1e9, r);
                            a.add(tr.extinction_time.value());
                          });
  EXPECT_NEAR(acc.mean(), oracle, 3.0 * acc.stderr_of_mean());
}

TEST(Gillespie, MeanMassDecaysExponentially) {
  RandomStream rng(102);
  const double grid[] = {0.693};
  auto m = mean_mass(uniform_model, spread(5), grid, 100000, rng);
  EXPECT_NEAR(m[0].mean, 5.0 * std::exp(-0.693), 3.0 * m[0].stderr_);
}

TEST(Gillespie, ConditionalMassDecayOnGrid) {
  RandomStream rng(103);
  const double grid[] = {0.25, 0.5, 1.0};
  auto m = mean_mass(uniform_model, spread(5), grid, 100000, rng);
  for (const auto& p : m) EXPECT_NEAR(p.mean, 5.0 * std::exp(-p.t), 3.0 * p.stderr_) << p.t;
}

TEST(Engines, ChiSquareAgreementOfMassAtOne) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    RandomStream a(201), b(202);
    auto hg = mass_histogram(*m, spread(3), 1.0, 100000, 15, a, Engine::gillespie);
    auto ht = mass_histogram(*m, spread(3), 1.0, 100000, 15, b, Engine::thinning);
    auto chi = stats::two_sample_chi_square(hg, ht);
    EXPECT_LT(chi.statistic, stats::chi_square_quantile(chi.dof, 0.999)) << m->name();
  }
}

TEST(Thinning, AcceptanceFractionInUnitInterval) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    RandomStream rng(5);
    ThinningStats st;
    simulate_thinning(*m, spread(20), 2.0, rng, &st);
    ASSERT_GT(st.candidates, 0u);
    EXPECT_GT(st.acceptance(), 0.0);
    EXPECT_LE(st.acceptance(), 1.0);
  }
}

TEST(Trajectory, ReplayDeterminism) {
  for (const RateModel* m : {&uniform_model, &logistic_model}) {
    RandomStream a(77), b(77);
    EXPECT_EQ(simulate_gillespie(*m, spread(4), 5.0, a), simulate_gillespie(*m, spread(4), 5.0, b));
    RandomStream c(78), d(78);
    EXPECT_EQ(simulate_thinning(*m, spread(4), 5.0, c), simulate_thinning(*m, spread(4), 5.0, d));
  }
}

TEST(Trajectory, PathwiseConsistencyUnderReplay) {
  RandomStream rng(79);
  for (int i = 0; i < 500; ++i) {
    const RateModel& m = i % 2 ? uniform_model : logistic_model;
    auto tr = i % 3 ? simulate_gillespie(m, spread(1 + i % 6), 4.0, rng)
                    : simulate_thinning(m, spread(1 + i % 6), 4.0, rng);
    EXPECT_EQ(replay(tr.initial, tr.events, tr.horizon), tr);
  }
}

TEST(Trajectory, EventsOrderedAndMassMovesByOne) {
  RandomStream rng(80);
  for (int i = 0; i < 300; ++i) {
    auto tr = simulate_gillespie(logistic_model, spread(5), 6.0, rng);
    Configuration state = tr.initial;
    double last = 0.0;
    for (const Event& e : tr.events) {
      EXPECT_GT(e.time, last);
      EXPECT_LE(e.time, tr.horizon);
      last = e.time;
      auto before = state.mass();
      apply_jump(state, e.jump);
      EXPECT_EQ(std::llabs(static_cast<long long>(state.mass()) - static_cast<long long>(before)), 1);
    }
    EXPECT_EQ(state, tr.final_state);
  }
}

TEST(Trajectory, StoppingTimesAgreeWithDefinitions) {
  RandomStream rng(81);
  for (int i = 0; i < 300; ++i) {
    auto tr = simulate_gillespie(uniform_model, spread(3), 3.0, rng);
    // T_K from a brute-force scan of the log
    for (std::uint64_t K = 1; K <= 12; ++K) {
      StoppingTime expected = K <= 3 ? StoppingTime::at(0.0) : StoppingTime::never();
      std::uint64_t mass = 3;
      for (const Event& e : tr.events) {
        mass = e.jump.kind == EventKind::death ? mass - 1 : mass + 1;
        if (!expected.reached() && mass >= K) expected = StoppingTime::at(e.time);
      }
      EXPECT_EQ(tr.hitting_time(K).to_string(), expected.to_string());
    }
    // chi: first time a trait outside the initial support is present
    StoppingTime chi = StoppingTime::never();
    for (const Event& e : tr.events)
      if (e.jump.kind == EventKind::mutation && !tr.initial.contains(e.jump.child)) {
        chi = StoppingTime::at(e.time);
        break;
      }
    EXPECT_EQ(tr.first_mutation_time.to_string(), chi.to_string());
    // kappa: first time no initial trait is present
    Configuration state = tr.initial;
    StoppingTime kappa = StoppingTime::never();
    for (const Event& e : tr.events) {
      apply_jump(state, e.jump);
      bool any = false;
      for (const Entry& en : tr.initial.entries()) any = any || state.contains(en.trait);
      if (!any) {
        kappa = StoppingTime::at(e.time);
        break;
      }
    }
    EXPECT_EQ(tr.initial_traits_lost_time.to_string(), kappa.to_string());
    if (tr.extinction_time.reached()) {
      EXPECT_TRUE(tr.final_state.empty());
    }
    EXPECT_EQ(tr.mass_at(tr.horizon), tr.final_state.mass());
  }
}

TEST(Trajectory, CsvExport) {
  RandomStream rng(82);
  auto tr = simulate_gillespie(uniform_model, spread(2), 1.0, rng);
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "time,event_kind,parent_trait,child_trait,total_mass_after");
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), tr.events.size() + 1);
}

TEST(SurvivalCurve, StartsAtOneAndVoidIsZero) {
  RandomStream rng(301);
  const double grid[] = {0.0, 0.5, 1.0};
  auto s = survival_curve(uniform_model, spread(2), grid, 1000, rng);
  EXPECT_EQ(s[0].survival, 1.0);
  auto v = survival_curve(uniform_model, Configuration{}, grid, 1000, rng);
  for (const auto& p : v) EXPECT_EQ(p.survival, 0.0);
}

TEST(SurvivalCurve, RejectsBadGrid) {
  RandomStream rng(302);
  const double grid[] = {1.0, 0.5};
  EXPECT_THROW(survival_curve(uniform_model, spread(2), grid, 10, rng), std::invalid_argument);
}

TEST(SurvivalCurve, GeometricStartDecaysAtRateOne) {
  RandomStream rng(303);
  LiftedMassLaw init{bd_qsd(2.0, 1.0).probabilities};
  std::vector<double> grid;
  for (int i = 1; i <= 30; ++i) grid.push_back(0.1 * i);
  auto s = survival_curve(uniform_model, init, grid, 100000, rng);
  auto fit = decay_rate_from_survival(s);
  EXPECT_NEAR(fit.theta, 1.0, 0.05);
}

TEST(HittingTail, AlreadyHitAndMonotone) {
  RandomStream rng(401);
  std::vector<std::uint64_t> K;
  for (std::uint64_t k = 1; k <= 20; ++k) K.push_back(k);
  auto h = hitting_tail(uniform_model, spread(5), 1.0, K, 20000, rng);
  for (const auto& p : h) {
    if (p.K <= 5) {
      EXPECT_EQ(p.probability, 1.0);
    }
  }
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i].probability, h[i - 1].probability);
}

TEST(HittingTail, VeryLargeKUnobserved) {
  RandomStream rng(402);
  const std::uint64_t K[] = {5 + 20 * 1 * 1 * 5};
  auto h = hitting_tail(uniform_model, spread(5), 1.0, K, 10000, rng);
  EXPECT_EQ(h[0].probability, 0.0);
}

TEST(HittingTail, BelowPureBirthDomination) {
  RandomStream rng(403);
  const std::uint64_t K[] = {7, 9, 11, 13};
  auto h = hitting_tail(uniform_model, spread(5), 1.0, K, 50000, rng);
  for (const auto& p : h) {
    double bound = pure_birth_tail(5, p.K, 1.0, 1.0);
    EXPECT_LE(p.probability, bound + 3.0 * std::sqrt(bound * (1 - bound) / 50000) + 1e-12) << p.K;
  }
}

TEST(Ensemble, ResultIndependentOfThreadCount) {
  const double grid[] = {0.5, 1.0, 2.0};
  RandomStream a(501), b(501);
  auto one = survival_curve(uniform_model, spread(3), grid, 9000, a, Parallelism{1, 512});
  auto four = survival_curve(uniform_model, spread(3), grid, 9000, b, Parallelism{4, 512});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(one[i].survival, four[i].survival);
  RandomStream c(502), d(502);
  auto m1 = mean_mass(logistic_model, spread(3), grid, 9000, c, Parallelism{1, 512});
  auto m3 = mean_mass(logistic_model, spread(3), grid, 9000, d, Parallelism{3, 512});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m1[i].mean, m3[i].mean);
}

TEST(Ensemble, ExceptionsPropagate) {
  EXPECT_THROW(run_ensemble(100, 1, 2, MeanAccumulator{},
                            [](std::size_t r, RandomStream&, MeanAccumulator&) {
                              if (r == 57) throw std::runtime_error("boom");
                            },
                            Parallelism{2, 10}),
               std::runtime_error);
}
