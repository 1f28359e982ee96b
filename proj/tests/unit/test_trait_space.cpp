#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qsdsim/stats.hpp"
#include "qsdsim/trait_space.hpp"

using namespace qsdsim;

namespace {

// Composite Simpson on [0,1] with n (even) subintervals.
template <class F>
double simpson(F&& f, int n = 20000) {
  const double h = 1.0 / n;
  double s = f(0.0) + f(1.0);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

// Truncated Gaussian CDF on [0,1], written from the error function directly.
double tg_cdf(double parent, double s, double z) {
  auto Phi = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
  double lo = Phi(-parent / s), hi = Phi((1.0 - parent) / s);
  return (Phi((z - parent) / s) - lo) / (hi - lo);
}

}  // namespace

TEST(TraitPoint, RejectsOutsideUnitInterval) {
  EXPECT_THROW(TraitPoint(-0.01), std::out_of_range);
  EXPECT_THROW(TraitPoint(1.0000001), std::out_of_range);
  EXPECT_THROW(TraitPoint(std::nan("")), std::out_of_range);
  EXPECT_NO_THROW(TraitPoint(0.0));
  EXPECT_NO_THROW(TraitPoint(1.0));
}

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(distance(TraitPoint(0.2), TraitPoint(0.7)), 0.5);
  EXPECT_EQ(distance(TraitPoint(0.37), TraitPoint(0.37)), 0.0);
  EXPECT_EQ(distance(TraitPoint(0.0), TraitPoint(1.0)), 1.0);
}

TEST(Distance, MetricAxiomsOnRandomTriples) {
  RandomStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    TraitPoint a = sample_base(rng), b = sample_base(rng), c = sample_base(rng);
    EXPECT_EQ(distance(a, b), distance(b, a));
    EXPECT_LE(distance(a, c), distance(a, b) + distance(b, c) + 1e-15);
    EXPECT_LE(distance(a, b), 1.0);
  }
}

TEST(SampleBase, FirstDrawInRange) {
  RandomStream rng(42);
  double v = sample_base(rng).value();
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST(SampleBase, DeterministicGivenSeed) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_base(a), sample_base(b));
}

TEST(SampleBase, MeanAndKolmogorovSmirnov) {
  RandomStream rng(42);
  std::vector<double> xs(100000);
  double sum = 0.0;
  for (double& x : xs) sum += (x = sample_base(rng).value());
  EXPECT_NEAR(sum / xs.size(), 0.5, 0.01);
  EXPECT_LT(stats::ks_statistic(xs, [](double x) { return x; }), 0.01);
}

TEST(MutationKernel, UniformDensityIsOne) {
  auto k = MutationKernel::uniform();
  RandomStream rng(1);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(k.density(sample_base(rng), sample_base(rng)), 1.0);
  EXPECT_EQ(k.bound(), 1.0);
}

TEST(MutationKernel, RejectsNonPositiveScale) {
  EXPECT_THROW(MutationKernel::truncated_gaussian(0.0), std::invalid_argument);
  EXPECT_THROW(MutationKernel::truncated_gaussian(-1.0), std::invalid_argument);
}

TEST(MutationKernel, TruncatedGaussianIntegratesToOneAtCentre) {
  auto k = MutationKernel::truncated_gaussian(0.1);
  TraitPoint y(0.5);
  EXPECT_NEAR(simpson([&](double z) { return k.density(y, TraitPoint(z)); }), 1.0, 1e-6);
}

TEST(MutationKernel, UnimodalAtParent) {
  auto k = MutationKernel::truncated_gaussian(0.1);
  EXPECT_GT(k.density(TraitPoint(0.5), TraitPoint(0.5)), k.density(TraitPoint(0.5), TraitPoint(0.9)));
}

TEST(MutationKernel, NormalizedOnParentGrid) {
  for (double s : {0.05, 0.1, 0.3, 1.0, 5.0}) {
    auto tg = MutationKernel::truncated_gaussian(s);
    auto un = MutationKernel::uniform();
    for (int i = 0; i < 20; ++i) {
      TraitPoint y(i / 19.0);
      EXPECT_NEAR(simpson([&](double z) { return tg.density(y, TraitPoint(z)); }), 1.0, 1e-6)
          << "s=" << s << " y=" << y.value();
      EXPECT_NEAR(simpson([&](double z) { return un.density(y, TraitPoint(z)); }), 1.0, 1e-12);
    }
  }
}

TEST(MutationKernel, StrictlyPositiveAndBoundedByReportedSup) {
  auto k = MutationKernel::truncated_gaussian(0.1);
  double sup = 0.0;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      double g = k.density(TraitPoint(i / 200.0), TraitPoint(j / 200.0));
      EXPECT_GT(g, 0.0);
      sup = std::max(sup, g);
    }
  EXPECT_LE(sup, k.bound() * (1 + 1e-12));
  // the supremum is attained at an endpoint parent on itself
  EXPECT_NEAR(sup, k.bound(), 1e-9 * k.bound());
}

TEST(SampleMutation, UniformKernelKolmogorovSmirnov) {
  auto k = MutationKernel::uniform();
  RandomStream rng(3);
  std::vector<double> xs(100000);
  for (double& x : xs) x = k.sample(TraitPoint(0.2), rng).value();
  EXPECT_LT(stats::ks_statistic(xs, [](double x) { return x; }), 0.01);
}

TEST(SampleMutation, TruncatedGaussianCentredMean) {
  auto k = MutationKernel::truncated_gaussian(0.1);
  RandomStream rng(4);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += k.sample(TraitPoint(0.5), rng).value();
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(SampleMutation, EndpointParentStaysInSpace) {
  auto k = MutationKernel::truncated_gaussian(0.1);
  RandomStream rng(5);
  for (int i = 0; i < 100000; ++i) {
    double v = k.sample(TraitPoint(0.0), rng).value();
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(SampleMutation, ChiSquareAgainstDensityOn50Bins) {
  const int bins = 50, n = 100000;
  for (double parent : {0.0, 0.3, 0.5, 0.97}) {
    auto k = MutationKernel::truncated_gaussian(0.1);
    RandomStream rng(11);
    std::vector<std::uint64_t> counts(bins, 0);
    for (int i = 0; i < n; ++i)
      ++counts[std::min(bins - 1, static_cast<int>(k.sample(TraitPoint(parent), rng).value() * bins))];
    std::vector<double> p(bins);
    for (int b = 0; b < bins; ++b)
      p[b] = tg_cdf(parent, 0.1, (b + 1.0) / bins) - tg_cdf(parent, 0.1, double(b) / bins);
    // merge bins with tiny expected counts into neighbours
    std::vector<std::uint64_t> oc;
    std::vector<double> op;
    std::uint64_t co = 0;
    double cp = 0.0;
    for (int b = 0; b < bins; ++b) {
      co += counts[b];
      cp += p[b];
      if (cp * n >= 5.0) {
        oc.push_back(co);
        op.push_back(cp);
        co = 0;
        cp = 0.0;
      }
    }
    if (cp > 0.0) {
      oc.back() += co;
      op.back() += cp;
    }
    auto chi = stats::goodness_of_fit(oc, op);
    EXPECT_LT(chi.statistic, stats::chi_square_quantile(chi.dof, 0.999)) << "parent " << parent;
  }
}

TEST(SampleMutation, OneUniformPerDraw) {
  auto k = MutationKernel::truncated_gaussian(0.2);
  RandomStream a(9), b(9);
  k.sample(TraitPoint(0.4), a);
  b.uniform();
  EXPECT_EQ(a.next(), b.next());
}
