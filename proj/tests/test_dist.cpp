#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "wrcp/dist.hpp"
#include "wrcp/error.hpp"
#include "wrcp/rng.hpp"

using namespace wrcp;

namespace {

EmpiricalDist point(double v) { return EmpiricalDist({v}, {1.0}); }

PiecewiseUniformDist unit_uniform() { return PiecewiseUniformDist({0.0, 1.0}, {1.0}); }
PiecewiseUniformDist toy_q1() { return PiecewiseUniformDist({0.0, 0.9, 0.95}, {1.0, 2.0}); }
PiecewiseUniformDist toy_q2() { return PiecewiseUniformDist({0.0, 0.04, 0.96}, {2.0, 1.0}); }

EmpiricalDist random_dist(Rng& rng, std::size_t n, bool weighted) {
  std::normal_distribution<double> nd(0.0, 2.0);
  std::uniform_real_distribution<double> ud(0.05, 1.0);
  std::vector<double> v(n);
  std::vector<double> w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = nd(rng);
    if (weighted) {
      w[i] = ud(rng);
    }
  }
  return EmpiricalDist(v, w);
}

} // namespace

TEST(EmpiricalDist, NormalizesWeights) {
  EmpiricalDist d({3.0, 1.0, 2.0}, {2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(d.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(d.sorted_values()[0], 1.0);
  EXPECT_DOUBLE_EQ(d.sorted_weights()[2], 0.5);
  EXPECT_EQ(d.cumulative().back(), 1.0);
  EXPECT_EQ(d.order()[0], 1u);
}

TEST(EmpiricalDist, RejectsInvalidInput) {
  EXPECT_THROW(EmpiricalDist({}, {}), DomainError);
  EXPECT_THROW(EmpiricalDist({1.0}, {1.0, 2.0}), DomainError);
  EXPECT_THROW(EmpiricalDist({1.0, 2.0}, {1.0, -0.5}), DomainError);
  EXPECT_THROW(EmpiricalDist({1.0, 2.0}, {0.0, 0.0}), DomainError);
  EXPECT_THROW(EmpiricalDist({std::numeric_limits<double>::quiet_NaN()}, {1.0}), DomainError);
  EXPECT_THROW(EmpiricalDist({std::numeric_limits<double>::infinity()}, {1.0}), DomainError);
}

TEST(CdfAt, StepFunction) {
  auto d = EmpiricalDist::uniform({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(cdf_at(d, 2.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.cdf_left(2.0), 1.0 / 3.0);
  EXPECT_EQ(cdf_at(point(5.0), 4.9), 0.0);
  EXPECT_EQ(cdf_at(point(5.0), 5.0), 1.0);
}

TEST(CdfAt, PiecewiseUniform) {
  EXPECT_NEAR(cdf_at(toy_q2(), 0.04), 0.08, 1e-15);
  EXPECT_NEAR(cdf_at(toy_q1(), 0.92), 0.94, 1e-15);
  EXPECT_EQ(cdf_at(toy_q1(), -1.0), 0.0);
  EXPECT_EQ(cdf_at(toy_q1(), 2.0), 1.0);
}

TEST(PiecewiseUniform, Validation) {
  EXPECT_THROW(PiecewiseUniformDist({0.0, 1.0}, {0.5}), DomainError);
  EXPECT_THROW(PiecewiseUniformDist({0.0, 0.0, 1.0}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(PiecewiseUniformDist({0.0, 1.0, 2.0}, {1.0}), DomainError);
  EXPECT_DOUBLE_EQ(toy_q1().max_density(), 2.0);
  EXPECT_NEAR(toy_q2().quantile(0.5), 0.46, 1e-12);
}

TEST(Quantile, GeneralizedInverse) {
  EXPECT_EQ(quantile(EmpiricalDist::uniform({1.0, 2.0, 3.0}), 0.5), 2.0);
  EXPECT_EQ(quantile(EmpiricalDist({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5}), 0.5), 2.0);
  EXPECT_EQ(quantile(point(7.0), 1.0), 7.0);
  EXPECT_THROW(quantile(point(7.0), 0.0), DomainError);
  EXPECT_THROW(quantile(point(7.0), 1.5), DomainError);
}

TEST(Wasserstein, PointMasses) {
  EXPECT_DOUBLE_EQ(wasserstein1(point(0.0), point(1.0)), 1.0);
  EXPECT_DOUBLE_EQ(wasserstein1(point(2.0), point(2.0)), 0.0);
}

TEST(Wasserstein, MatchesReferenceValues) {
  EmpiricalDist a({0.3, -1.2, 2.5, 0.3, 4.0}, {0.1, 0.25, 0.2, 0.15, 0.3});
  EmpiricalDist b({1.0, -0.5, 3.3}, {0.5, 0.2, 0.3});
  EXPECT_NEAR(wasserstein1(a, b), 0.9349999999999999, 1e-12);
  EXPECT_NEAR(wasserstein1(EmpiricalDist::uniform({0.0, 1.0, 5.0, 2.0}), EmpiricalDist::uniform({0.5, 4.0, 4.5})),
              1.3333333333333335, 1e-12);
}

TEST(Wasserstein, PiecewiseUniformGoldenValues) {
  EXPECT_NEAR(wasserstein1(unit_uniform(), toy_q1()), 0.0025, 1e-12);
  EXPECT_NEAR(wasserstein1(unit_uniform(), toy_q2()), 0.0384, 1e-12);
  EXPECT_NEAR(wasserstein1(toy_q1(), unit_uniform()), 0.0025, 1e-12);
}

TEST(Wasserstein, MixedEmpiricalAndPiecewise) {
  // point mass at 0.5 against U[0,1]: integral of |F| = 1/4
  EXPECT_NEAR(wasserstein1(point(0.5), unit_uniform()), 0.25, 1e-12);
  EXPECT_NEAR(wasserstein1(unit_uniform(), point(0.0)), 0.5, 1e-12);
}

TEST(Wasserstein, EqualsCdfAreaByFineQuadrature) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = random_dist(rng, 6, true);
    auto b = random_dist(rng, 4, true);
    // exact integration of a step difference: sum over merged breakpoints
    std::vector<double> grid(a.sorted_values().begin(), a.sorted_values().end());
    grid.insert(grid.end(), b.sorted_values().begin(), b.sorted_values().end());
    std::sort(grid.begin(), grid.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      area += std::abs(a.cdf(grid[i]) - b.cdf(grid[i])) * (grid[i + 1] - grid[i]);
    }
    EXPECT_NEAR(wasserstein1(a, b), area, 1e-12);
  }
}

TEST(Wasserstein, SymmetricExactly) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto a = random_dist(rng, 5, true);
    auto b = random_dist(rng, 7, true);
    EXPECT_EQ(wasserstein1(a, b), wasserstein1(b, a));
    EXPECT_EQ(kolmogorov(a, b), kolmogorov(b, a));
  }
}

TEST(BruteForceOt, HandCases) {
  EXPECT_DOUBLE_EQ(brute_force_ot(point(0.0), point(1.0)), 1.0);
  EXPECT_DOUBLE_EQ(brute_force_ot(EmpiricalDist::uniform({0.0, 10.0}), EmpiricalDist::uniform({1.0, 9.0})), 1.0);
  EXPECT_THROW(brute_force_ot(EmpiricalDist::uniform({0.0, 1.0}), point(1.0)), DomainError);
  EXPECT_THROW(brute_force_ot(EmpiricalDist({0.0, 1.0}, {0.3, 0.7}), EmpiricalDist::uniform({0.0, 1.0})),
               DomainError);
  std::vector<double> nine(9, 0.0);
  EXPECT_THROW(brute_force_ot(EmpiricalDist::uniform(nine), EmpiricalDist::uniform(nine)), DomainError);
}

TEST(BruteForceOt, AgreesWithWasserstein) {
  Rng rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    auto a = random_dist(rng, 5, false);
    auto b = random_dist(rng, 5, false);
    EXPECT_NEAR(wasserstein1(a, b), brute_force_ot(a, b), 1e-9);
  }
  auto a = random_dist(rng, 6, false);
  auto b = random_dist(rng, 6, false);
  EXPECT_NEAR(wasserstein1(a, b), brute_force_ot(a, b), 1e-9);
}

TEST(Kolmogorov, HandCases) {
  auto d = EmpiricalDist::uniform({1.0, 2.0, 2.0, 4.0});
  EXPECT_EQ(kolmogorov(d, d), 0.0);
  EXPECT_EQ(kolmogorov(point(0.0), point(1.0)), 1.0);
  PiecewiseUniformDist shifted({0.5, 1.5}, {1.0});
  EXPECT_NEAR(kolmogorov(unit_uniform(), shifted), 0.5, 1e-12);
  EXPECT_NEAR(kolmogorov(unit_uniform(), toy_q1()), 0.05, 1e-12);
}

TEST(Kolmogorov, MatchesTwoSampleStatistic) {
  EXPECT_NEAR(kolmogorov(EmpiricalDist::uniform({0.0, 1.0, 5.0, 2.0}), EmpiricalDist::uniform({0.5, 4.0, 4.5})),
              0.4166666666666667, 1e-12);
  EXPECT_NEAR(kolmogorov(EmpiricalDist::uniform({1.0, 1.0, 2.0, 3.0}), EmpiricalDist::uniform({1.0, 2.0, 2.0, 4.0})),
              0.25, 1e-12);
}

TEST(Kolmogorov, EmpiricalAgainstContinuousUsesLeftLimits) {
  // a single atom at 0.5 against U[0,1]: the gap just below the atom is 0.5
  EXPECT_NEAR(kolmogorov(point(0.5), unit_uniform()), 0.5, 1e-12);
}

TEST(TotalVariation, GoldenValues) {
  EXPECT_NEAR(tv_distance(unit_uniform(), toy_q1()), 0.05, 1e-12);
  EXPECT_NEAR(tv_distance(unit_uniform(), toy_q2()), 0.04, 1e-12);
  HistogramPair same({0.0, 1.0, 2.0}, {0.3, 0.7}, {0.3, 0.7});
  EXPECT_EQ(tv_distance(same), 0.0);
}

TEST(Histogram, MismatchedEdgesRefused) {
  std::vector<double> e1{0.0, 1.0, 2.0};
  std::vector<double> e2{0.0, 1.5, 2.0};
  EXPECT_THROW(HistogramPair::make(e1, {0.5, 0.5}, e2, {0.5, 0.5}), DomainError);
  EXPECT_NO_THROW(HistogramPair::make(e1, {0.5, 0.5}, e1, {0.2, 0.8}));
}

TEST(Histogram, FromSamplesBinCount) {
  auto a = EmpiricalDist::uniform({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0});
  auto b = EmpiricalDist::uniform({0.0, 9.0, 4.0, 5.0, 2.0});
  auto h = HistogramPair::from_samples(a, b);
  EXPECT_EQ(h.bins(), 3u); // ceil(sqrt(5))
  EXPECT_DOUBLE_EQ(h.edges().front(), 0.0);
  EXPECT_DOUBLE_EQ(h.edges().back(), 9.0);
  double total = 0.0;
  for (double m : h.mass_a()) {
    total += m;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(KlDivergence, HandCases) {
  HistogramPair same({0.0, 1.0, 2.0}, {0.4, 0.6}, {0.4, 0.6});
  EXPECT_NEAR(kl_divergence(same), 0.0, 1e-15);
  HistogramPair two({0.0, 1.0, 2.0}, {0.5, 0.5}, {0.9, 0.1});
  EXPECT_NEAR(kl_divergence(two), 0.5108256237659907, 1e-9);
  HistogramPair zero({0.0, 1.0, 2.0}, {1.0, 0.0}, {0.5, 0.5});
  double kl = kl_divergence(zero);
  EXPECT_TRUE(std::isfinite(kl));
  EXPECT_NEAR(kl, 0.6931471781573602, 1e-12);
}

TEST(ExpectationDifference, HandCases) {
  auto d = EmpiricalDist::uniform({1.0, 2.0});
  EXPECT_EQ(expectation_difference(d, d), 0.0);
  EXPECT_DOUBLE_EQ(expectation_difference(point(0.0), point(3.0)), 3.0);
  EXPECT_DOUBLE_EQ(expectation_difference(EmpiricalDist::uniform({1.0, 3.0}), point(2.0)), 0.0);
}

TEST(Spearman, HandRankedCases) {
  std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{40, 30, 20, 10}), -1.0);
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{2, 1, 3}), 0.5);
}

TEST(Spearman, AverageRanksForTies) {
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 2, 3, 5}, std::vector<double>{2, 1, 4, 4, 9}), 0.7631578947368421,
              1e-12);
  EXPECT_NEAR(spearman(std::vector<double>{0.5, -1, 3, 2, 2, 7}, std::vector<double>{1, 1, 1, 0, 5, 2}),
              0.3080205518168487, 1e-12);
}

TEST(Spearman, Errors) {
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelationError);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  Rng rng(17);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(12);
    std::vector<double> y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = nd(rng);
      y[i] = x[i] + nd(rng);
    }
    double base = spearman(x, y);
    std::vector<double> tx(x.size());
    std::vector<double> ty(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      tx[i] = std::exp(x[i]);
      ty[i] = 2.0 * y[i] * y[i] * y[i] - 1.0;
    }
    EXPECT_NEAR(spearman(tx, ty), base, 1e-12);
  }
}

TEST(Mixture, Construction) {
  auto m = mixture(std::vector<EmpiricalDist>{point(0.0), point(1.0)}, std::vector<double>{0.3, 0.7});
  EXPECT_EQ(m.size(), 2u);
  EXPECT_NEAR(m.cdf(0.0), 0.3, 1e-15);
  auto single = mixture(std::vector<EmpiricalDist>{EmpiricalDist::uniform({1.0, 2.0})}, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(single.cdf(1.0), 0.5);
  EXPECT_THROW(mixture(std::vector<EmpiricalDist>{point(0.0)}, std::vector<double>{0.5}), DomainError);
  EXPECT_THROW(mixture(std::vector<EmpiricalDist>{point(0.0), point(1.0)}, std::vector<double>{1.2, -0.2}),
               DomainError);
}

TEST(Pushforward, AppliesFunction) {
  auto d = EmpiricalDist({-1.0, 2.0}, {0.25, 0.75});
  auto p = pushforward(d, [](double v) { return v * v; });
  EXPECT_DOUBLE_EQ(p.cdf(1.0), 0.25);
  EXPECT_DOUBLE_EQ(p.max(), 4.0);
}

TEST(Rescale, DividesSupport) {
  auto d = EmpiricalDist::uniform({2.0, 4.0});
  auto r = rescale(d, 2.0);
  EXPECT_DOUBLE_EQ(r.min(), 1.0);
  EXPECT_DOUBLE_EQ(r.max(), 2.0);
  EXPECT_THROW(rescale(d, 0.0), DomainError);
}
