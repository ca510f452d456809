#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wrcp/conformal.hpp"
#include "wrcp/error.hpp"
#include "wrcp/rng.hpp"

using namespace wrcp;

TEST(Scores, AbsoluteResiduals) {
  std::vector<double> pred{0.0, 0.0};
  std::vector<double> y{-2.0, 3.0};
  auto s = absolute_residuals(pred, y);
  EXPECT_EQ(s, (std::vector<double>{2.0, 3.0}));
  EXPECT_THROW(absolute_residuals(pred, std::vector<double>{1.0}), DomainError);
}

TEST(Scores, FromModel) {
  auto net = MlpModel::zeros({1, 1});
  SampleSet data;
  data.x = Matrix(2, 1, std::vector<double>{5.0, -1.0});
  data.y = {-2.0, 3.0};
  data.source = {0, 0};
  auto d = conformal_scores(net, data);
  EXPECT_DOUBLE_EQ(d.min(), 2.0);
  EXPECT_DOUBLE_EQ(d.max(), 3.0);
}

TEST(SplitThreshold, RankRule) {
  std::vector<double> nine{9, 1, 8, 2, 7, 3, 6, 4, 5};
  EXPECT_EQ(split_cp_threshold(nine, 0.1), 9.0);
  std::vector<double> four{4, 1, 3, 2};
  EXPECT_EQ(split_cp_threshold(four, 0.5), 3.0);
  std::vector<double> two{1, 2};
  EXPECT_EQ(split_cp_threshold(two, 0.05), kInfiniteTau);
}

TEST(SplitThreshold, Validation) {
  std::vector<double> s{1, 2, 3};
  EXPECT_THROW(split_cp_threshold(s, 0.0), DomainError);
  EXPECT_THROW(split_cp_threshold(s, 1.0), DomainError);
  EXPECT_THROW(split_cp_threshold(std::vector<double>{}, 0.1), DomainError);
  EmpiricalDist weighted({1.0, 2.0}, {0.3, 0.7});
  EXPECT_THROW(split_cp_threshold(weighted, 0.1), DomainError);
}

TEST(WeightedThreshold, CumulativeRule) {
  EmpiricalDist d({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5});
  EXPECT_EQ(weighted_threshold(d, 0.5), 2.0);
  EXPECT_EQ(weighted_threshold(d, 0.8), 1.0);
  EXPECT_EQ(weighted_threshold(d, 0.01), 3.0);
}

TEST(WeightedThreshold, PointMass) {
  EmpiricalDist d({1.0, 2.0, 3.0}, {0.0, 1.0, 0.0});
  for (double a : {0.05, 0.5, 0.95}) {
    EXPECT_EQ(weighted_threshold(d, a), 2.0);
  }
}

TEST(WeightedThreshold, ConservativeMassCanReachInfinity) {
  EmpiricalDist d = EmpiricalDist::uniform({1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(weighted_threshold(d, 0.5, 0.2), 3.0);
  EXPECT_EQ(weighted_threshold(d, 0.1, 0.2), kInfiniteTau);
  EXPECT_THROW(weighted_threshold(d, 0.1, 1.0), DomainError);
}

TEST(WeightedThreshold, UniformWithinOneOrderStatisticOfSplit) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t n : {5u, 17u, 100u}) {
    std::vector<double> v(n);
    for (double& x : v) {
      x = u(rng);
    }
    auto d = EmpiricalDist::uniform(v);
    auto sorted = d.sorted_values();
    for (double a : {0.1, 0.3, 0.5, 0.9}) {
      double split = split_cp_threshold(d, a);
      double weighted = weighted_threshold(d, a);
      if (split == kInfiniteTau) {
        EXPECT_EQ(weighted, sorted.back());
        continue;
      }
      auto rs = std::find(sorted.begin(), sorted.end(), split) - sorted.begin();
      auto rw = std::find(sorted.begin(), sorted.end(), weighted) - sorted.begin();
      EXPECT_LE(std::abs(rs - rw), 1);
    }
  }
}

TEST(WorstCase, MaxOverSources) {
  std::vector<EmpiricalDist> same{EmpiricalDist::uniform({1, 2, 3, 4}), EmpiricalDist::uniform({1, 2, 3, 4})};
  EXPECT_EQ(worst_case_threshold(same, 0.5), split_cp_threshold(same[0], 0.5));
  std::vector<EmpiricalDist> disjoint{EmpiricalDist::uniform({1, 2, 3, 4}),
                                      EmpiricalDist::uniform({11, 12, 13, 14})};
  EXPECT_EQ(worst_case_threshold(disjoint, 0.5), 13.0);
  EXPECT_THROW(worst_case_threshold(std::vector<EmpiricalDist>{}, 0.5), DomainError);
}

TEST(WorstCase, DominatesAnyMixture) {
  Rng rng(8);
  std::normal_distribution<double> nd;
  std::vector<EmpiricalDist> sources;
  for (int s = 0; s < 3; ++s) {
    std::vector<double> v(50);
    for (double& x : v) {
      x = std::abs(nd(rng) * (1.0 + s));
    }
    sources.push_back(EmpiricalDist::uniform(v));
  }
  for (int t = 0; t < 20; ++t) {
    auto w = sample_simplex(3, rng);
    auto mix = mixture(sources, w);
    for (double a : {0.1, 0.5}) {
      EXPECT_GE(worst_case_threshold(sources, a), weighted_threshold(mix, a));
    }
  }
}

TEST(Calibrate, ResultCarriesMethodAndSupportPoint) {
  auto r = calibrate_vanilla(EmpiricalDist::uniform({3, 1, 2, 4}), 0.5);
  EXPECT_EQ(r.method, CpMethod::vanilla);
  EXPECT_EQ(r.tau, 3.0);
  auto w = calibrate_weighted(EmpiricalDist({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5}), 0.5);
  EXPECT_EQ(w.method, CpMethod::importance_weighted);
  EXPECT_EQ(w.tau, 2.0);
  EXPECT_STREQ(to_string(CpMethod::worst_case), "worst_case");
}

TEST(Intervals, ContainmentAndSize) {
  auto iv = prediction_set(1.0, 2.0);
  EXPECT_TRUE(iv.contains(3.0));
  EXPECT_FALSE(iv.contains(3.0000001));
  EXPECT_EQ(iv.size(), 4.0);
  auto exact = prediction_set(1.0, 0.0);
  EXPECT_TRUE(exact.contains(1.0));
  EXPECT_FALSE(exact.contains(1.1));
  auto inf = prediction_set(0.0, kInfiniteTau);
  EXPECT_TRUE(inf.contains(1e300));
  EXPECT_EQ(inf.size(), kInfiniteTau);
  EXPECT_THROW(prediction_set(0.0, -1.0), DomainError);
}

TEST(Intervals, CoverageAndAverageSize) {
  Rng rng(4);
  std::normal_distribution<double> nd;
  std::vector<double> centers(100);
  std::vector<double> y(100);
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    centers[i] = nd(rng);
    y[i] = nd(rng);
    worst = std::max(worst, std::abs(centers[i] - y[i]));
  }
  std::vector<PredictionInterval> ivs;
  for (double c : centers) {
    ivs.push_back(prediction_set(c, worst));
  }
  EXPECT_EQ(coverage(ivs, y), 1.0);
  EXPECT_NEAR(avg_set_size(ivs), 2.0 * worst, 1e-12);
  EXPECT_THROW(coverage(ivs, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(avg_set_size(std::vector<PredictionInterval>{}), DomainError);
}

TEST(Intervals, CoverageFromScores) {
  std::vector<double> s{0.1, 0.5, 0.9, 1.5};
  EXPECT_EQ(coverage_from_scores(s, 0.9), 0.75);
  EXPECT_EQ(coverage_from_scores(s, kInfiniteTau), 1.0);
}

TEST(Gap, Values) {
  EXPECT_NEAR(coverage_gap(0.9, 0.1), 0.0, 1e-15);
  EXPECT_NEAR(coverage_gap(0.95, 0.1), 0.05, 1e-15);
  EXPECT_NEAR(coverage_gap(0.7, 0.2), 0.1, 1e-15);
  EXPECT_THROW(coverage_gap(1.2, 0.1), DomainError);
}

TEST(Bounds, WassersteinBound) {
  EXPECT_NEAR(gap_bound_wasserstein(1.0, 0.0025), 0.07071067811865475, 1e-15);
  EXPECT_EQ(gap_bound_wasserstein(1.0, 0.0), 0.0);
  EXPECT_NEAR(gap_bound_wasserstein(2.0, 0.0384), std::sqrt(0.1536), 1e-15);
  EXPECT_NEAR(gap_bound_wasserstein(2.0, 0.0384), 0.3919, 5e-5);
  EXPECT_THROW(gap_bound_wasserstein(0.0, 1.0), DomainError);
  EXPECT_THROW(gap_bound_wasserstein(1.0, -1.0), DomainError);
}

TEST(Bounds, ShiftBound) {
  EXPECT_EQ(gap_bound_shift(1.0, 2.0, 1.0, 0.0, 0.0), 0.0);
  EXPECT_NEAR(gap_bound_shift(1.0, 2.0, 1.0, 0.01, 0.02), std::sqrt(0.08), 1e-15);
  EXPECT_NEAR(gap_bound_shift(1.0, 2.0, 1.0, 0.01, 0.02), 0.2828, 5e-5);
  EXPECT_DOUBLE_EQ(gap_bound_shift(1.5, 0.0, 3.0, 7.0, 0.2), gap_bound_wasserstein(1.5, 3.0 * 0.2));
  EXPECT_THROW(gap_bound_shift(1.0, -1.0, 1.0, 0.0, 0.0), DomainError);
}

TEST(Bounds, MonotoneInEveryArgument) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int t = 0; t < 200; ++t) {
    double a[5] = {u(rng), u(rng), u(rng), u(rng), u(rng)};
    double base = gap_bound_shift(a[0], a[1], a[2], a[3], a[4]);
    for (int i = 0; i < 5; ++i) {
      double b[5] = {a[0], a[1], a[2], a[3], a[4]};
      b[i] += u(rng);
      EXPECT_GE(gap_bound_shift(b[0], b[1], b[2], b[3], b[4]), base);
    }
    EXPECT_LE(gap_bound_wasserstein(a[0], a[3]), gap_bound_wasserstein(a[0] + a[1], a[3] + a[4]));
  }
}

TEST(Bounds, EmpiricalBoundExample) {
  BoundInputs b;
  b.L = 1.0;
  b.W_hat = 0.01;
  b.n = 1000;
  b.m = 1000;
  b.lambda_P = 1.0;
  b.lambda_Q = 1.0;
  b.sigma_P = 3.0;
  b.sigma_Q = 3.0;
  b.t_P = 0.05;
  b.t_Q = 0.05;
  auto r = empirical_gap_bound(b);
  EXPECT_NEAR(r.bound, 0.7874007874011811, 1e-12);
  EXPECT_NEAR(r.confidence, 0.9865695059315915, 1e-12);
}

TEST(Bounds, EmpiricalBoundReductions) {
  BoundInputs b;
  b.L = 2.0;
  b.W_hat = 0.03;
  auto r = empirical_gap_bound(b);
  EXPECT_DOUBLE_EQ(r.bound, gap_bound_wasserstein(2.0, 0.03));
  EXPECT_EQ(r.confidence, 0.0);
  b.t_P = b.t_Q = 0.05;
  b.n = b.m = 100000;
  EXPECT_GT(empirical_gap_bound(b).confidence, 0.999999);
}

TEST(Bounds, InputValidation) {
  BoundInputs b;
  b.sigma_P = 2.0;
  EXPECT_THROW(b.validate(), DomainError);
  b.sigma_P = 3.0;
  b.n = 0;
  EXPECT_THROW(empirical_gap_bound(b), DomainError);
  b.n = 1;
  b.W_X = -0.1;
  EXPECT_THROW(b.validate(), DomainError);
}

TEST(Kappa, Values) {
  Matrix x(2, 1, std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(estimate_kappa(x, std::vector<double>{0.0, 3.0}), 3.0);
  Rng rng(1);
  std::normal_distribution<double> nd;
  Matrix pts(30, 1);
  std::vector<double> v(30);
  for (std::size_t i = 0; i < 30; ++i) {
    pts(i, 0) = nd(rng);
    v[i] = 2.0 * pts(i, 0);
  }
  EXPECT_NEAR(estimate_kappa(pts, v), 2.0, 1e-12);
  EXPECT_EQ(estimate_kappa(pts, std::vector<double>(30, 1.5)), 0.0);
  EXPECT_THROW(estimate_kappa(Matrix(3, 2, 1.0), std::vector<double>{1, 2, 3}), DegenerateInputError);
  EXPECT_THROW(estimate_kappa(Matrix(1, 2), std::vector<double>{1}), InsufficientDataError);
}

TEST(Eta, Values) {
  std::vector<double> zeros(4, 0.0);
  std::vector<double> fp(4, 1.0);
  std::vector<double> fq(4, 2.0);
  // h = 0: residual scores equal the ground truth values
  EXPECT_DOUBLE_EQ(estimate_eta(fp, fp, fq, fq), 1.0);
  std::vector<double> s{0.3, 0.1, 0.2, 0.4};
  std::vector<double> f1{0.0, 1.0, 2.0, 3.0};
  std::vector<double> f2{0.5, 1.5, 2.5, 3.5};
  EXPECT_EQ(estimate_eta(s, f1, s, f2) >= 0.0, true);
  EXPECT_DOUBLE_EQ(estimate_eta(s, f1, s, f2), estimate_eta(s, f2, s, f1));
  EXPECT_THROW(estimate_eta(zeros, fp, zeros, fp), DegenerateInputError);
}

TEST(AlphaD, Values) {
  std::vector<EmpiricalDist> a{EmpiricalDist::uniform({1, 2, 3})};
  EXPECT_EQ(alpha_D(a, a, 2.0), 0.0);
  std::vector<EmpiricalDist> p{EmpiricalDist({1.0, 2.0}, {0.9, 0.1})};
  std::vector<EmpiricalDist> q{EmpiricalDist({1.0, 2.0}, {0.8, 0.2})};
  EXPECT_NEAR(alpha_D(p, q, 1.5), 0.1, 1e-15);
  std::vector<EmpiricalDist> two{a[0], a[0]};
  EXPECT_THROW(alpha_D(a, two, 1.0), DomainError);
}

TEST(DensityBound, UniformScoresNearOne) {
  std::vector<double> s(2000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(s.size());
  }
  double L = estimate_density_bound(s, 1);
  EXPECT_GT(L, 0.9);
  EXPECT_LT(L, 1.6);
  EXPECT_THROW(estimate_density_bound(std::vector<double>(5, 1.0)), InsufficientDataError);
}
