#include <random>

#include <gtest/gtest.h>
#include <omp.h>

#include "wrcp/kernels.hpp"
#include "wrcp/rng.hpp"

using namespace wrcp;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    v = nd(rng);
  }
  return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) {
    x = nd(rng);
  }
  return v;
}

class KernelEquivalence : public ::testing::TestWithParam<int> {
protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }

private:
  int saved_ = 1;
};

} // namespace

TEST_P(KernelEquivalence, KdeLogDensity) {
  Rng rng(1);
  Matrix samples = random_matrix(300, 3, rng);
  Matrix points = random_matrix(257, 3, rng);
  std::vector<double> a(points.rows());
  std::vector<double> b(points.rows());
  kernels::serial::kde_log_density(samples, points, 0.4, a);
  kernels::parallel::kde_log_density(samples, points, 0.4, b);
  EXPECT_EQ(a, b);
}

TEST_P(KernelEquivalence, DenseLayers) {
  Rng rng(2);
  Matrix in = random_matrix(200, 17, rng);
  auto w = random_vector(9 * 17, rng);
  auto bias = random_vector(9, rng);
  Matrix out_s(200, 9);
  Matrix out_p(200, 9);
  kernels::serial::dense_forward(in, w, bias, true, out_s);
  kernels::parallel::dense_forward(in, w, bias, true, out_p);
  EXPECT_EQ(out_s, out_p);

  Matrix delta = random_matrix(200, 9, rng);
  std::vector<double> dw_s(w.size(), 0.5);
  std::vector<double> dw_p(w.size(), 0.5);
  std::vector<double> db_s(9, 0.0);
  std::vector<double> db_p(9, 0.0);
  kernels::serial::dense_weight_grad(delta, in, dw_s, db_s);
  kernels::parallel::dense_weight_grad(delta, in, dw_p, db_p);
  EXPECT_EQ(dw_s, dw_p);
  EXPECT_EQ(db_s, db_p);

  Matrix din_s(200, 17);
  Matrix din_p(200, 17);
  kernels::serial::dense_input_grad(delta, w, din_s);
  kernels::parallel::dense_input_grad(delta, w, din_p);
  EXPECT_EQ(din_s, din_p);
}

TEST_P(KernelEquivalence, PairwiseRatios) {
  Rng rng(3);
  Matrix x = random_matrix(150, 2, rng);
  auto v = random_vector(150, rng);
  EXPECT_EQ(kernels::serial::max_pairwise_ratio(x, v, 1e-12), kernels::parallel::max_pairwise_ratio(x, v, 1e-12));
  auto a = random_vector(120, rng);
  auto g = random_vector(120, rng);
  auto b = random_vector(90, rng);
  auto h = random_vector(90, rng);
  EXPECT_EQ(kernels::serial::max_cross_ratio(a, g, b, h, 1e-12),
            kernels::parallel::max_cross_ratio(a, g, b, h, 1e-12));
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelEquivalence, ::testing::Values(1, 2, 4));

TEST(Kernels, DenseForwardHandValues) {
  Matrix in(1, 2, std::vector<double>{1.0, -2.0});
  std::vector<double> w{1.0, 1.0, 2.0, 0.5};
  std::vector<double> b{0.0, -1.5};
  Matrix out(1, 2);
  kernels::serial::dense_forward(in, w, b, false, out);
  EXPECT_DOUBLE_EQ(out(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), -0.5);
  kernels::serial::dense_forward(in, w, b, true, out);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
}

TEST(Kernels, RatioWithoutQualifyingPair) {
  Matrix x(3, 1, std::vector<double>{1.0, 1.0, 1.0});
  std::vector<double> v{0.0, 1.0, 2.0};
  EXPECT_EQ(kernels::serial::max_pairwise_ratio(x, v, 1e-12), -1.0);
}
