#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "wrcp/error.hpp"
#include "wrcp/mlp.hpp"
#include "wrcp/rng.hpp"

using namespace wrcp;

namespace {

MlpModel oracle_net() {
  MlpModel net = MlpModel::zeros({1, 2, 2, 1});
  auto set = [](std::span<double> dst, std::vector<double> v) { std::copy(v.begin(), v.end(), dst.begin()); };
  set(net.weight(0), {1.0, -2.0});
  set(net.bias(0), {0.5, 1.0});
  set(net.weight(1), {1.0, 0.5, -1.0, 2.0});
  set(net.bias(1), {0.0, -0.25});
  set(net.weight(2), {2.0, -1.0});
  set(net.bias(2), {0.1});
  return net;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "wrcp_mlp_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Matrix x(n, d);
  for (double& v : x.data()) {
    v = nd(rng);
  }
  return x;
}

} // namespace

TEST(Mlp, StandardShapeParameterCount) {
  auto net = MlpModel::standard(5, 1);
  EXPECT_EQ(net.parameter_count(), 5u * 64 + 64 + 64u * 64 + 64 + 64 + 1);
  EXPECT_EQ(net.num_layers(), 3u);
  EXPECT_EQ(net.input_dim(), 5u);
}

TEST(Mlp, InitializationDeterministicAndBounded) {
  auto a = MlpModel::standard(3, 42);
  auto b = MlpModel::standard(3, 42);
  auto c = MlpModel::standard(3, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  double limit = std::sqrt(6.0 / (3.0 + 64.0));
  for (double w : a.weight(0)) {
    EXPECT_LE(std::abs(w), limit);
  }
  for (double v : a.bias(1)) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(Mlp, ForwardMatchesHandComputation) {
  auto net = oracle_net();
  std::vector<double> x0{0.3};
  std::vector<double> x1{-1.0};
  std::vector<double> x2{2.0};
  EXPECT_NEAR(net.predict(x0), 2.1, 1e-14);
  EXPECT_NEAR(net.predict(x1), -2.65, 1e-14);
  EXPECT_NEAR(net.predict(x2), 5.1, 1e-14);
  auto batch = net.predict(Matrix(3, 1, std::vector<double>{0.3, -1.0, 2.0}));
  EXPECT_NEAR(batch[0], 2.1, 1e-14);
  EXPECT_NEAR(batch[1], -2.65, 1e-14);
  EXPECT_NEAR(batch[2], 5.1, 1e-14);
}

TEST(Mlp, ForwardRejectsWrongWidth) {
  auto net = MlpModel::standard(2, 0);
  std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_THROW(net.predict(x), DomainError);
  EXPECT_THROW(MlpModel({3}, 0), DomainError);
  EXPECT_THROW(MlpModel({3, 0, 1}, 0), DomainError);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  auto net = MlpModel({3, 8, 8, 1}, 5);
  Matrix x = random_inputs(6, 3, 6);
  std::vector<double> g{0.3, -1.0, 0.7, 0.2, -0.4, 1.1};
  auto objective = [&](const MlpModel& m) {
    auto p = m.predict(x);
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      s += g[j] * p[j];
    }
    return s;
  };
  GradBuffer grad = backward(net, g, x);
  const double h = 1e-6;
  std::size_t good = 0;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    MlpModel plus = net;
    MlpModel minus = net;
    plus.parameters()[i] += h;
    minus.parameters()[i] -= h;
    double fd = (objective(plus) - objective(minus)) / (2.0 * h);
    double an = grad.values()[i];
    if (std::abs(fd - an) <= 1e-6 + 1e-4 * std::abs(fd)) {
      ++good;
    }
  }
  // kinks of the rectifier may spoil a handful of coordinates
  EXPECT_GE(static_cast<double>(good), 0.98 * static_cast<double>(net.parameter_count()));
}

TEST(Mlp, BackwardIsLinearInUpstream) {
  auto net = MlpModel({2, 4, 1}, 3);
  Matrix x = random_inputs(5, 2, 4);
  std::vector<double> g1{1, 0, -1, 2, 0.5};
  std::vector<double> g2{0.2, 0.3, 0.1, -0.7, 1.0};
  std::vector<double> sum(5);
  for (std::size_t i = 0; i < 5; ++i) {
    sum[i] = 2.0 * g1[i] + g2[i];
  }
  auto a = backward(net, g1, x);
  auto b = backward(net, g2, x);
  auto c = backward(net, sum, x);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.values()[i], 2.0 * a.values()[i] + b.values()[i], 1e-12);
  }
}

TEST(Mlp, BackwardRejectsWrongUpstreamLength) {
  auto net = MlpModel({2, 4, 1}, 3);
  Matrix x = random_inputs(5, 2, 4);
  std::vector<double> g{1.0, 2.0};
  EXPECT_THROW(backward(net, g, x), DomainError);
}

TEST(Adam, MatchesReferenceTrajectory) {
  auto net = MlpModel::zeros({1, 1});
  // single bias parameter minimizing (b - 3)^2; the weight sees zero input
  OptimizerState state(net, AdamConfig{0.1});
  const std::vector<double> expected{0.09999999983333335, 0.19989729258521102, 0.29961847654925267};
  for (double want : expected) {
    GradBuffer g(net);
    double b = net.bias(0)[0];
    g.values()[1] = 2.0 * (b - 3.0);
    optimizer_step(net, g, state);
    EXPECT_NEAR(net.bias(0)[0], want, 1e-15);
    EXPECT_EQ(net.weight(0)[0], 0.0);
  }
  EXPECT_EQ(state.step(), 3u);
}

TEST(Adam, RefusesNonFiniteGradient) {
  auto net = MlpModel({2, 3, 1}, 1);
  auto before = net;
  OptimizerState state(net);
  GradBuffer g(net);
  g.values()[4] = NAN;
  EXPECT_THROW(optimizer_step(net, g, state), NumericalError);
  EXPECT_EQ(net, before);
  EXPECT_EQ(state.step(), 0u);
}

TEST(Adam, RejectsBadSettings) {
  auto net = MlpModel({1, 1}, 0);
  EXPECT_THROW(OptimizerState(net, AdamConfig{-1.0}), DomainError);
}

TEST(Mse, LossAndGradient) {
  std::vector<double> p{1.0, 2.0, 4.0};
  std::vector<double> t{1.0, 0.0, 5.0};
  auto r = mse_loss(p, t);
  EXPECT_NEAR(r.loss, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.grad[0], 0.0, 1e-15);
  EXPECT_NEAR(r.grad[1], 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.grad[2], -2.0 / 3.0, 1e-15);
  EXPECT_THROW(mse_loss(std::vector<double>{}, std::vector<double>{}), DomainError);
  EXPECT_THROW(mse_loss(p, std::vector<double>{1.0}), DomainError);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto net = MlpModel::standard(4, 77);
  auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(net, path);
  EXPECT_EQ(load_checkpoint(path), net);
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), "WRCPMLP1");
}

TEST(Checkpoint, RejectsCorruptFiles) {
  auto net = MlpModel::standard(2, 1);
  auto path = temp_path("corrupt.ckpt");
  save_checkpoint(net, path);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);

  save_checkpoint(net, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), std::runtime_error);
}
