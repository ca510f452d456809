// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "wrcp/kernels.hpp"
#include "wrcp/rng.hpp"

using namespace wrcp;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    v = nd(rng);
  }
  return m;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) {
    x = nd(rng);
  }
  return v;
}

template <bool Parallel>
void kde(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix samples = random_matrix(n, 2, 1);
  Matrix points = random_matrix(n, 2, 2);
  std::vector<double> out(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::kde_log_density(samples, points, 0.3, out);
    } else {
      kernels::serial::kde_log_density(samples, points, 0.3, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void dense(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Matrix in = random_matrix(rows, 64, 3);
  auto w = random_vector(64 * 64, 4);
  auto b = random_vector(64, 5);
  Matrix out(rows, 64);
  Matrix d_in(rows, 64);
  std::vector<double> dw(w.size());
  std::vector<double> db(b.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::dense_forward(in, w, b, true, out);
      kernels::parallel::dense_weight_grad(out, in, dw, db);
      kernels::parallel::dense_input_grad(out, w, d_in);
    } else {
      kernels::serial::dense_forward(in, w, b, true, out);
      kernels::serial::dense_weight_grad(out, in, dw, db);
      kernels::serial::dense_input_grad(out, w, d_in);
    }
    benchmark::DoNotOptimize(d_in.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

template <bool Parallel>
void pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix x = random_matrix(n, 2, 6);
  auto v = random_vector(n, 7);
  for (auto _ : state) {
    double r = Parallel ? kernels::parallel::max_pairwise_ratio(x, v, 1e-12)
                        : kernels::serial::max_pairwise_ratio(x, v, 1e-12);
    benchmark::DoNotOptimize(r);
  }
}

} // namespace

BENCHMARK(kde<false>)->Name("kde_log_density/serial")->Arg(300)->Arg(1000);
BENCHMARK(kde<true>)->Name("kde_log_density/parallel")->Arg(300)->Arg(1000);
BENCHMARK(dense<false>)->Name("dense_layer/serial")->Arg(300)->Arg(3000);
BENCHMARK(dense<true>)->Name("dense_layer/parallel")->Arg(300)->Arg(3000);
BENCHMARK(pairwise<false>)->Name("max_pairwise_ratio/serial")->Arg(500);
BENCHMARK(pairwise<true>)->Name("max_pairwise_ratio/parallel")->Arg(500);

BENCHMARK_MAIN();
