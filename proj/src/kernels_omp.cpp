#include "kernels_row.hpp"
#include "wrcp/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wrcp::kernels {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

namespace {
// Below this many rows the fork/join overhead dominates.
constexpr std::ptrdiff_t kMinParallelRows = 64;
} // namespace

void kde_log_density(const Matrix& samples, const Matrix& points, double bandwidth, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    out[static_cast<std::size_t>(r)] =
        detail::kde_log_density_at(samples, points.row(static_cast<std::size_t>(r)), bandwidth);
  }
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, bool relu,
                   Matrix& out) {
  const auto rows = static_cast<std::ptrdiff_t>(in.rows());
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    auto row = static_cast<std::size_t>(r);
    detail::dense_forward_row(in.row(row), weight, bias, relu, out.row(row));
  }
}

void dense_weight_grad(const Matrix& delta, const Matrix& in, std::span<double> d_weight,
                       std::span<double> d_bias) {
  const auto units = static_cast<std::ptrdiff_t>(delta.cols());
#pragma omp parallel for schedule(static) if (delta.rows() >= kMinParallelRows)
  for (std::ptrdiff_t j = 0; j < units; ++j) {
    detail::dense_weight_grad_unit(delta, in, static_cast<std::size_t>(j), d_weight, d_bias);
  }
}

void dense_input_grad(const Matrix& delta, std::span<const double> weight, Matrix& d_in) {
  const auto rows = static_cast<std::ptrdiff_t>(delta.rows());
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    auto row = static_cast<std::size_t>(r);
    detail::dense_input_grad_row(delta.row(row), weight, d_in.row(row));
  }
}

double max_pairwise_ratio(const Matrix& features, std::span<const double> values, double min_dist) {
  const auto rows = static_cast<std::ptrdiff_t>(features.rows());
  double best = -1.0;
  // max is exact, so the reduction order does not matter
#pragma omp parallel for schedule(dynamic, 16) reduction(max : best) if (rows >= kMinParallelRows)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    best = std::max(best, detail::pairwise_ratio_row(features, values, static_cast<std::size_t>(i), min_dist));
  }
  return best;
}

double max_cross_ratio(std::span<const double> a, std::span<const double> g, std::span<const double> b,
                       std::span<const double> h, double min_den) {
  const auto rows = static_cast<std::ptrdiff_t>(a.size());
  double best = -1.0;
#pragma omp parallel for schedule(static) reduction(max : best) if (rows >= kMinParallelRows)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    auto row = static_cast<std::size_t>(i);
    best = std::max(best, detail::cross_ratio_row(a[row], g[row], b, h, min_den));
  }
  return best;
}

} // namespace parallel
} // namespace wrcp::kernels
