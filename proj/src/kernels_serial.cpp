#include "kernels_row.hpp"
#include "wrcp/kernels.hpp"

namespace wrcp::kernels::serial {

void kde_log_density(const Matrix& samples, const Matrix& points, double bandwidth, std::span<double> out) {
  for (std::size_t r = 0; r < points.rows(); ++r) {
    out[r] = detail::kde_log_density_at(samples, points.row(r), bandwidth);
  }
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, bool relu,
                   Matrix& out) {
  for (std::size_t r = 0; r < in.rows(); ++r) {
    detail::dense_forward_row(in.row(r), weight, bias, relu, out.row(r));
  }
}

void dense_weight_grad(const Matrix& delta, const Matrix& in, std::span<double> d_weight,
                       std::span<double> d_bias) {
  for (std::size_t j = 0; j < delta.cols(); ++j) {
    detail::dense_weight_grad_unit(delta, in, j, d_weight, d_bias);
  }
}

void dense_input_grad(const Matrix& delta, std::span<const double> weight, Matrix& d_in) {
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    detail::dense_input_grad_row(delta.row(r), weight, d_in.row(r));
  }
}

double max_pairwise_ratio(const Matrix& features, std::span<const double> values, double min_dist) {
  double best = -1.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    best = std::max(best, detail::pairwise_ratio_row(features, values, i, min_dist));
  }
  return best;
}

double max_cross_ratio(std::span<const double> a, std::span<const double> g, std::span<const double> b,
                       std::span<const double> h, double min_den) {
  double best = -1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    best = std::max(best, detail::cross_ratio_row(a[i], g[i], b, h, min_den));
  }
  return best;
}

} // namespace wrcp::kernels::serial
