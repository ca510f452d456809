#pragma once

// Per-output bodies shared by the serial and OpenMP kernels. Keeping a single
// definition of each inner loop is what makes the two paths bit-identical.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "wrcp/matrix.hpp"

namespace wrcp::kernels::detail {

inline double kde_log_density_at(const Matrix& samples, std::span<const double> x, double bandwidth) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  const double inv_two_b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  // log-sum-exp over kernel exponents
  double max_e = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = samples.row(i);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double diff = x[c] - xi[c];
      sq += diff * diff;
    }
    max_e = std::max(max_e, -sq * inv_two_b2);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = samples.row(i);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double diff = x[c] - xi[c];
      sq += diff * diff;
    }
    acc += std::exp(-sq * inv_two_b2 - max_e);
  }
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);
  return max_e + std::log(acc / static_cast<double>(n)) + log_norm;
}

inline void dense_forward_row(std::span<const double> in, std::span<const double> weight,
                              std::span<const double> bias, bool relu, std::span<double> out) {
  const std::size_t in_dim = in.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double* w = weight.data() + j * in_dim;
    double z = bias[j];
    for (std::size_t k = 0; k < in_dim; ++k) {
      z += w[k] * in[k];
    }
    out[j] = relu ? std::max(z, 0.0) : z;
  }
}

// Row j of d_weight and entry j of d_bias.
inline void dense_weight_grad_unit(const Matrix& delta, const Matrix& in, std::size_t j,
                                   std::span<double> d_weight, std::span<double> d_bias) {
  const std::size_t in_dim = in.cols();
  double* dw = d_weight.data() + j * in_dim;
  double db = 0.0;
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    const double g = delta(r, j);
    if (g == 0.0) {
      continue;
    }
    auto x = in.row(r);
    for (std::size_t k = 0; k < in_dim; ++k) {
      dw[k] += g * x[k];
    }
    db += g;
  }
  d_bias[j] += db;
}

inline void dense_input_grad_row(std::span<const double> delta_row, std::span<const double> weight,
                                 std::span<double> d_in_row) {
  const std::size_t in_dim = d_in_row.size();
  std::fill(d_in_row.begin(), d_in_row.end(), 0.0);
  for (std::size_t j = 0; j < delta_row.size(); ++j) {
    const double g = delta_row[j];
    if (g == 0.0) {
      continue;
    }
    const double* w = weight.data() + j * in_dim;
    for (std::size_t k = 0; k < in_dim; ++k) {
      d_in_row[k] += g * w[k];
    }
  }
}

inline double pairwise_ratio_row(const Matrix& features, std::span<const double> values, std::size_t i,
                                 double min_dist) {
  double best = -1.0;
  auto xi = features.row(i);
  for (std::size_t j = i + 1; j < features.rows(); ++j) {
    auto xj = features.row(j);
    double sq = 0.0;
    for (std::size_t c = 0; c < xi.size(); ++c) {
      double diff = xi[c] - xj[c];
      sq += diff * diff;
    }
    double dist = std::sqrt(sq);
    if (dist > min_dist) {
      best = std::max(best, std::abs(values[i] - values[j]) / dist);
    }
  }
  return best;
}

inline double cross_ratio_row(double a_i, double g_i, std::span<const double> b, std::span<const double> h,
                              double min_den) {
  double best = -1.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    double den = std::abs(g_i - h[j]);
    if (den > min_den) {
      best = std::max(best, std::abs(a_i - b[j]) / den);
    }
  }
  return best;
}

} // namespace wrcp::kernels::detail
