#pragma once

// Data-parallel inner loops.
//
// Each kernel has a serial reference in `kernels::serial` and an OpenMP
// version in `kernels::parallel`. The parallel versions split work over
// independent outputs only and keep the serial per-output summation order, so
// the two produce bit-identical results for any thread count.

#include <cstddef>
#include <span>

#include "wrcp/matrix.hpp"

namespace wrcp::kernels {

namespace serial {

/// Log of the Gaussian KDE density (1/n) sum_i K(x - x_i, b) at every row of `points`.
void kde_log_density(const Matrix& samples, const Matrix& points, double bandwidth, std::span<double> out);

/// out = in * W^T + b, optionally rectified. W is out_dim x in_dim, row-major.
void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, bool relu,
                   Matrix& out);

/// d_weight += delta^T * in, d_bias += column sums of delta.
void dense_weight_grad(const Matrix& delta, const Matrix& in, std::span<double> d_weight,
                       std::span<double> d_bias);

/// d_in = delta * W.
void dense_input_grad(const Matrix& delta, std::span<const double> weight, Matrix& d_in);

/// max over pairs with ||x_i - x_j|| > min_dist of |v_i - v_j| / ||x_i - x_j||; -1 if no pair qualifies.
double max_pairwise_ratio(const Matrix& features, std::span<const double> values, double min_dist);

/// max over (i, j) with |g_i - h_j| > min_den of |a_i - b_j| / |g_i - h_j|; -1 if no pair qualifies.
double max_cross_ratio(std::span<const double> a, std::span<const double> g, std::span<const double> b,
                       std::span<const double> h, double min_den);

} // namespace serial

namespace parallel {

void kde_log_density(const Matrix& samples, const Matrix& points, double bandwidth, std::span<double> out);
void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, bool relu,
                   Matrix& out);
void dense_weight_grad(const Matrix& delta, const Matrix& in, std::span<double> d_weight,
                       std::span<double> d_bias);
void dense_input_grad(const Matrix& delta, std::span<const double> weight, Matrix& d_in);
double max_pairwise_ratio(const Matrix& features, std::span<const double> values, double min_dist);
double max_cross_ratio(std::span<const double> a, std::span<const double> g, std::span<const double> b,
                       std::span<const double> h, double min_den);

} // namespace parallel

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads() noexcept;

} // namespace wrcp::kernels
