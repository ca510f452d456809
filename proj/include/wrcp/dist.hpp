#pragma once

// One-dimensional distributions and distances between them.
//
// Everything here operates on score distributions on the real line, where the
// Wasserstein-1 distance reduces to the area between the two CDFs.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace wrcp {

/// Weighted point-mass distribution on the real line.
///
/// Weights are normalized on construction. The original insertion order is
/// preserved alongside a sorted view; `order()[k]` is the original index of
/// the k-th smallest value (stable for ties).
class EmpiricalDist {
public:
  EmpiricalDist(std::vector<double> values, std::vector<double> weights);

  static EmpiricalDist uniform(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> weights() const noexcept { return weights_; }

  std::span<const double> sorted_values() const noexcept { return sorted_values_; }
  std::span<const double> sorted_weights() const noexcept { return sorted_weights_; }
  /// Cumulative weight up to and including sorted position k.
  std::span<const double> cumulative() const noexcept { return cumulative_; }
  std::span<const std::size_t> order() const noexcept { return order_; }

  double min() const noexcept { return sorted_values_.front(); }
  double max() const noexcept { return sorted_values_.back(); }
  double mean() const noexcept;

  /// Right-continuous CDF.
  double cdf(double v) const noexcept;
  /// Left limit of the CDF, P(X < v).
  double cdf_left(double v) const noexcept;

private:
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<double> sorted_values_;
  std::vector<double> sorted_weights_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> order_;
};

/// Density that is constant between consecutive breakpoints and zero outside.
class PiecewiseUniformDist {
public:
  PiecewiseUniformDist(std::vector<double> breakpoints, std::vector<double> densities);

  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const double> densities() const noexcept { return densities_; }

  double min() const noexcept { return breakpoints_.front(); }
  double max() const noexcept { return breakpoints_.back(); }

  double density(double v) const noexcept;
  double max_density() const noexcept;
  double cdf(double v) const noexcept;
  double cdf_left(double v) const noexcept { return cdf(v); }
  /// Inverse CDF for p in [0, 1].
  double quantile(double p) const;

private:
  std::vector<double> breakpoints_;
  std::vector<double> densities_;
  std::vector<double> cumulative_; // CDF at each breakpoint
};

/// Two probability vectors over the same bins.
class HistogramPair {
public:
  HistogramPair(std::vector<double> edges, std::vector<double> mass_a, std::vector<double> mass_b);

  /// Pairs two independently built histograms; their edges must agree exactly.
  static HistogramPair make(std::span<const double> edges_a, std::vector<double> mass_a,
                            std::span<const double> edges_b, std::vector<double> mass_b);

  /// Equal-width histogram over the merged sample range with
  /// ceil(sqrt(min(n, m))) bins. Sample weights are respected.
  static HistogramPair from_samples(const EmpiricalDist& a, const EmpiricalDist& b);

  std::span<const double> edges() const noexcept { return edges_; }
  std::span<const double> mass_a() const noexcept { return mass_a_; }
  std::span<const double> mass_b() const noexcept { return mass_b_; }
  std::size_t bins() const noexcept { return mass_a_.size(); }

private:
  std::vector<double> edges_;
  std::vector<double> mass_a_;
  std::vector<double> mass_b_;
};

inline constexpr double kKlSmoothing = 1e-10;
inline constexpr std::size_t kBruteForceOtMaxSize = 8;

double cdf_at(const EmpiricalDist& dist, double v) noexcept;
double cdf_at(const PiecewiseUniformDist& dist, double v) noexcept;

/// Generalized inverse inf{v : F(v) >= p}, 0 < p <= 1.
double quantile(const EmpiricalDist& dist, double p);

/// W1 as the exact area between the two CDFs.
double wasserstein1(const EmpiricalDist& a, const EmpiricalDist& b);
double wasserstein1(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b);
double wasserstein1(const EmpiricalDist& a, const PiecewiseUniformDist& b);
double wasserstein1(const PiecewiseUniformDist& a, const EmpiricalDist& b);

/// sup |F_a - F_b|, including left limits at atoms.
double kolmogorov(const EmpiricalDist& a, const EmpiricalDist& b);
double kolmogorov(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b);
double kolmogorov(const EmpiricalDist& a, const PiecewiseUniformDist& b);
double kolmogorov(const PiecewiseUniformDist& a, const EmpiricalDist& b);

double tv_distance(const HistogramPair& h) noexcept;
double tv_distance(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b);

/// Discrete KL(a || b) after additive smoothing of both mass vectors.
double kl_divergence(const HistogramPair& h);

double expectation_difference(const EmpiricalDist& a, const EmpiricalDist& b) noexcept;

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Minimum-cost assignment between two equal-size uniform supports by
/// enumerating all permutations. Test oracle only; n <= 8.
double brute_force_ot(const EmpiricalDist& a, const EmpiricalDist& b);

EmpiricalDist mixture(std::span<const EmpiricalDist> components, std::span<const double> weights);

/// Distribution of f(X) for X ~ dist.
EmpiricalDist pushforward(const EmpiricalDist& dist, const std::function<double(double)>& f);

/// Divides every support point by `scale` (> 0). Used to put score
/// distributions from different datasets on a comparable footing.
EmpiricalDist rescale(const EmpiricalDist& dist, double scale);

} // namespace wrcp
