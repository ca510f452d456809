#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wrcp/matrix.hpp"

namespace wrcp {

/// Denominator floor used when forming density ratios.
inline constexpr double kRatioDensityFloor = 1e-12;

/// Ascending list of positive bandwidth candidates.
class BandwidthGrid {
public:
  explicit BandwidthGrid(std::vector<double> candidates);

  /// 20 values log-spaced between 10^-2 and 10^0.5.
  static BandwidthGrid default_grid();

  std::span<const double> candidates() const noexcept { return candidates_; }
  std::size_t size() const noexcept { return candidates_.size(); }

private:
  std::vector<double> candidates_;
};

/// Per-dimension standardization fitted on one sample and reused for others.
class FeatureScaler {
public:
  FeatureScaler() = default;

  static FeatureScaler fit(const Matrix& features);

  Matrix transform(const Matrix& features) const;

  std::span<const double> mean() const noexcept { return mean_; }
  std::span<const double> scale() const noexcept { return scale_; }

private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Gaussian kernel density estimate,
///   p(x) = (1/n) sum_i (2 pi b^2)^(-d/2) exp(-||x - x_i||^2 / (2 b^2)).
class KdeModel {
public:
  KdeModel(Matrix samples, double bandwidth);

  std::size_t dim() const noexcept { return samples_.cols(); }
  std::size_t size() const noexcept { return samples_.rows(); }
  double bandwidth() const noexcept { return bandwidth_; }
  const Matrix& samples() const noexcept { return samples_; }

  double density(std::span<const double> x) const;
  double log_density(std::span<const double> x) const;
  /// Log density at every row of `points`.
  std::vector<double> log_density(const Matrix& points) const;

private:
  void check_dim(std::size_t d) const;

  Matrix samples_;
  double bandwidth_;
};

KdeModel kde_fit(Matrix samples, double bandwidth);
double kde_density(const KdeModel& model, std::span<const double> x);

/// Grid candidate with the highest mean held-out log-likelihood under k-fold
/// cross-validation. Fold membership comes from `seed`; ties go to the larger
/// bandwidth.
double select_bandwidth(const Matrix& samples, const BandwidthGrid& grid, std::uint64_t seed = 0,
                        std::size_t folds = 5);

/// Fits a KDE with a cross-validated bandwidth.
KdeModel kde_fit_cv(Matrix samples, const BandwidthGrid& grid = BandwidthGrid::default_grid(),
                    std::uint64_t seed = 0);

/// Normalized importance weights target(x_i) / max(cal(x_i), floor) at each
/// calibration row.
std::vector<double> likelihood_ratio_weights(const Matrix& cal_features, const KdeModel& target_kde,
                                             const KdeModel& cal_kde);

/// Same rule from precomputed log densities (e.g. known analytic densities).
std::vector<double> ratio_weights_from_log_densities(std::span<const double> log_target,
                                                     std::span<const double> log_cal);

/// Importance weights for a fixed calibration sample toward arbitrary target
/// feature samples. Features are standardized with calibration statistics and
/// each KDE gets its own cross-validated bandwidth.
/// Calibration weights together with, for each query point, the share of
/// mass the point itself would receive among calibration rows plus itself.
struct WeightsWithQueryMass {
  std::vector<double> weights;
  std::vector<double> query_mass;
};

class CalibrationWeighter {
public:
  CalibrationWeighter(const Matrix& cal_features, std::uint64_t seed,
                      BandwidthGrid grid = BandwidthGrid::default_grid());

  /// Normalized weights over calibration rows toward the law of `target_features`.
  std::vector<double> weights_for(const Matrix& target_features) const;
  /// Weights toward `target_features` plus the query-point masses used by the
  /// conservative weighted threshold.
  WeightsWithQueryMass weights_with_query_mass(const Matrix& target_features, const Matrix& query) const;

  const FeatureScaler& scaler() const noexcept { return scaler_; }
  const KdeModel& cal_kde() const noexcept { return cal_kde_; }

private:
  FeatureScaler scaler_;
  Matrix cal_std_;
  KdeModel cal_kde_;
  std::vector<double> cal_log_density_;
  BandwidthGrid grid_;
  std::uint64_t seed_;
};

} // namespace wrcp
