#include "wrcp/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "wrcp/error.hpp"
#include "wrcp/kernels.hpp"

namespace wrcp {

BandwidthGrid::BandwidthGrid(std::vector<double> candidates) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) {
    throw DomainError("BandwidthGrid: no candidates");
  }
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (!(candidates_[i] > 0.0) || !std::isfinite(candidates_[i])) {
      throw DomainError("BandwidthGrid: candidates must be positive");
    }
    if (i > 0 && !(candidates_[i] > candidates_[i - 1])) {
      throw DomainError("BandwidthGrid: candidates must be ascending");
    }
  }
}

BandwidthGrid BandwidthGrid::default_grid() {
  constexpr int kCount = 20;
  std::vector<double> c(kCount);
  for (int i = 0; i < kCount; ++i) {
    c[i] = std::pow(10.0, -2.0 + 2.5 * i / (kCount - 1));
  }
  return BandwidthGrid(std::move(c));
}

FeatureScaler FeatureScaler::fit(const Matrix& features) {
  if (features.rows() < 2) {
    throw InsufficientDataError("FeatureScaler: need at least 2 rows");
  }
  FeatureScaler s;
  const std::size_t d = features.cols();
  const auto n = static_cast<double>(features.rows());
  s.mean_.assign(d, 0.0);
  s.scale_.assign(d, 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      s.mean_[c] += features(r, c);
    }
  }
  for (double& m : s.mean_) {
    m /= n;
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double diff = features(r, c) - s.mean_[c];
      s.scale_[c] += diff * diff;
    }
  }
  for (double& v : s.scale_) {
    v = std::sqrt(v / n);
    // constant columns pass through unscaled
    if (!(v > 1e-12)) {
      v = 1.0;
    }
  }
  return s;
}

Matrix FeatureScaler::transform(const Matrix& features) const {
  if (features.cols() != mean_.size()) {
    throw DomainError("FeatureScaler: dimension mismatch");
  }
  Matrix out = features;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = (out(r, c) - mean_[c]) / scale_[c];
    }
  }
  return out;
}

KdeModel::KdeModel(Matrix samples, double bandwidth) : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.rows() < 2) {
    throw InsufficientDataError("kde_fit: need at least 2 samples");
  }
  if (samples_.cols() < 1) {
    throw DomainError("kde_fit: zero-dimensional samples");
  }
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    throw DomainError("kde_fit: bandwidth must be positive");
  }
  for (double v : samples_.data()) {
    if (!std::isfinite(v)) {
      throw DomainError("kde_fit: non-finite sample");
    }
  }
}

void KdeModel::check_dim(std::size_t d) const {
  if (d != dim()) {
    throw DomainError("KdeModel: dimension mismatch");
  }
}

double KdeModel::log_density(std::span<const double> x) const {
  check_dim(x.size());
  Matrix point(1, x.size(), std::vector<double>(x.begin(), x.end()));
  double out = 0.0;
  kernels::serial::kde_log_density(samples_, point, bandwidth_, {&out, 1});
  return out;
}

double KdeModel::density(std::span<const double> x) const { return std::exp(log_density(x)); }

std::vector<double> KdeModel::log_density(const Matrix& points) const {
  check_dim(points.cols());
  std::vector<double> out(points.rows());
  kernels::parallel::kde_log_density(samples_, points, bandwidth_, out);
  return out;
}

KdeModel kde_fit(Matrix samples, double bandwidth) { return KdeModel(std::move(samples), bandwidth); }

double kde_density(const KdeModel& model, std::span<const double> x) { return model.density(x); }

double select_bandwidth(const Matrix& samples, const BandwidthGrid& grid, std::uint64_t seed, std::size_t folds) {
  const std::size_t n = samples.rows();
  if (n < 10) {
    throw InsufficientDataError("select_bandwidth: need at least 10 samples");
  }
  if (folds < 2 || folds > n) {
    throw DomainError("select_bandwidth: invalid fold count");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Matrix> train(folds);
  std::vector<Matrix> held(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> in_idx;
    std::vector<std::size_t> out_idx;
    for (std::size_t p = 0; p < n; ++p) {
      (p % folds == f ? out_idx : in_idx).push_back(perm[p]);
    }
    train[f] = samples.select_rows(in_idx);
    held[f] = samples.select_rows(out_idx);
  }

  double best_score = -std::numeric_limits<double>::infinity();
  double best = -1.0;
  std::vector<double> log_dens;
  for (double b : grid.candidates()) {
    double total = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      log_dens.resize(held[f].rows());
      kernels::parallel::kde_log_density(train[f], held[f], b, log_dens);
      for (double ld : log_dens) {
        total += ld;
      }
    }
    double score = total / static_cast<double>(n);
    if (std::isnan(score)) {
      continue;
    }
    if (score >= best_score && score > -std::numeric_limits<double>::infinity()) {
      best_score = score;
      best = b;
    }
  }
  if (best < 0.0) {
    throw NumericalError("select_bandwidth: every candidate has -inf held-out likelihood");
  }
  return best;
}

KdeModel kde_fit_cv(Matrix samples, const BandwidthGrid& grid, std::uint64_t seed) {
  double b = select_bandwidth(samples, grid, seed);
  return KdeModel(std::move(samples), b);
}

std::vector<double> ratio_weights_from_log_densities(std::span<const double> log_target,
                                                     std::span<const double> log_cal) {
  if (log_target.size() != log_cal.size() || log_target.empty()) {
    throw DomainError("likelihood_ratio_weights: length mismatch");
  }
  const double log_floor = std::log(kRatioDensityFloor);
  std::vector<double> log_ratio(log_target.size());
  double max_lr = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_ratio.size(); ++i) {
    if (std::isnan(log_target[i]) || std::isnan(log_cal[i]) || log_target[i] == std::numeric_limits<double>::infinity()) {
      throw DomainError("likelihood_ratio_weights: invalid log density");
    }
    log_ratio[i] = log_target[i] - std::max(log_cal[i], log_floor);
    max_lr = std::max(max_lr, log_ratio[i]);
  }
  if (max_lr == -std::numeric_limits<double>::infinity()) {
    throw DegenerateInputError("likelihood_ratio_weights: every raw ratio is zero");
  }
  std::vector<double> w(log_ratio.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_ratio[i] - max_lr);
    total += w[i];
  }
  for (double& wi : w) {
    wi /= total;
  }
  return w;
}

std::vector<double> likelihood_ratio_weights(const Matrix& cal_features, const KdeModel& target_kde,
                                             const KdeModel& cal_kde) {
  if (target_kde.dim() != cal_features.cols() || cal_kde.dim() != cal_features.cols()) {
    throw DomainError("likelihood_ratio_weights: dimension mismatch");
  }
  auto lt = target_kde.log_density(cal_features);
  auto lc = cal_kde.log_density(cal_features);
  return ratio_weights_from_log_densities(lt, lc);
}

CalibrationWeighter::CalibrationWeighter(const Matrix& cal_features, std::uint64_t seed, BandwidthGrid grid)
    : scaler_(FeatureScaler::fit(cal_features)),
      cal_std_(scaler_.transform(cal_features)),
      cal_kde_(kde_fit_cv(cal_std_, grid, seed)),
      cal_log_density_(cal_kde_.log_density(cal_std_)),
      grid_(std::move(grid)),
      seed_(seed) {}

std::vector<double> CalibrationWeighter::weights_for(const Matrix& target_features) const {
  KdeModel target = kde_fit_cv(scaler_.transform(target_features), grid_, seed_);
  return ratio_weights_from_log_densities(target.log_density(cal_std_), cal_log_density_);
}

WeightsWithQueryMass CalibrationWeighter::weights_with_query_mass(const Matrix& target_features,
                                                                  const Matrix& query) const {
  KdeModel target = kde_fit_cv(scaler_.transform(target_features), grid_, seed_);
  WeightsWithQueryMass out;
  out.weights = ratio_weights_from_log_densities(target.log_density(cal_std_), cal_log_density_);

  const double log_floor = std::log(kRatioDensityFloor);
  auto lt_cal = target.log_density(cal_std_);
  std::vector<double> log_ratio_cal(lt_cal.size());
  for (std::size_t i = 0; i < lt_cal.size(); ++i) {
    log_ratio_cal[i] = lt_cal[i] - std::max(cal_log_density_[i], log_floor);
  }
  Matrix query_std = scaler_.transform(query);
  auto lt_q = target.log_density(query_std);
  auto lc_q = cal_kde_.log_density(query_std);
  out.query_mass.resize(query.rows());
  for (std::size_t j = 0; j < query.rows(); ++j) {
    double lq = lt_q[j] - std::max(lc_q[j], log_floor);
    double shift = lq;
    for (double lr : log_ratio_cal) {
      shift = std::max(shift, lr);
    }
    if (shift == -std::numeric_limits<double>::infinity()) {
      throw DegenerateInputError("weights_with_query_mass: every raw ratio is zero");
    }
    double total = std::exp(lq - shift);
    for (double lr : log_ratio_cal) {
      total += std::exp(lr - shift);
    }
    out.query_mass[j] = std::exp(lq - shift) / total;
  }
  return out;
}

} // namespace wrcp
