#pragma once

// Wasserstein-regularized training.
//
// Objective, summed over sources i:
//   MSE_i(h) + beta * W1(weighted calibration scores under w_i, source-i scores)
// where w_i are calibration likelihood ratios toward source i's features.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wrcp/datagen.hpp"
#include "wrcp/dist.hpp"
#include "wrcp/mlp.hpp"

namespace wrcp {

/// W1 between two empirical distributions with subgradients with respect to
/// each support point, indexed in the distributions' original order.
struct WassersteinGradResult {
  double distance = 0.0;
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};

/// Aligns the two quantile functions segment by segment. Each segment of
/// probability mass m pairs one atom of `a` with one atom of `b` and
/// contributes m * |v_a - v_b|; ties contribute a zero subgradient.
WassersteinGradResult wasserstein1_grad(const EmpiricalDist& a, const EmpiricalDist& b);

EmpiricalDist build_weighted_cal_dist(std::span<const double> cal_scores, std::span<const double> cal_weights);

enum class TrainVariant { erm, wrcp, wrcp_uw };

const char* to_string(TrainVariant v) noexcept;
TrainVariant train_variant_from_string(const std::string& name);

struct TrainConfig {
  double beta = 0.0;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  TrainVariant variant = TrainVariant::wrcp;

  void validate() const;
};

/// Everything the objective needs besides the parameters.
struct TrainingProblem {
  std::vector<SampleSet> sources;
  SampleSet calibration;
  /// Per-source calibration weights; empty disables the regularizer.
  std::vector<std::vector<double>> cal_weights;
  double beta = 0.0;
};

struct ObjectiveValue {
  double total = 0.0;
  double mse_sum = 0.0;
  double wass_sum = 0.0;
  std::vector<double> per_source_wass;
};

/// Objective value and, when `grads` is non-null, its gradient. The
/// regularizer gradient is skipped entirely when beta == 0.
ObjectiveValue evaluate_objective(const MlpModel& model, const TrainingProblem& problem, GradBuffer* grads);

struct EpochMetrics {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double mse_sum = 0.0;
  double wass_sum = 0.0;
  std::vector<double> per_source_wass;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochMetrics> history;
};

/// Per-source calibration weights from KDE likelihood ratios (features
/// standardized with calibration statistics). Computed once per bundle.
std::vector<std::vector<double>> compute_source_weights(const DatasetBundle& bundle, std::uint64_t seed);

/// Trains according to `cfg.variant`; KDE weights are computed once up front
/// for the wrcp variant.
TrainResult wrcp_train(const DatasetBundle& bundle, const TrainConfig& cfg);
/// Same with caller-provided per-source calibration weights.
TrainResult wrcp_train(const DatasetBundle& bundle, const TrainConfig& cfg,
                       std::vector<std::vector<double>> cal_weights);
/// Regularizer against the unweighted calibration scores.
TrainResult wrcp_uw_train(const DatasetBundle& bundle, const TrainConfig& cfg);

} // namespace wrcp
