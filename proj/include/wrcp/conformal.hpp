#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wrcp/datagen.hpp"
#include "wrcp/dist.hpp"
#include "wrcp/mlp.hpp"

namespace wrcp {

/// Threshold returned when the finite-sample rank exceeds the sample size.
inline constexpr double kInfiniteTau = std::numeric_limits<double>::infinity();

enum class CpMethod { vanilla, importance_weighted, worst_case };

const char* to_string(CpMethod method) noexcept;

struct CalibrationResult {
  EmpiricalDist scores;
  double alpha;
  double tau; // a support point of `scores`, or kInfiniteTau
  CpMethod method;
};

/// Symmetric interval [center - tau, center + tau].
struct PredictionInterval {
  double center;
  double tau;

  double lower() const noexcept { return center - tau; }
  double upper() const noexcept { return center + tau; }
  double size() const noexcept { return 2.0 * tau; }
  bool contains(double y) const noexcept;
};

/// Constants of the coverage-gap bounds. sigma values live in (2, inf).
struct BoundInputs {
  double L = 1.0;
  double kappa = 0.0;
  double eta = 0.0;
  double W_X = 0.0;
  double W_Y = 0.0;
  double W_hat = 0.0;
  std::uint64_t n = 1;
  std::uint64_t m = 1;
  double lambda_P = 0.0;
  double lambda_Q = 0.0;
  double sigma_P = 3.0;
  double sigma_Q = 3.0;
  double t_P = 0.0;
  double t_Q = 0.0;

  /// Throws DomainError naming the first offending field.
  void validate() const;
};

struct EmpiricalBound {
  double bound;
  double confidence;
};

/// |h(x_i) - y_i| for every row.
std::vector<double> absolute_residuals(std::span<const double> predictions, std::span<const double> targets);
EmpiricalDist conformal_scores(const MlpModel& model, const SampleSet& data);

/// The ceil((1 - alpha)(n + 1))-th smallest score, or kInfiniteTau.
double split_cp_threshold(const EmpiricalDist& scores, double alpha);
double split_cp_threshold(std::span<const double> scores, double alpha);

/// inf{v : sum_{v_i <= v} w_i >= 1 - alpha}. With `infinity_mass` > 0 the
/// existing weights are scaled by (1 - infinity_mass) and the remainder sits
/// at +inf, the conservative rule for weighted exchangeability.
double weighted_threshold(const EmpiricalDist& scores, double alpha, double infinity_mass = 0.0);

/// Largest per-source split threshold; covers every mixture of the sources.
double worst_case_threshold(std::span<const EmpiricalDist> per_source_scores, double alpha);

CalibrationResult calibrate_vanilla(EmpiricalDist scores, double alpha);
CalibrationResult calibrate_weighted(EmpiricalDist scores, double alpha);

PredictionInterval prediction_set(double center, double tau);
double coverage(std::span<const PredictionInterval> intervals, std::span<const double> targets);
double avg_set_size(std::span<const PredictionInterval> intervals);
/// Fraction of test scores <= tau; same as `coverage` on the induced intervals.
double coverage_from_scores(std::span<const double> test_scores, double tau);

double coverage_gap(double empirical_coverage, double alpha);

/// sqrt(2 L W).
double gap_bound_wasserstein(double L, double W);
/// sqrt(2 L (kappa W_X + eta W_Y)).
double gap_bound_shift(double L, double kappa, double eta, double W_X, double W_Y);
EmpiricalBound empirical_gap_bound(const BoundInputs& b);

/// Empirical Lipschitz constant of the score over all feature pairs; a lower
/// bound on the true constant.
double estimate_kappa(const Matrix& features, std::span<const double> score_values);

/// max |s_P(x1) - s_Q(x2)| / |f_P(x1) - f_Q(x2)| over admissible pairs.
double estimate_eta(std::span<const double> s_p, std::span<const double> f_p, std::span<const double> s_q,
                    std::span<const double> f_q);

/// Worst per-source CDF gap at tau between the weighted calibration score
/// distribution and the source's own score distribution.
double alpha_D(std::span<const EmpiricalDist> per_source_weighted_cal,
               std::span<const EmpiricalDist> per_source_scores, double tau);

/// Estimate of the density bound L: the peak of a cross-validated 1D KDE of
/// the scores.
double estimate_density_bound(std::span<const double> scores, std::uint64_t seed = 0);

} // namespace wrcp
