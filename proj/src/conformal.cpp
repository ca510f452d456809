#include "wrcp/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "wrcp/density.hpp"
#include "wrcp/error.hpp"
#include "wrcp/kernels.hpp"

namespace wrcp {

namespace {

constexpr double kCumTol = 1e-12;
constexpr double kPairTol = 1e-12;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha must lie in (0, 1)");
  }
}

bool uniform_weights(const EmpiricalDist& d) {
  const double expected = 1.0 / static_cast<double>(d.size());
  return std::all_of(d.weights().begin(), d.weights().end(),
                     [expected](double w) { return std::abs(w - expected) <= 1e-12; });
}

// Rank ceil((1 - alpha)(n + 1)), guarded against products such as 0.9 * 10
// landing a hair above an integer.
std::size_t split_rank(std::size_t n, double alpha) {
  double r = (1.0 - alpha) * static_cast<double>(n + 1);
  return static_cast<std::size_t>(std::ceil(r - 1e-9));
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be finite and non-negative");
  }
}

} // namespace

const char* to_string(CpMethod method) noexcept {
  switch (method) {
  case CpMethod::vanilla: return "vanilla";
  case CpMethod::importance_weighted: return "importance_weighted";
  case CpMethod::worst_case: return "worst_case";
  }
  return "vanilla";
}

bool PredictionInterval::contains(double y) const noexcept {
  if (tau == kInfiniteTau) {
    return true;
  }
  return std::abs(center - y) <= tau;
}

void BoundInputs::validate() const {
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw DomainError("L must be positive");
  }
  require_nonnegative(kappa, "kappa");
  require_nonnegative(eta, "eta");
  require_nonnegative(W_X, "W_X");
  require_nonnegative(W_Y, "W_Y");
  require_nonnegative(W_hat, "W_hat");
  if (n < 1) {
    throw DomainError("n must be positive");
  }
  if (m < 1) {
    throw DomainError("m must be positive");
  }
  if (!std::isfinite(lambda_P)) {
    throw DomainError("lambda_P must be finite");
  }
  if (!std::isfinite(lambda_Q)) {
    throw DomainError("lambda_Q must be finite");
  }
  if (!(sigma_P > 2.0) || !std::isfinite(sigma_P)) {
    throw DomainError("sigma_P must exceed 2");
  }
  if (!(sigma_Q > 2.0) || !std::isfinite(sigma_Q)) {
    throw DomainError("sigma_Q must exceed 2");
  }
  require_nonnegative(t_P, "t_P");
  require_nonnegative(t_Q, "t_Q");
}

std::vector<double> absolute_residuals(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw DomainError("absolute_residuals: length mismatch");
  }
  std::vector<double> out(predictions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(predictions[i] - targets[i]);
  }
  return out;
}

EmpiricalDist conformal_scores(const MlpModel& model, const SampleSet& data) {
  auto preds = model.predict(data.x);
  return EmpiricalDist::uniform(absolute_residuals(preds, data.y));
}

double split_cp_threshold(const EmpiricalDist& scores, double alpha) {
  check_alpha(alpha);
  if (!uniform_weights(scores)) {
    throw DomainError("split_cp_threshold: scores must carry uniform weights");
  }
  std::size_t rank = split_rank(scores.size(), alpha);
  if (rank > scores.size()) {
    return kInfiniteTau;
  }
  return scores.sorted_values()[std::max<std::size_t>(rank, 1) - 1];
}

double split_cp_threshold(std::span<const double> scores, double alpha) {
  if (scores.empty()) {
    throw DomainError("split_cp_threshold: empty scores");
  }
  return split_cp_threshold(EmpiricalDist::uniform({scores.begin(), scores.end()}), alpha);
}

double weighted_threshold(const EmpiricalDist& scores, double alpha, double infinity_mass) {
  check_alpha(alpha);
  if (!(infinity_mass >= 0.0 && infinity_mass < 1.0)) {
    throw DomainError("weighted_threshold: infinity_mass must lie in [0, 1)");
  }
  const double target = 1.0 - alpha;
  const double scale = 1.0 - infinity_mass;
  auto cum = scores.cumulative();
  for (std::size_t k = 0; k < cum.size(); ++k) {
    if (scale * cum[k] >= target - kCumTol) {
      return scores.sorted_values()[k];
    }
  }
  return infinity_mass > 0.0 ? kInfiniteTau : scores.max();
}

double worst_case_threshold(std::span<const EmpiricalDist> per_source_scores, double alpha) {
  if (per_source_scores.empty()) {
    throw DomainError("worst_case_threshold: no sources");
  }
  double tau = 0.0;
  for (const auto& s : per_source_scores) {
    tau = std::max(tau, split_cp_threshold(s, alpha));
  }
  return tau;
}

CalibrationResult calibrate_vanilla(EmpiricalDist scores, double alpha) {
  double tau = split_cp_threshold(scores, alpha);
  return {std::move(scores), alpha, tau, CpMethod::vanilla};
}

CalibrationResult calibrate_weighted(EmpiricalDist scores, double alpha) {
  double tau = weighted_threshold(scores, alpha);
  return {std::move(scores), alpha, tau, CpMethod::importance_weighted};
}

PredictionInterval prediction_set(double center, double tau) {
  if (!(tau >= 0.0)) {
    throw DomainError("prediction_set: tau must be non-negative");
  }
  return {center, tau};
}

double coverage(std::span<const PredictionInterval> intervals, std::span<const double> targets) {
  if (intervals.size() != targets.size() || intervals.empty()) {
    throw DomainError("coverage: need one target per interval");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    hits += intervals[i].contains(targets[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

double avg_set_size(std::span<const PredictionInterval> intervals) {
  if (intervals.empty()) {
    throw DomainError("avg_set_size: no intervals");
  }
  double total = 0.0;
  for (const auto& iv : intervals) {
    total += iv.size();
  }
  return total / static_cast<double>(intervals.size());
}

double coverage_from_scores(std::span<const double> test_scores, double tau) {
  if (test_scores.empty()) {
    throw DomainError("coverage_from_scores: no test scores");
  }
  std::size_t hits = 0;
  for (double s : test_scores) {
    hits += (tau == kInfiniteTau || s <= tau) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(test_scores.size());
}

double coverage_gap(double empirical_coverage, double alpha) {
  if (!(empirical_coverage >= 0.0 && empirical_coverage <= 1.0) || !(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("coverage_gap: inputs must lie in [0, 1]");
  }
  return std::abs(empirical_coverage - (1.0 - alpha));
}

double gap_bound_wasserstein(double L, double W) {
  if (!(L > 0.0)) {
    throw DomainError("gap_bound_wasserstein: L must be positive");
  }
  require_nonnegative(W, "W");
  return std::sqrt(2.0 * L * W);
}

double gap_bound_shift(double L, double kappa, double eta, double W_X, double W_Y) {
  if (!(L > 0.0)) {
    throw DomainError("gap_bound_shift: L must be positive");
  }
  require_nonnegative(kappa, "kappa");
  require_nonnegative(eta, "eta");
  require_nonnegative(W_X, "W_X");
  require_nonnegative(W_Y, "W_Y");
  return std::sqrt(2.0 * L * (kappa * W_X + eta * W_Y));
}

EmpiricalBound empirical_gap_bound(const BoundInputs& b) {
  b.validate();
  const auto n = static_cast<double>(b.n);
  const auto m = static_cast<double>(b.m);
  double inner = b.W_hat + b.lambda_P * std::pow(n, -1.0 / b.sigma_P) + b.lambda_Q * std::pow(m, -1.0 / b.sigma_Q) +
                 b.t_P + b.t_Q;
  double bound = std::sqrt(2.0 * b.L * std::max(inner, 0.0));
  double confidence = (1.0 - std::exp(-2.0 * n * b.t_P * b.t_P)) * (1.0 - std::exp(-2.0 * m * b.t_Q * b.t_Q));
  return {bound, confidence};
}

double estimate_kappa(const Matrix& features, std::span<const double> score_values) {
  if (features.rows() < 2) {
    throw InsufficientDataError("estimate_kappa: need at least 2 rows");
  }
  if (score_values.size() != features.rows()) {
    throw DomainError("estimate_kappa: one score per row required");
  }
  double kappa = kernels::parallel::max_pairwise_ratio(features, score_values, kPairTol);
  if (kappa < 0.0) {
    throw DegenerateInputError("estimate_kappa: all feature rows are identical");
  }
  return kappa;
}

double estimate_eta(std::span<const double> s_p, std::span<const double> f_p, std::span<const double> s_q,
                    std::span<const double> f_q) {
  if (s_p.size() != f_p.size() || s_q.size() != f_q.size()) {
    throw DomainError("estimate_eta: score and truth vectors differ in length");
  }
  double eta = kernels::parallel::max_cross_ratio(s_p, f_p, s_q, f_q, kPairTol);
  if (eta < 0.0) {
    throw DegenerateInputError("estimate_eta: no pair with distinct ground-truth values");
  }
  return eta;
}

double alpha_D(std::span<const EmpiricalDist> per_source_weighted_cal,
               std::span<const EmpiricalDist> per_source_scores, double tau) {
  if (per_source_weighted_cal.size() != per_source_scores.size() || per_source_scores.empty()) {
    throw DomainError("alpha_D: need matching non-empty source lists");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < per_source_scores.size(); ++i) {
    worst = std::max(worst, std::abs(per_source_weighted_cal[i].cdf(tau) - per_source_scores[i].cdf(tau)));
  }
  return worst;
}

double estimate_density_bound(std::span<const double> scores, std::uint64_t seed) {
  if (scores.size() < 10) {
    throw InsufficientDataError("estimate_density_bound: need at least 10 scores");
  }
  Matrix samples(scores.size(), 1, std::vector<double>(scores.begin(), scores.end()));
  KdeModel kde = kde_fit_cv(samples, BandwidthGrid::default_grid(), seed);
  // peak over the samples and a fine grid spanning them
  auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  constexpr std::size_t kGrid = 512;
  Matrix grid(kGrid, 1);
  for (std::size_t i = 0; i < kGrid; ++i) {
    grid(i, 0) = *lo_it + (*hi_it - *lo_it) * static_cast<double>(i) / static_cast<double>(kGrid - 1);
  }
  double peak = 0.0;
  for (double ld : kde.log_density(samples)) {
    peak = std::max(peak, std::exp(ld));
  }
  for (double ld : kde.log_density(grid)) {
    peak = std::max(peak, std::exp(ld));
  }
  return peak;
}

} // namespace wrcp
