#pragma once

// Evaluation of conformal methods on bundles and the desk-scale studies built
// on top of it: method comparison, beta sweeps, distance/gap correlation and
// bound validity.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wrcp/datagen.hpp"
#include "wrcp/mlp.hpp"
#include "wrcp/wr_train.hpp"

namespace wrcp {

enum class Method { cp, iwcp, wccp, wrcp, wrcp_uw };

const char* to_string(Method m) noexcept;
Method method_from_string(const std::string& name);
/// Comma-separated method list.
std::vector<Method> parse_methods(const std::string& list);

/// 0.1, 0.2, ..., 0.9
std::vector<double> default_alphas();

struct EvalRow {
  std::size_t trial = 0;
  std::size_t test_set = 0;
  Method method = Method::cp;
  double alpha = 0.0;
  double coverage = 0.0;
  double gap = 0.0;      // |coverage - (1 - alpha)|
  double avg_size = 0.0; // mean interval width
  double tau = 0.0;      // mean threshold over test points
  double cal_gap = 0.0;  // |F_cal(tau) - coverage|, calibration CDF as used by the method
};

struct EvalOptions {
  std::vector<Method> methods;
  std::vector<double> alphas = default_alphas();
  std::uint64_t seed = 0;
  /// Put the test point's own weight at +inf in weighted thresholds.
  bool conservative = false;
};

/// Model used by each method. cp, iwcp and wccp normally share the ERM model.
using MethodModels = std::map<Method, const MlpModel*>;

/// One row per (test set, method, alpha), sorted by (trial, test_set, method, alpha).
std::vector<EvalRow> evaluate_bundle(const DatasetBundle& bundle, const MethodModels& models,
                                     const EvalOptions& options);

struct MethodSummary {
  Method method = Method::cp;
  std::size_t rows = 0;
  double mean_gap = 0.0;
  double mean_size = 0.0;
  double mean_coverage = 0.0;
  std::size_t infinite_tau = 0;
};

std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows);

/// Desk-scale synthetic benchmark.
struct BenchmarkConfig {
  SyntheticKnobs knobs;
  GenSizes sizes;
  std::size_t trials = 10;
  std::uint64_t seed = 2024;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double beta = 0.0; // regularization strength used for the wrcp method
  std::vector<double> alphas = default_alphas();
};

/// Joint covariate and concept shift across three sources.
BenchmarkConfig default_benchmark();

DatasetBundle benchmark_bundle(const BenchmarkConfig& cfg, std::size_t trial);
TrainConfig benchmark_train_config(const BenchmarkConfig& cfg, TrainVariant variant, double beta);
/// Evaluation settings used for one benchmark trial (KDE seed depends on the trial).
EvalOptions benchmark_eval_options(const BenchmarkConfig& cfg, std::size_t trial, std::vector<Method> methods);

/// Trains the models the requested methods need and evaluates them on one trial.
std::vector<EvalRow> run_benchmark_trial(const BenchmarkConfig& cfg, std::size_t trial,
                                         const std::vector<Method>& methods);

struct ParetoPoint {
  double beta = 0.0;
  double mean_gap = 0.0;
  double mean_size = 0.0;
  std::string label; // "IW-CP" for beta = 0, otherwise "WR-CP"
  std::string error; // non-empty when training failed
};

/// Trains one WR-CP model per beta (shared seed) and evaluates it with
/// importance-weighted calibration.
std::vector<ParetoPoint> run_pareto(const DatasetBundle& bundle, const std::vector<double>& betas,
                                    const TrainConfig& base, const EvalOptions& eval);

/// Distances between calibration and test score distributions for one test set.
struct DistanceRow {
  std::size_t test_set = 0;
  double avg_gap = 0.0;
  double wasserstein = 0.0;
  double tv = 0.0;
  double kl = 0.0;
  double expectation = 0.0;
};

struct CorrelationStudy {
  std::vector<DistanceRow> rows;
  /// Spearman coefficient per measure ("W", "TV", "KL", "dE"); nullopt when undefined.
  std::map<std::string, std::optional<double>> spearman;
};

/// Average vanilla-CP gap over `alphas` against each distance measure.
/// Scores are divided by the calibration-score mean before measuring.
CorrelationStudy run_correlation(const DatasetBundle& bundle, const MlpModel& model,
                                 const std::vector<double>& alphas);

struct BoundRow {
  std::size_t test_set = 0;
  double alpha = 0.0;
  double gap = 0.0;          // vanilla CP coverage gap
  double wasserstein = 0.0;  // calibration vs test scores
  double bound = 0.0;        // sqrt(2 L W)
  double iw_gap = 0.0;       // importance-weighted coverage gap on the test set
  double mixture_gap = 0.0;  // |F_weighted_mix(tau) - F_test_mix(tau)|
  double alpha_d = 0.0;      // worst per-source CDF gap at tau
};

struct BoundStudy {
  double L = 0.0;
  std::vector<BoundRow> rows;
};

/// Checks the Wasserstein gap bound (L estimated from calibration scores) and
/// the per-source decomposition of the mixture gap. For the latter, tau is the
/// (1 - alpha) quantile of sum_i w_i (calibration weighted toward source i)
/// with the test set's mixture weights w, and the mixture's own CDF at tau is
/// estimated on `mixture_rows` fresh rows from that mixture.
BoundStudy run_bound_sweep(const DatasetBundle& bundle, const MlpModel& model, const std::vector<double>& alphas,
                           std::uint64_t seed, std::size_t mixture_rows = 10000);

} // namespace wrcp
