#include "wrcp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <tuple>

#include "wrcp/conformal.hpp"
#include "wrcp/density.hpp"
#include "wrcp/dist.hpp"
#include "wrcp/error.hpp"
#include "wrcp/rng.hpp"

namespace wrcp {

namespace {

constexpr std::uint64_t kTagEvalKde = 0x4556;
constexpr std::uint64_t kTagTrial = 0x5452;
constexpr std::uint64_t kTagTrain = 0x544e;
constexpr std::uint64_t kTagBoundKde = 0x424b;

bool weighted(Method m) noexcept { return m == Method::iwcp || m == Method::wrcp; }

std::vector<double> scores_of(const MlpModel& model, const SampleSet& data) {
  return absolute_residuals(model.predict(data.x), data.y);
}

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) {
    throw DomainError("alpha list is empty");
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw DomainError("alpha values must lie in (0, 1)");
    }
  }
}

/// Scores of one model on everything evaluation touches.
struct ModelScores {
  std::vector<double> cal;
  std::vector<EmpiricalDist> per_source_cal;
  std::vector<std::vector<double>> tests;
};

ModelScores score_model(const MlpModel& model, const DatasetBundle& bundle) {
  if (model.input_dim() != bundle.dim()) {
    throw DomainError("checkpoint input dimension " + std::to_string(model.input_dim()) +
                      " does not match bundle dimension " + std::to_string(bundle.dim()));
  }
  ModelScores s;
  s.cal = scores_of(model, bundle.calibration);
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    std::vector<double> part;
    for (std::size_t r = 0; r < bundle.calibration.size(); ++r) {
      if (bundle.calibration.source[r] == static_cast<int>(i)) {
        part.push_back(s.cal[r]);
      }
    }
    if (part.empty()) {
      throw InsufficientDataError("source " + std::to_string(i) + " has no calibration rows");
    }
    s.per_source_cal.push_back(EmpiricalDist::uniform(std::move(part)));
  }
  for (const auto& t : bundle.tests) {
    s.tests.push_back(scores_of(model, t.data));
  }
  return s;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

const char* to_string(Method m) noexcept {
  switch (m) {
  case Method::cp: return "cp";
  case Method::iwcp: return "iwcp";
  case Method::wccp: return "wccp";
  case Method::wrcp: return "wrcp";
  case Method::wrcp_uw: return "wrcp_uw";
  }
  return "cp";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::cp, Method::iwcp, Method::wccp, Method::wrcp, Method::wrcp_uw}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw DomainError("unknown method '" + name + "'");
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) {
      continue;
    }
    Method m = method_from_string(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) {
      out.push_back(m);
    }
  }
  if (out.empty()) {
    throw DomainError("method list is empty");
  }
  return out;
}

std::vector<double> default_alphas() {
  std::vector<double> a;
  for (int i = 1; i <= 9; ++i) {
    a.push_back(i / 10.0);
  }
  return a;
}

std::vector<EvalRow> evaluate_bundle(const DatasetBundle& bundle, const MethodModels& models,
                                     const EvalOptions& options) {
  check_alphas(options.alphas);
  if (options.methods.empty()) {
    throw DomainError("no methods to evaluate");
  }
  if (bundle.tests.empty()) {
    throw DomainError("bundle has no test sets");
  }

  std::map<const MlpModel*, ModelScores> scored;
  bool need_weights = false;
  for (Method m : options.methods) {
    auto it = models.find(m);
    if (it == models.end() || it->second == nullptr) {
      throw DomainError(std::string("method ") + to_string(m) + " has no model");
    }
    if (!scored.contains(it->second)) {
      scored.emplace(it->second, score_model(*it->second, bundle));
    }
    need_weights = need_weights || weighted(m);
  }

  const std::size_t n_tests = bundle.tests.size();
  std::vector<WeightsWithQueryMass> test_weights(need_weights ? n_tests : 0);
  if (need_weights) {
    CalibrationWeighter weighter(bundle.calibration.x, derive_seed(options.seed, kTagEvalKde));
    std::vector<std::exception_ptr> failures(n_tests);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < n_tests; ++j) {
      try {
        const Matrix& tx = bundle.tests[j].data.x;
        if (options.conservative) {
          test_weights[j] = weighter.weights_with_query_mass(tx, tx);
        } else {
          test_weights[j].weights = weighter.weights_for(tx);
        }
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
    for (const auto& f : failures) {
      if (f) {
        std::rethrow_exception(f);
      }
    }
  }

  std::vector<EvalRow> rows;
  for (std::size_t j = 0; j < n_tests; ++j) {
    for (Method m : options.methods) {
      const ModelScores& s = scored.at(models.at(m));
      const auto& test = s.tests[j];
      const std::size_t mt = test.size();
      EmpiricalDist cal_dist = weighted(m) ? EmpiricalDist(s.cal, test_weights[j].weights)
                                           : EmpiricalDist::uniform(s.cal);
      for (double alpha : options.alphas) {
        EvalRow row;
        row.trial = bundle.trial;
        row.test_set = j;
        row.method = m;
        row.alpha = alpha;
        if (weighted(m) && options.conservative) {
          // per-point thresholds
          std::size_t covered = 0;
          double tau_sum = 0.0;
          double cal_cdf_sum = 0.0;
          for (std::size_t t = 0; t < mt; ++t) {
            double tau = weighted_threshold(cal_dist, alpha, test_weights[j].query_mass[t]);
            covered += test[t] <= tau ? 1 : 0;
            tau_sum += tau;
            cal_cdf_sum += std::isinf(tau) ? 1.0 : cal_dist.cdf(tau);
          }
          row.coverage = static_cast<double>(covered) / static_cast<double>(mt);
          row.tau = tau_sum / static_cast<double>(mt);
          row.cal_gap = std::abs(cal_cdf_sum / static_cast<double>(mt) - row.coverage);
        } else {
          double tau = 0.0;
          if (m == Method::wccp) {
            tau = worst_case_threshold(s.per_source_cal, alpha);
          } else if (weighted(m)) {
            tau = weighted_threshold(cal_dist, alpha);
          } else {
            tau = split_cp_threshold(cal_dist, alpha);
          }
          row.coverage = coverage_from_scores(test, tau);
          row.tau = tau;
          row.cal_gap = std::abs((std::isinf(tau) ? 1.0 : cal_dist.cdf(tau)) - row.coverage);
        }
        row.avg_size = 2.0 * row.tau;
        row.gap = coverage_gap(row.coverage, alpha);
        rows.push_back(row);
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tuple(a.trial, a.test_set, static_cast<int>(a.method), a.alpha) <
           std::tuple(b.trial, b.test_set, static_cast<int>(b.method), b.alpha);
  });
  return rows;
}

std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows) {
  std::map<Method, MethodSummary> acc;
  for (const auto& r : rows) {
    auto& s = acc[r.method];
    s.method = r.method;
    s.rows += 1;
    s.mean_gap += r.gap;
    s.mean_size += r.avg_size;
    s.mean_coverage += r.coverage;
    s.infinite_tau += std::isinf(r.tau) ? 1 : 0;
  }
  std::vector<MethodSummary> out;
  for (auto& [m, s] : acc) {
    auto n = static_cast<double>(s.rows);
    s.mean_gap /= n;
    s.mean_size /= n;
    s.mean_coverage /= n;
    out.push_back(s);
  }
  return out;
}

BenchmarkConfig default_benchmark() {
  BenchmarkConfig cfg;
  cfg.knobs.k = 3;
  cfg.knobs.d = 2;
  cfg.knobs.r_cov = 2.0;
  cfg.knobs.cov_scale = 1.0;
  cfg.knobs.concept_scale = 1.0;
  cfg.knobs.noise = 0.1;
  cfg.knobs.noise_spread = 2.0;
  cfg.sizes.n_per_source = 300;
  cfg.sizes.n_cal = 300;
  cfg.sizes.n_test_sets = 30;
  cfg.sizes.m_per_test = 300;
  cfg.sizes.n_pool = 1000;
  cfg.trials = 10;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.beta = 2.0;
  return cfg;
}

DatasetBundle benchmark_bundle(const BenchmarkConfig& cfg, std::size_t trial) {
  SyntheticTask task = SyntheticTask::from_knobs(cfg.knobs, derive_seed(cfg.seed, kTagTrial, trial));
  return gen_synthetic(task, cfg.sizes, trial);
}

TrainConfig benchmark_train_config(const BenchmarkConfig& cfg, TrainVariant variant, double beta) {
  TrainConfig t;
  t.beta = beta;
  t.epochs = cfg.epochs;
  t.learning_rate = cfg.learning_rate;
  t.seed = derive_seed(cfg.seed, kTagTrain);
  t.variant = variant;
  return t;
}

EvalOptions benchmark_eval_options(const BenchmarkConfig& cfg, std::size_t trial, std::vector<Method> methods) {
  EvalOptions opts;
  opts.methods = std::move(methods);
  opts.alphas = cfg.alphas;
  opts.seed = derive_seed(cfg.seed, kTagEvalKde, trial);
  return opts;
}

std::vector<EvalRow> run_benchmark_trial(const BenchmarkConfig& cfg, std::size_t trial,
                                         const std::vector<Method>& methods) {
  DatasetBundle bundle = benchmark_bundle(cfg, trial);
  std::optional<MlpModel> erm;
  std::optional<MlpModel> wr;
  std::optional<MlpModel> wr_uw;
  MethodModels models;
  for (Method m : methods) {
    switch (m) {
    case Method::cp:
    case Method::iwcp:
    case Method::wccp:
      if (!erm) {
        erm = wrcp_train(bundle, benchmark_train_config(cfg, TrainVariant::erm, 0.0)).model;
      }
      models[m] = &*erm;
      break;
    case Method::wrcp:
      if (!wr) {
        wr = wrcp_train(bundle, benchmark_train_config(cfg, TrainVariant::wrcp, cfg.beta)).model;
      }
      models[m] = &*wr;
      break;
    case Method::wrcp_uw:
      if (!wr_uw) {
        wr_uw = wrcp_train(bundle, benchmark_train_config(cfg, TrainVariant::wrcp_uw, cfg.beta)).model;
      }
      models[m] = &*wr_uw;
      break;
    }
  }
  return evaluate_bundle(bundle, models, benchmark_eval_options(cfg, trial, methods));
}

std::vector<ParetoPoint> run_pareto(const DatasetBundle& bundle, const std::vector<double>& betas,
                                    const TrainConfig& base, const EvalOptions& eval) {
  if (betas.empty()) {
    throw DomainError("beta list is empty");
  }
  for (double b : betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw DomainError("beta values must be finite and non-negative");
    }
  }
  // weights depend only on the bundle and seed; share them across betas
  auto weights = compute_source_weights(bundle, base.seed);
  std::vector<ParetoPoint> out;
  for (double beta : betas) {
    ParetoPoint p;
    p.beta = beta;
    p.label = beta == 0.0 ? "IW-CP" : "WR-CP";
    try {
      TrainConfig cfg = base;
      cfg.beta = beta;
      cfg.variant = TrainVariant::wrcp;
      MlpModel model = wrcp_train(bundle, cfg, weights).model;
      EvalOptions opts = eval;
      opts.methods = {Method::wrcp};
      auto rows = evaluate_bundle(bundle, {{Method::wrcp, &model}}, opts);
      auto summary = summarize(rows).front();
      p.mean_gap = summary.mean_gap;
      p.mean_size = summary.mean_size;
    } catch (const NumericalError& e) {
      p.error = e.what();
    }
    out.push_back(p);
  }
  return out;
}

CorrelationStudy run_correlation(const DatasetBundle& bundle, const MlpModel& model,
                                 const std::vector<double>& alphas) {
  check_alphas(alphas);
  if (bundle.tests.size() < 3) {
    throw DomainError("correlation study needs at least 3 test sets");
  }
  ModelScores s = score_model(model, bundle);
  const double cal_mean = mean_of(s.cal);
  if (!(cal_mean > 0.0)) {
    throw DegenerateInputError("calibration scores are all zero");
  }
  EmpiricalDist cal = rescale(EmpiricalDist::uniform(s.cal), 1.0 / cal_mean);
  EmpiricalDist cal_raw = EmpiricalDist::uniform(s.cal);

  CorrelationStudy study;
  for (std::size_t j = 0; j < bundle.tests.size(); ++j) {
    DistanceRow row;
    row.test_set = j;
    for (double a : alphas) {
      double tau = split_cp_threshold(cal_raw, a);
      row.avg_gap += coverage_gap(coverage_from_scores(s.tests[j], tau), a);
    }
    row.avg_gap /= static_cast<double>(alphas.size());
    EmpiricalDist test = rescale(EmpiricalDist::uniform(s.tests[j]), 1.0 / cal_mean);
    HistogramPair hist = HistogramPair::from_samples(cal, test);
    row.wasserstein = wasserstein1(cal, test);
    row.tv = tv_distance(hist);
    row.kl = kl_divergence(hist);
    row.expectation = expectation_difference(cal, test);
    study.rows.push_back(row);
  }

  std::vector<double> gaps;
  for (const auto& r : study.rows) {
    gaps.push_back(r.avg_gap);
  }
  auto corr = [&](double DistanceRow::*field) -> std::optional<double> {
    std::vector<double> xs;
    for (const auto& r : study.rows) {
      xs.push_back(r.*field);
    }
    try {
      return spearman(xs, gaps);
    } catch (const UndefinedCorrelationError&) {
      return std::nullopt;
    }
  };
  study.spearman["W"] = corr(&DistanceRow::wasserstein);
  study.spearman["TV"] = corr(&DistanceRow::tv);
  study.spearman["KL"] = corr(&DistanceRow::kl);
  study.spearman["dE"] = corr(&DistanceRow::expectation);
  return study;
}

BoundStudy run_bound_sweep(const DatasetBundle& bundle, const MlpModel& model, const std::vector<double>& alphas,
                           std::uint64_t seed, std::size_t mixture_rows) {
  check_alphas(alphas);
  if (bundle.pools.size() != bundle.k()) {
    throw DomainError("bound sweep needs a held-out pool per source");
  }
  if (mixture_rows < 1) {
    throw DomainError("mixture_rows must be positive");
  }
  ModelScores s = score_model(model, bundle);
  BoundStudy study;
  study.L = estimate_density_bound(s.cal, seed);
  EmpiricalDist cal = EmpiricalDist::uniform(s.cal);

  CalibrationWeighter weighter(bundle.calibration.x, derive_seed(seed, kTagBoundKde));
  std::vector<EmpiricalDist> per_source_weighted;
  std::vector<EmpiricalDist> per_source_scores;
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    per_source_weighted.emplace_back(s.cal, weighter.weights_for(bundle.sources[i].x));
    per_source_scores.push_back(EmpiricalDist::uniform(scores_of(model, bundle.pools[i])));
  }

  const std::size_t n_tests = bundle.tests.size();
  std::vector<std::vector<BoundRow>> per_test(n_tests);
  std::vector<std::exception_ptr> failures(n_tests);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < n_tests; ++j) {
    try {
      const TestSet& t = bundle.tests[j];
      EmpiricalDist test = EmpiricalDist::uniform(s.tests[j]);
      const double w = wasserstein1(cal, test);
      EmpiricalDist weighted_cal(s.cal, weighter.weights_for(t.data.x));
      EmpiricalDist weighted_mix = mixture(per_source_weighted, t.weights);
      auto fresh = scores_of(model, make_mixture_test(bundle, t.weights, mixture_rows,
                                                      derive_seed(seed, kTagBoundKde, j)));
      for (double a : alphas) {
        BoundRow row;
        row.test_set = j;
        row.alpha = a;
        row.gap = coverage_gap(coverage_from_scores(s.tests[j], split_cp_threshold(cal, a)), a);
        row.wasserstein = w;
        row.bound = gap_bound_wasserstein(study.L, w);
        row.iw_gap = coverage_gap(coverage_from_scores(s.tests[j], weighted_threshold(weighted_cal, a)), a);
        double tau = weighted_threshold(weighted_mix, a);
        row.mixture_gap = std::abs(weighted_mix.cdf(tau) - coverage_from_scores(fresh, tau));
        row.alpha_d = alpha_D(per_source_weighted, per_source_scores, tau);
        per_test[j].push_back(row);
      }
    } catch (...) {
      failures[j] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) {
      std::rethrow_exception(f);
    }
  }
  for (auto& rows : per_test) {
    study.rows.insert(study.rows.end(), rows.begin(), rows.end());
  }
  return study;
}

} // namespace wrcp
