#include "wrcp/wr_train.hpp"

#include <cmath>

#include "wrcp/density.hpp"
#include "wrcp/error.hpp"
#include "wrcp/rng.hpp"

namespace wrcp {

namespace {

constexpr std::uint64_t kTagInit = 0x494e;
constexpr std::uint64_t kTagKde = 0x4b44;

double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

TrainingProblem make_problem(const DatasetBundle& bundle, double beta, std::vector<std::vector<double>> weights) {
  if (bundle.k() < 1) {
    throw DomainError("wrcp_train: bundle has no sources");
  }
  if (bundle.calibration.size() == 0) {
    throw DomainError("wrcp_train: bundle has no calibration set");
  }
  TrainingProblem p;
  p.sources = bundle.sources;
  p.calibration = bundle.calibration;
  p.cal_weights = std::move(weights);
  p.beta = beta;
  for (const auto& w : p.cal_weights) {
    if (w.size() != p.calibration.size()) {
      throw DomainError("wrcp_train: calibration weight vector has the wrong length");
    }
  }
  if (!p.cal_weights.empty() && p.cal_weights.size() != p.sources.size()) {
    throw DomainError("wrcp_train: need one calibration weight vector per source");
  }
  return p;
}

TrainResult run_training(const TrainingProblem& problem, const TrainConfig& cfg, std::size_t dim) {
  TrainResult result{MlpModel::standard(dim, derive_seed(cfg.seed, kTagInit)), {}};
  OptimizerState state(result.model, AdamConfig{cfg.learning_rate});
  result.history.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    GradBuffer grads(result.model);
    ObjectiveValue v = evaluate_objective(result.model, problem, &grads);
    if (!std::isfinite(v.total)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + "; last finite epoch " +
                           std::to_string(epoch - 1));
    }
    result.history.push_back({epoch, v.total, v.mse_sum, v.wass_sum, std::move(v.per_source_wass)});
    optimizer_step(result.model, grads, state);
  }
  return result;
}

} // namespace

WassersteinGradResult wasserstein1_grad(const EmpiricalDist& a, const EmpiricalDist& b) {
  WassersteinGradResult r;
  r.grad_a.assign(a.size(), 0.0);
  r.grad_b.assign(b.size(), 0.0);
  auto va = a.sorted_values();
  auto vb = b.sorted_values();
  auto ca = a.cumulative();
  auto cb = b.cumulative();
  auto oa = a.order();
  auto ob = b.order();
  // Both cumulative sequences end at exactly 1, so the walk consumes them together.
  std::size_t i = 0;
  std::size_t j = 0;
  double prev = 0.0;
  while (i < va.size() && j < vb.size()) {
    double next = std::min(ca[i], cb[j]);
    double mass = next - prev;
    if (mass > 0.0) {
      double diff = va[i] - vb[j];
      double s = sign_of(diff);
      r.distance += mass * std::abs(diff);
      r.grad_a[oa[i]] += mass * s;
      r.grad_b[ob[j]] -= mass * s;
      prev = next;
    }
    if (ca[i] <= next) {
      ++i;
    }
    if (cb[j] <= next) {
      ++j;
    }
  }
  return r;
}

EmpiricalDist build_weighted_cal_dist(std::span<const double> cal_scores, std::span<const double> cal_weights) {
  if (cal_scores.size() != cal_weights.size()) {
    throw DomainError("build_weighted_cal_dist: length mismatch");
  }
  return EmpiricalDist({cal_scores.begin(), cal_scores.end()}, {cal_weights.begin(), cal_weights.end()});
}

const char* to_string(TrainVariant v) noexcept {
  switch (v) {
  case TrainVariant::erm: return "erm";
  case TrainVariant::wrcp: return "wrcp";
  case TrainVariant::wrcp_uw: return "wrcp_uw";
  }
  return "erm";
}

TrainVariant train_variant_from_string(const std::string& name) {
  for (auto v : {TrainVariant::erm, TrainVariant::wrcp, TrainVariant::wrcp_uw}) {
    if (name == to_string(v)) {
      return v;
    }
  }
  throw DomainError("unknown training variant '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("beta must be finite and non-negative");
  }
  if (epochs < 1) {
    throw DomainError("epochs must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning rate must be positive");
  }
}

ObjectiveValue evaluate_objective(const MlpModel& model, const TrainingProblem& problem, GradBuffer* grads) {
  ObjectiveValue v;
  const bool regularize = !problem.cal_weights.empty();
  const bool reg_grad = regularize && problem.beta != 0.0 && grads != nullptr;

  std::vector<double> cal_scores;
  std::vector<double> cal_sign;
  std::vector<double> cal_upstream;
  ForwardCache cal_cache;
  if (regularize) {
    cal_cache = mlp_forward(model, problem.calibration.x);
    auto pred = cal_cache.output();
    cal_scores.resize(pred.size());
    cal_sign.resize(pred.size());
    for (std::size_t r = 0; r < pred.size(); ++r) {
      double resid = pred[r] - problem.calibration.y[r];
      cal_scores[r] = std::abs(resid);
      cal_sign[r] = sign_of(resid);
    }
    cal_upstream.assign(pred.size(), 0.0);
  }

  for (std::size_t i = 0; i < problem.sources.size(); ++i) {
    const auto& src = problem.sources[i];
    ForwardCache cache = mlp_forward(model, src.x);
    auto pred = cache.output();
    MseResult mse = mse_loss(pred, src.y);
    v.mse_sum += mse.loss;
    std::vector<double> upstream = std::move(mse.grad);

    if (regularize) {
      std::vector<double> scores(pred.size());
      for (std::size_t r = 0; r < pred.size(); ++r) {
        scores[r] = std::abs(pred[r] - src.y[r]);
      }
      auto weighted_cal = build_weighted_cal_dist(cal_scores, problem.cal_weights[i]);
      auto source_dist = EmpiricalDist::uniform(scores);
      WassersteinGradResult w = wasserstein1_grad(weighted_cal, source_dist);
      v.per_source_wass.push_back(w.distance);
      v.wass_sum += w.distance;
      if (reg_grad) {
        for (std::size_t r = 0; r < pred.size(); ++r) {
          upstream[r] += problem.beta * w.grad_b[r] * sign_of(pred[r] - src.y[r]);
        }
        for (std::size_t r = 0; r < cal_upstream.size(); ++r) {
          cal_upstream[r] += problem.beta * w.grad_a[r] * cal_sign[r];
        }
      }
    }
    if (grads != nullptr) {
      *grads += backward(model, cache, upstream);
    }
  }
  if (reg_grad) {
    *grads += backward(model, cal_cache, cal_upstream);
  }
  v.total = v.mse_sum + problem.beta * v.wass_sum;
  return v;
}

std::vector<std::vector<double>> compute_source_weights(const DatasetBundle& bundle, std::uint64_t seed) {
  CalibrationWeighter weighter(bundle.calibration.x, derive_seed(seed, kTagKde));
  std::vector<std::vector<double>> out;
  out.reserve(bundle.k());
  for (const auto& src : bundle.sources) {
    out.push_back(weighter.weights_for(src.x));
  }
  return out;
}

TrainResult wrcp_train(const DatasetBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  switch (cfg.variant) {
  case TrainVariant::erm:
    return run_training(make_problem(bundle, 0.0, {}), cfg, bundle.dim());
  case TrainVariant::wrcp_uw:
    return wrcp_uw_train(bundle, cfg);
  case TrainVariant::wrcp:
    break;
  }
  return wrcp_train(bundle, cfg, compute_source_weights(bundle, cfg.seed));
}

TrainResult wrcp_train(const DatasetBundle& bundle, const TrainConfig& cfg,
                       std::vector<std::vector<double>> cal_weights) {
  cfg.validate();
  return run_training(make_problem(bundle, cfg.beta, std::move(cal_weights)), cfg, bundle.dim());
}

TrainResult wrcp_uw_train(const DatasetBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = bundle.calibration.size();
  std::vector<std::vector<double>> uniform(bundle.k(), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  return run_training(make_problem(bundle, cfg.beta, std::move(uniform)), cfg, bundle.dim());
}

} // namespace wrcp
