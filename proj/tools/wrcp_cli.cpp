// wrcp: command-line harness for data generation, training, evaluation and
// the desk-scale studies.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wrcp/conformal.hpp"
#include "wrcp/datagen.hpp"
#include "wrcp/error.hpp"
#include "wrcp/experiment.hpp"
#include "wrcp/kv.hpp"
#include "wrcp/mlp.hpp"
#include "wrcp/report.hpp"
#include "wrcp/wr_train.hpp"

namespace fs = std::filesystem;
using namespace wrcp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct OptionSpec {
  std::string name;
  std::string fallback;
  std::string help;
};

/// String-valued settings resolved as flag > config file > default.
class Settings {
public:
  Settings(CLI::App* cmd, std::vector<OptionSpec> specs) : specs_(std::move(specs)) {
    for (const auto& s : specs_) {
      flags_[s.name];
      cmd->add_option("--" + s.name, flags_[s.name], s.help + (s.fallback.empty() ? "" : " [" + s.fallback + "]"));
    }
    cmd->add_option("--config", config_path_, "flat key=value file; flags take precedence");
  }

  void resolve() {
    for (const auto& s : specs_) {
      values_[s.name] = s.fallback;
    }
    if (!config_path_.empty()) {
      for (const auto& [k, v] : read_key_values(config_path_)) {
        if (!values_.contains(k)) {
          throw DomainError("config " + config_path_ + ": unknown key '" + k + "'");
        }
        values_[k] = v;
      }
    }
    for (const auto& [k, v] : flags_) {
      if (!v.empty()) {
        values_[k] = v;
      }
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }
  bool has(const std::string& key) const { return !values_.at(key).empty(); }
  double real(const std::string& key) const { return kv_double(values_, key); }
  std::size_t size(const std::string& key) const { return kv_size(values_, key); }
  std::uint64_t u64(const std::string& key) const { return kv_u64(values_, key); }
  bool flag(const std::string& key) const {
    const auto& v = values_.at(key);
    if (v == "1" || v == "true") {
      return true;
    }
    if (v == "0" || v == "false" || v.empty()) {
      return false;
    }
    throw DomainError("--" + key + " expects true or false");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(values_.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) {
        out.push_back(kv_double({{key, item}}, key));
      }
    }
    if (out.empty()) {
      throw DomainError("--" + key + " is empty");
    }
    return out;
  }

  /// Writes the effective configuration next to the command's outputs.
  void echo(const fs::path& dir) const {
    KeyValues kv = values_;
    write_key_values(kv, dir / "config.txt");
  }

private:
  std::vector<OptionSpec> specs_;
  std::map<std::string, std::string> flags_;
  KeyValues values_;
  std::string config_path_;
};

fs::path prepare_out(const Settings& s) {
  if (!s.has("out")) {
    throw DomainError("--out is required");
  }
  fs::path out = s.str("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + out.string() + ": " + ec.message());
  }
  return out;
}

std::vector<double> parse_alphas(const Settings& s) {
  auto a = s.reals("alphas");
  for (double v : a) {
    if (!(v > 0.0 && v < 1.0)) {
      throw DomainError("alpha values must lie in (0, 1)");
    }
  }
  return a;
}

DatasetBundle require_bundle(const Settings& s) {
  if (!s.has("bundle")) {
    throw DomainError("--bundle is required");
  }
  return read_bundle(s.str("bundle"));
}

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".meta";
  return p;
}

// ---- gen -------------------------------------------------------------------

int run_gen(const Settings& s) {
  fs::path out = prepare_out(s);
  DatasetBundle bundle;
  if (s.has("csv")) {
    SplitOptions opt;
    opt.train_fraction = s.real("train-fraction");
    opt.n_test_sets = s.size("n-test-sets");
    opt.m_per_test = s.size("m-per-test");
    opt.seed = s.u64("seed");
    bundle = load_csv(s.str("csv"), opt);
    if (bundle.k() < 2) {
      throw DomainError("mixture studies need at least 2 sources; input has " + std::to_string(bundle.k()));
    }
  } else {
    SyntheticKnobs knobs;
    knobs.k = s.size("k");
    knobs.d = s.size("d");
    knobs.r_cov = s.real("r-cov");
    knobs.cov_scale = s.real("cov-scale");
    knobs.concept_scale = s.real("concept-scale");
    knobs.noise = s.real("noise");
    knobs.noise_spread = s.real("noise-spread");
    knobs.family = s.str("family");
    if (knobs.k < 2) {
      throw DomainError("--k must be at least 2 for mixture studies");
    }
    GenSizes sizes;
    sizes.n_per_source = s.size("n-per-source");
    sizes.n_cal = s.size("n-cal");
    sizes.n_test_sets = s.size("n-test-sets");
    sizes.m_per_test = s.size("m-per-test");
    sizes.n_pool = s.size("n-pool");
    bundle = gen_synthetic(SyntheticTask::from_knobs(knobs, s.u64("seed")), sizes, s.size("trial"));
  }
  write_bundle(bundle, out);
  s.echo(out);
  fmt::print("bundle {}: k={} d={} calibration={} tests={}\n", out.string(), bundle.k(), bundle.dim(),
             bundle.calibration.size(), bundle.tests.size());
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    fmt::print("  source {}: train={} pool={}\n", i, bundle.sources[i].size(),
               i < bundle.pools.size() ? bundle.pools[i].size() : 0);
  }
  if (bundle.task) {
    const auto& k = bundle.task->knobs;
    fmt::print("  shift knobs: r_cov={} concept_scale={} noise={} noise_spread={} family={}\n", k.r_cov,
               k.concept_scale, k.noise, k.noise_spread, k.family);
  }
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

int run_train(const Settings& s) {
  DatasetBundle bundle = require_bundle(s);
  fs::path out = prepare_out(s);
  TrainConfig cfg;
  cfg.variant = train_variant_from_string(s.str("variant"));
  cfg.beta = s.real("beta");
  cfg.epochs = s.size("epochs");
  cfg.learning_rate = s.real("lr");
  cfg.seed = s.u64("seed");
  TrainResult result = wrcp_train(bundle, cfg);

  fs::path ckpt = out / "model.ckpt";
  save_checkpoint(result.model, ckpt);
  KeyValues meta{{"variant", to_string(cfg.variant)},
                 {"beta", format_float(cfg.beta)},
                 {"epochs", std::to_string(cfg.epochs)},
                 {"lr", format_float(cfg.learning_rate)},
                 {"seed", std::to_string(cfg.seed)},
                 {"input_dim", std::to_string(result.model.input_dim())}};
  write_key_values(meta, sidecar_path(ckpt));

  std::vector<std::string> header{"epoch", "total_loss", "mse_sum", "wass_sum"};
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    header.push_back("wass_source_" + std::to_string(i));
  }
  CsvTable table(header);
  for (const auto& m : result.history) {
    std::vector<std::string> row{std::to_string(m.epoch), format_float(m.total_loss), format_float(m.mse_sum),
                                 format_float(m.wass_sum)};
    for (std::size_t i = 0; i < bundle.k(); ++i) {
      row.push_back(format_float(i < m.per_source_wass.size() ? m.per_source_wass[i] : 0.0));
    }
    table.add_row(std::move(row));
  }
  table.write(out / "metrics.csv");
  s.echo(out);
  const auto& last = result.history.back();
  fmt::print("trained {} (beta={}) for {} epochs: mse_sum={} wass_sum={}\n", to_string(cfg.variant),
             format_float(cfg.beta), cfg.epochs, format_float(last.mse_sum), format_float(last.wass_sum));
  fmt::print("checkpoint {}\n", ckpt.string());
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct LoadedModel {
  MlpModel model;
  std::string variant;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m{load_checkpoint(path), "unknown"};
  fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    auto kv = read_key_values(side);
    if (kv.contains("variant")) {
      m.variant = kv.at("variant");
    }
  }
  return m;
}

int run_eval(const Settings& s) {
  DatasetBundle bundle = require_bundle(s);
  fs::path out = prepare_out(s);
  EvalOptions opts;
  opts.methods = parse_methods(s.str("methods"));
  opts.alphas = parse_alphas(s);
  opts.seed = s.u64("seed");
  opts.conservative = s.flag("conservative");

  std::map<std::string, LoadedModel> cache;
  auto get = [&](const std::string& key) -> const LoadedModel* {
    if (!s.has(key)) {
      return nullptr;
    }
    auto it = cache.find(s.str(key));
    if (it == cache.end()) {
      it = cache.emplace(s.str(key), load_model(s.str(key))).first;
    }
    return &it->second;
  };

  MethodModels models;
  for (Method m : opts.methods) {
    const LoadedModel* lm = nullptr;
    switch (m) {
    case Method::cp:
    case Method::iwcp:
    case Method::wccp:
      lm = get("checkpoint");
      if (lm == nullptr) {
        throw DomainError(std::string("method ") + to_string(m) + " needs --checkpoint");
      }
      break;
    case Method::wrcp:
    case Method::wrcp_uw: {
      const std::string key = m == Method::wrcp ? "wrcp-checkpoint" : "wrcp-uw-checkpoint";
      lm = get(key);
      if (lm == nullptr) {
        const LoadedModel* base = get("checkpoint");
        if (base != nullptr && base->variant == to_string(m)) {
          lm = base;
        }
      }
      if (lm == nullptr) {
        throw DomainError(std::string("method ") + to_string(m) + " needs a checkpoint trained with --variant " +
                          to_string(m) + " (pass --" + key + ")");
      }
      break;
    }
    }
    models[m] = &lm->model;
  }

  auto rows = evaluate_bundle(bundle, models, opts);
  CsvTable table({"trial", "test_set", "method", "alpha", "coverage", "gap", "avg_size", "tau", "cal_gap"});
  for (const auto& r : rows) {
    table.add_row({std::to_string(r.trial), std::to_string(r.test_set), to_string(r.method), format_float(r.alpha),
                   format_float(r.coverage), format_float(r.gap), format_float(r.avg_size), format_float(r.tau),
                   format_float(r.cal_gap)});
  }
  table.write(out / "eval.csv");

  CsvTable summary({"method", "rows", "mean_coverage", "mean_gap", "mean_size", "infinite_tau"});
  fmt::print("{:<8} {:>6} {:>14} {:>14} {:>14} {:>6}\n", "method", "rows", "mean_coverage", "mean_gap",
             "mean_size", "inf");
  for (const auto& m : summarize(rows)) {
    summary.add_row({to_string(m.method), std::to_string(m.rows), format_float(m.mean_coverage),
                     format_float(m.mean_gap), format_float(m.mean_size), std::to_string(m.infinite_tau)});
    fmt::print("{:<8} {:>6} {:>14} {:>14} {:>14} {:>6}\n", to_string(m.method), m.rows,
               format_float(m.mean_coverage), format_float(m.mean_gap), format_float(m.mean_size),
               m.infinite_tau);
  }
  summary.write(out / "summary.csv");
  s.echo(out);
  return kExitOk;
}

// ---- correlate -------------------------------------------------------------

int run_correlate(const Settings& s) {
  DatasetBundle bundle = require_bundle(s);
  fs::path out = prepare_out(s);
  if (!s.has("checkpoint")) {
    throw DomainError("--checkpoint is required");
  }
  LoadedModel lm = load_model(s.str("checkpoint"));
  if (bundle.tests.size() < 20) {
    fmt::print(stderr, "warning: only {} test sets; rank correlations will be noisy\n", bundle.tests.size());
  }
  CorrelationStudy study = run_correlation(bundle, lm.model, parse_alphas(s));

  CsvTable dist({"test_set", "avg_gap", "wasserstein", "tv", "kl", "expectation_diff"});
  for (const auto& r : study.rows) {
    dist.add_row({std::to_string(r.test_set), format_float(r.avg_gap), format_float(r.wasserstein),
                  format_float(r.tv), format_float(r.kl), format_float(r.expectation)});
  }
  dist.write(out / "distances.csv");

  CsvTable corr({"measure", "spearman"});
  for (const char* measure : {"W", "TV", "KL", "dE"}) {
    const auto& v = study.spearman.at(measure);
    std::string cell = v ? format_float(*v) : "undefined";
    corr.add_row({measure, cell});
    fmt::print("spearman({:<2}, gap) = {}\n", measure, cell);
  }
  corr.write(out / "spearman.csv");
  s.echo(out);
  return kExitOk;
}

// ---- pareto ----------------------------------------------------------------

int run_pareto_cmd(const Settings& s) {
  DatasetBundle bundle = require_bundle(s);
  fs::path out = prepare_out(s);
  TrainConfig base;
  base.epochs = s.size("epochs");
  base.learning_rate = s.real("lr");
  base.seed = s.u64("seed");
  EvalOptions eval;
  eval.alphas = parse_alphas(s);
  eval.seed = s.u64("seed");
  auto points = run_pareto(bundle, s.reals("betas"), base, eval);

  CsvTable table({"beta", "label", "mean_gap", "mean_size", "error"});
  Series front{"WR-CP", {}, {}};
  Series iw{"IW-CP", {}, {}};
  for (const auto& p : points) {
    table.add_row({format_float(p.beta), p.label, p.error.empty() ? format_float(p.mean_gap) : "",
                   p.error.empty() ? format_float(p.mean_size) : "", p.error});
    if (!p.error.empty()) {
      fmt::print(stderr, "beta={} failed: {}\n", format_float(p.beta), p.error);
      continue;
    }
    Series& target = p.beta == 0.0 ? iw : front;
    target.x.push_back(p.mean_size);
    target.y.push_back(p.mean_gap);
    fmt::print("beta={:<8} {:<6} mean_gap={} mean_size={}\n", format_float(p.beta), p.label,
               format_float(p.mean_gap), format_float(p.mean_size));
  }
  table.write(out / "pareto.csv");
  std::vector<Series> series;
  for (Series* sr : {&iw, &front}) {
    if (!sr->x.empty()) {
      series.push_back(*sr);
    }
  }
  if (!series.empty()) {
    render_svg(series, {"Coverage gap vs. set size", "mean prediction set size", "mean coverage gap", true},
               out / "pareto.svg");
  }
  s.echo(out);
  return kExitOk;
}

// ---- bounds ----------------------------------------------------------------

int run_bounds(const Settings& s) {
  fs::path out = prepare_out(s);
  if (s.has("bundle")) {
    DatasetBundle bundle = require_bundle(s);
    if (!s.has("checkpoint")) {
      throw DomainError("--checkpoint is required with --bundle");
    }
    LoadedModel lm = load_model(s.str("checkpoint"));
    BoundStudy study = run_bound_sweep(bundle, lm.model, parse_alphas(s), s.u64("seed"));
    CsvTable table({"test_set", "alpha", "gap", "wasserstein", "bound", "holds", "iw_gap", "mixture_gap", "alpha_d"});
    std::size_t holds = 0;
    for (const auto& r : study.rows) {
      bool ok = r.gap <= r.bound;
      holds += ok ? 1 : 0;
      table.add_row({std::to_string(r.test_set), format_float(r.alpha), format_float(r.gap),
                     format_float(r.wasserstein), format_float(r.bound), ok ? "1" : "0", format_float(r.iw_gap),
                     format_float(r.mixture_gap), format_float(r.alpha_d)});
    }
    table.write(out / "bounds.csv");
    fmt::print("L={} bound holds on {}/{} cells\n", format_float(study.L), holds, study.rows.size());
    s.echo(out);
    return kExitOk;
  }

  BoundInputs in;
  in.L = s.real("L");
  in.kappa = s.real("kappa");
  in.eta = s.real("eta");
  in.W_X = s.real("W-X");
  in.W_Y = s.real("W-Y");
  in.W_hat = s.real("W-hat");
  in.n = s.u64("n");
  in.m = s.u64("m");
  in.lambda_P = s.real("lambda-P");
  in.lambda_Q = s.real("lambda-Q");
  in.sigma_P = s.real("sigma-P");
  in.sigma_Q = s.real("sigma-Q");
  in.t_P = s.real("t-P");
  in.t_Q = s.real("t-Q");
  in.validate();
  const double W = s.has("W") ? s.real("W") : in.W_hat;
  EmpiricalBound emp = empirical_gap_bound(in);
  CsvTable table({"quantity", "value"});
  table.add_row({"wasserstein_bound", format_float(gap_bound_wasserstein(in.L, W))});
  table.add_row({"shift_bound", format_float(gap_bound_shift(in.L, in.kappa, in.eta, in.W_X, in.W_Y))});
  table.add_row({"empirical_bound", format_float(emp.bound)});
  table.add_row({"confidence", format_float(emp.confidence)});
  if (s.has("gap")) {
    table.add_row({"observed_gap", format_float(s.real("gap"))});
  }
  table.write(out / "bounds.csv");
  std::cout << table.str();
  s.echo(out);
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein-regularized conformal prediction toolkit"};
  app.require_subcommand(1);

  const std::vector<OptionSpec> common{{"seed", "0", "random seed"}, {"out", "", "output directory"}};
  auto with_common = [&](std::vector<OptionSpec> extra) {
    extra.insert(extra.begin(), common.begin(), common.end());
    return extra;
  };
  const OptionSpec alphas{"alphas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "comma-separated miscoverage levels"};

  auto* gen = app.add_subcommand("gen", "generate a synthetic bundle or split a CSV into one");
  Settings gen_s(gen, with_common({{"k", "3", "number of sources"},
                                   {"d", "2", "feature dimension"},
                                   {"r-cov", "1", "radius of the circle holding source means"},
                                   {"cov-scale", "1", "per-source feature standard deviation"},
                                   {"concept-scale", "1", "linear concept-shift coefficient scale"},
                                   {"noise", "0.1", "base noise standard deviation"},
                                   {"noise-spread", "0", "relative noise growth per source index"},
                                   {"family", "linear", "concept family: linear or xi"},
                                   {"n-per-source", "300", "training rows per source"},
                                   {"n-cal", "300", "pooled calibration rows"},
                                   {"n-test-sets", "30", "number of mixture test sets"},
                                   {"m-per-test", "300", "rows per test set"},
                                   {"n-pool", "1000", "held-out rows per source"},
                                   {"trial", "0", "trial index recorded in the bundle"},
                                   {"csv", "", "source-labeled CSV to split instead of generating"},
                                   {"train-fraction", "0.5", "training share of each source (CSV input)"}}));

  auto* train = app.add_subcommand("train", "train an ERM, WR-CP or unweighted WR-CP model");
  Settings train_s(train, with_common({{"bundle", "", "bundle directory"},
                                       {"variant", "wrcp", "erm, wrcp or wrcp_uw"},
                                       {"beta", "0", "regularization strength"},
                                       {"epochs", "200", "full-batch optimizer steps"},
                                       {"lr", "0.001", "Adam learning rate"}}));

  auto* eval = app.add_subcommand("eval", "evaluate conformal methods on a bundle");
  Settings eval_s(eval, with_common({{"bundle", "", "bundle directory"},
                                     {"checkpoint", "", "model for cp, iwcp and wccp"},
                                     {"wrcp-checkpoint", "", "model trained with --variant wrcp"},
                                     {"wrcp-uw-checkpoint", "", "model trained with --variant wrcp_uw"},
                                     {"methods", "cp,iwcp,wccp", "comma-separated methods"},
                                     alphas,
                                     {"conservative", "false", "give each test point its own weight at +inf"}}));

  auto* corr = app.add_subcommand("correlate", "rank-correlate score distances with coverage gaps");
  Settings corr_s(corr, with_common({{"bundle", "", "bundle directory"},
                                     {"checkpoint", "", "ERM-trained model"},
                                     alphas}));

  auto* pareto = app.add_subcommand("pareto", "sweep beta and trace gap against set size");
  Settings pareto_s(pareto, with_common({{"bundle", "", "bundle directory"},
                                         {"betas", "0,1,4,16", "comma-separated regularization strengths"},
                                         {"epochs", "200", "full-batch optimizer steps"},
                                         {"lr", "0.001", "Adam learning rate"},
                                         alphas}));

  auto* bounds = app.add_subcommand("bounds", "coverage-gap bound calculators and validity sweep");
  Settings bounds_s(bounds, with_common({{"bundle", "", "bundle directory (sweep mode)"},
                                         {"checkpoint", "", "model to sweep (sweep mode)"},
                                         alphas,
                                         {"L", "1", "density bound of the calibration scores"},
                                         {"kappa", "0", "score Lipschitz constant in x"},
                                         {"eta", "0", "score Lipschitz constant in the label"},
                                         {"W", "", "score-distribution distance (defaults to W-hat)"},
                                         {"W-X", "0", "feature-distribution distance"},
                                         {"W-Y", "0", "label-distribution distance"},
                                         {"W-hat", "0", "empirical score distance"},
                                         {"n", "1", "calibration sample size"},
                                         {"m", "1", "test sample size"},
                                         {"lambda-P", "0", "calibration convergence constant"},
                                         {"lambda-Q", "0", "test convergence constant"},
                                         {"sigma-P", "3", "calibration convergence exponent"},
                                         {"sigma-Q", "3", "test convergence exponent"},
                                         {"t-P", "0", "calibration deviation"},
                                         {"t-Q", "0", "test deviation"},
                                         {"gap", "", "observed gap shown alongside"}}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      gen_s.resolve();
      return run_gen(gen_s);
    }
    if (train->parsed()) {
      train_s.resolve();
      return run_train(train_s);
    }
    if (eval->parsed()) {
      eval_s.resolve();
      return run_eval(eval_s);
    }
    if (corr->parsed()) {
      corr_s.resolve();
      return run_correlate(corr_s);
    }
    if (pareto->parsed()) {
      pareto_s.resolve();
      return run_pareto_cmd(pareto_s);
    }
    bounds_s.resolve();
    return run_bounds(bounds_s);
  } catch (const DomainError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
