#include "wrcp/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wrcp/error.hpp"

namespace wrcp {

namespace {

constexpr double kNormTol = 1e-12;

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw DomainError(std::string(what) + ": non-finite value");
    }
  }
}

// Merged, deduplicated support grid of two CDF sources.
template <class A, class B> std::vector<double> merged_grid(const A& a, const B& b) {
  std::vector<double> grid;
  auto push = [&grid](const auto& dist) {
    if constexpr (std::is_same_v<std::decay_t<decltype(dist)>, EmpiricalDist>) {
      auto v = dist.sorted_values();
      grid.insert(grid.end(), v.begin(), v.end());
    } else {
      auto v = dist.breakpoints();
      grid.insert(grid.end(), v.begin(), v.end());
    }
  };
  push(a);
  push(b);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Integral over [0, h] of |d0 + (d1 - d0) t / h|.
double abs_linear_integral(double d0, double d1, double h) {
  if ((d0 >= 0.0 && d1 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0)) {
    return 0.5 * h * (std::abs(d0) + std::abs(d1));
  }
  double a0 = std::abs(d0);
  double a1 = std::abs(d1);
  return 0.5 * h * (a0 * a0 + a1 * a1) / (a0 + a1);
}

// Both CDFs are affine on every open interval of the merged grid, so the
// area and the supremum are determined by the right-limit at each grid point
// and the left-limit at the next one.
template <class A, class B> double cdf_area(const A& a, const B& b) {
  auto grid = merged_grid(a, b);
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    double d0 = a.cdf(grid[k]) - b.cdf(grid[k]);
    double d1 = a.cdf_left(grid[k + 1]) - b.cdf_left(grid[k + 1]);
    area += abs_linear_integral(d0, d1, grid[k + 1] - grid[k]);
  }
  return area;
}

template <class A, class B> double cdf_sup(const A& a, const B& b) {
  auto grid = merged_grid(a, b);
  double sup = 0.0;
  for (double g : grid) {
    sup = std::max(sup, std::abs(a.cdf(g) - b.cdf(g)));
    sup = std::max(sup, std::abs(a.cdf_left(g) - b.cdf_left(g)));
  }
  return std::min(sup, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) {
      ++j;
    }
    double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      ranks[idx[t]] = rank;
    }
    i = j + 1;
  }
  return ranks;
}

} // namespace

// ---------------------------------------------------------------- EmpiricalDist

EmpiricalDist::EmpiricalDist(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (values_.empty()) {
    throw DomainError("EmpiricalDist: empty support");
  }
  if (values_.size() != weights_.size()) {
    throw DomainError("EmpiricalDist: values and weights differ in length");
  }
  require_finite(values_, "EmpiricalDist values");
  require_finite(weights_, "EmpiricalDist weights");
  double total = 0.0;
  for (double w : weights_) {
    if (w < 0.0) {
      throw DomainError("EmpiricalDist: negative weight");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw DomainError("EmpiricalDist: weights sum to zero");
  }
  for (double& w : weights_) {
    w /= total;
  }

  order_.resize(values_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [this](std::size_t i, std::size_t j) { return values_[i] < values_[j]; });
  sorted_values_.resize(values_.size());
  sorted_weights_.resize(values_.size());
  cumulative_.resize(values_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < order_.size(); ++k) {
    sorted_values_[k] = values_[order_[k]];
    sorted_weights_[k] = weights_[order_[k]];
    acc += sorted_weights_[k];
    cumulative_[k] = acc;
  }
  cumulative_.back() = 1.0;
}

EmpiricalDist EmpiricalDist::uniform(std::vector<double> values) {
  std::vector<double> w(values.size(), 1.0);
  return EmpiricalDist(std::move(values), std::move(w));
}

double EmpiricalDist::mean() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    m += weights_[i] * values_[i];
  }
  return m;
}

double EmpiricalDist::cdf(double v) const noexcept {
  auto it = std::upper_bound(sorted_values_.begin(), sorted_values_.end(), v);
  if (it == sorted_values_.begin()) {
    return 0.0;
  }
  return cumulative_[static_cast<std::size_t>(it - sorted_values_.begin()) - 1];
}

double EmpiricalDist::cdf_left(double v) const noexcept {
  auto it = std::lower_bound(sorted_values_.begin(), sorted_values_.end(), v);
  if (it == sorted_values_.begin()) {
    return 0.0;
  }
  return cumulative_[static_cast<std::size_t>(it - sorted_values_.begin()) - 1];
}

// ------------------------------------------------------- PiecewiseUniformDist

PiecewiseUniformDist::PiecewiseUniformDist(std::vector<double> breakpoints, std::vector<double> densities)
    : breakpoints_(std::move(breakpoints)), densities_(std::move(densities)) {
  if (breakpoints_.size() < 2 || densities_.size() + 1 != breakpoints_.size()) {
    throw DomainError("PiecewiseUniformDist: need n+1 breakpoints for n densities");
  }
  require_finite(breakpoints_, "PiecewiseUniformDist breakpoints");
  require_finite(densities_, "PiecewiseUniformDist densities");
  cumulative_.resize(breakpoints_.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 0; i < densities_.size(); ++i) {
    if (!(breakpoints_[i + 1] > breakpoints_[i])) {
      throw DomainError("PiecewiseUniformDist: breakpoints must be strictly ascending");
    }
    if (densities_[i] < 0.0) {
      throw DomainError("PiecewiseUniformDist: negative density");
    }
    cumulative_[i + 1] = cumulative_[i] + densities_[i] * (breakpoints_[i + 1] - breakpoints_[i]);
  }
  if (std::abs(cumulative_.back() - 1.0) > kNormTol) {
    throw DomainError("PiecewiseUniformDist: density does not integrate to 1");
  }
}

double PiecewiseUniformDist::density(double v) const noexcept {
  if (v < breakpoints_.front() || v > breakpoints_.back()) {
    return 0.0;
  }
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), v);
  std::size_t i = static_cast<std::size_t>(it - breakpoints_.begin());
  i = std::min(i == 0 ? 0 : i - 1, densities_.size() - 1);
  return densities_[i];
}

double PiecewiseUniformDist::max_density() const noexcept {
  return *std::max_element(densities_.begin(), densities_.end());
}

double PiecewiseUniformDist::cdf(double v) const noexcept {
  if (v <= breakpoints_.front()) {
    return 0.0;
  }
  if (v >= breakpoints_.back()) {
    return 1.0;
  }
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), v);
  std::size_t i = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return cumulative_[i] + densities_[i] * (v - breakpoints_[i]);
}

double PiecewiseUniformDist::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("PiecewiseUniformDist::quantile: p outside [0, 1]");
  }
  for (std::size_t i = 0; i < densities_.size(); ++i) {
    if (densities_[i] > 0.0 && cumulative_[i + 1] >= p) {
      double v = breakpoints_[i] + (p - cumulative_[i]) / densities_[i];
      return std::clamp(v, breakpoints_[i], breakpoints_[i + 1]);
    }
  }
  return breakpoints_.back();
}

// --------------------------------------------------------------- HistogramPair

HistogramPair::HistogramPair(std::vector<double> edges, std::vector<double> mass_a, std::vector<double> mass_b)
    : edges_(std::move(edges)), mass_a_(std::move(mass_a)), mass_b_(std::move(mass_b)) {
  if (edges_.size() < 2 || mass_a_.size() + 1 != edges_.size() || mass_b_.size() != mass_a_.size()) {
    throw DomainError("HistogramPair: bin count mismatch");
  }
  for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
    if (!(edges_[i + 1] > edges_[i])) {
      throw DomainError("HistogramPair: edges must be ascending");
    }
  }
  for (auto* mass : {&mass_a_, &mass_b_}) {
    double total = 0.0;
    for (double m : *mass) {
      if (!(m >= 0.0)) {
        throw DomainError("HistogramPair: negative or non-finite mass");
      }
      total += m;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw DomainError("HistogramPair: masses must sum to 1");
    }
  }
}

HistogramPair HistogramPair::make(std::span<const double> edges_a, std::vector<double> mass_a,
                                  std::span<const double> edges_b, std::vector<double> mass_b) {
  if (!std::equal(edges_a.begin(), edges_a.end(), edges_b.begin(), edges_b.end())) {
    throw DomainError("HistogramPair: mismatched bin edges");
  }
  return HistogramPair(std::vector<double>(edges_a.begin(), edges_a.end()), std::move(mass_a),
                       std::move(mass_b));
}

HistogramPair HistogramPair::from_samples(const EmpiricalDist& a, const EmpiricalDist& b) {
  std::size_t n = std::min(a.size(), b.size());
  auto bins = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  bins = std::max<std::size_t>(bins, 1);
  double lo = std::min(a.min(), b.min());
  double hi = std::max(a.max(), b.max());
  if (!(hi > lo)) {
    // Both samples sit on a single point: one unit-width bin holds all mass.
    hi = lo + 1.0;
    bins = 1;
  }
  double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + width * static_cast<double>(i);
  }
  edges.back() = hi;

  auto fill = [&](const EmpiricalDist& d) {
    std::vector<double> mass(bins, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto bin = static_cast<std::size_t>((d.values()[i] - lo) / width);
      mass[std::min(bin, bins - 1)] += d.weights()[i];
    }
    double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    for (double& m : mass) {
      m /= total;
    }
    return mass;
  };
  return HistogramPair(std::move(edges), fill(a), fill(b));
}

// ------------------------------------------------------------------ operations

double cdf_at(const EmpiricalDist& dist, double v) noexcept { return dist.cdf(v); }
double cdf_at(const PiecewiseUniformDist& dist, double v) noexcept { return dist.cdf(v); }

double quantile(const EmpiricalDist& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw DomainError("quantile: p must lie in (0, 1]");
  }
  auto cum = dist.cumulative();
  // Tolerate rounding in the running sum so that p equal to an exact
  // cumulative weight selects that atom.
  auto it = std::lower_bound(cum.begin(), cum.end(), p - kNormTol);
  std::size_t k = std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
  return dist.sorted_values()[k];
}

double wasserstein1(const EmpiricalDist& a, const EmpiricalDist& b) { return cdf_area(a, b); }
double wasserstein1(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b) { return cdf_area(a, b); }
double wasserstein1(const EmpiricalDist& a, const PiecewiseUniformDist& b) { return cdf_area(a, b); }
double wasserstein1(const PiecewiseUniformDist& a, const EmpiricalDist& b) { return cdf_area(a, b); }

double kolmogorov(const EmpiricalDist& a, const EmpiricalDist& b) { return cdf_sup(a, b); }
double kolmogorov(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b) { return cdf_sup(a, b); }
double kolmogorov(const EmpiricalDist& a, const PiecewiseUniformDist& b) { return cdf_sup(a, b); }
double kolmogorov(const PiecewiseUniformDist& a, const EmpiricalDist& b) { return cdf_sup(a, b); }

double tv_distance(const HistogramPair& h) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    sum += std::abs(h.mass_a()[i] - h.mass_b()[i]);
  }
  return std::min(0.5 * sum, 1.0);
}

double tv_distance(const PiecewiseUniformDist& a, const PiecewiseUniformDist& b) {
  auto grid = merged_grid(a, b);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    double mid = 0.5 * (grid[k] + grid[k + 1]);
    sum += std::abs(a.density(mid) - b.density(mid)) * (grid[k + 1] - grid[k]);
  }
  return std::min(0.5 * sum, 1.0);
}

double kl_divergence(const HistogramPair& h) {
  auto smooth = [](std::span<const double> mass) {
    std::vector<double> out(mass.begin(), mass.end());
    double total = 0.0;
    for (double& m : out) {
      m += kKlSmoothing;
      total += m;
    }
    for (double& m : out) {
      m /= total;
    }
    return out;
  };
  auto p = smooth(h.mass_a());
  auto q = smooth(h.mass_b());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double expectation_difference(const EmpiricalDist& a, const EmpiricalDist& b) noexcept {
  return std::abs(a.mean() - b.mean());
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw DomainError("spearman: length mismatch");
  }
  if (xs.size() < 3) {
    throw DomainError("spearman: need at least 3 pairs");
  }
  require_finite(xs, "spearman xs");
  require_finite(ys, "spearman ys");
  auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  auto n = static_cast<double>(xs.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx;
    double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("spearman: zero rank variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double brute_force_ot(const EmpiricalDist& a, const EmpiricalDist& b) {
  if (a.size() != b.size()) {
    throw DomainError("brute_force_ot: supports must have equal size");
  }
  if (a.size() > kBruteForceOtMaxSize) {
    throw DomainError("brute_force_ot: refusing n > 8");
  }
  auto uniform = [](const EmpiricalDist& d) {
    double w0 = d.weights()[0];
    return std::all_of(d.weights().begin(), d.weights().end(),
                       [w0](double w) { return std::abs(w - w0) <= 1e-12; });
  };
  if (!uniform(a) || !uniform(b)) {
    throw DomainError("brute_force_ot: weights must be uniform");
  }
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      cost += std::abs(a.values()[i] - b.values()[perm[i]]);
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

EmpiricalDist mixture(std::span<const EmpiricalDist> components, std::span<const double> weights) {
  if (components.empty() || components.size() != weights.size()) {
    throw DomainError("mixture: need one weight per component");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw DomainError("mixture: negative weight");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("mixture: weights must sum to 1");
  }
  std::vector<double> values;
  std::vector<double> masses;
  for (std::size_t i = 0; i < components.size(); ++i) {
    auto v = components[i].values();
    auto w = components[i].weights();
    values.insert(values.end(), v.begin(), v.end());
    for (double wi : w) {
      masses.push_back(wi * weights[i]);
    }
  }
  return EmpiricalDist(std::move(values), std::move(masses));
}

EmpiricalDist pushforward(const EmpiricalDist& dist, const std::function<double(double)>& f) {
  std::vector<double> values(dist.values().begin(), dist.values().end());
  for (double& v : values) {
    v = f(v);
  }
  return EmpiricalDist(std::move(values), std::vector<double>(dist.weights().begin(), dist.weights().end()));
}

EmpiricalDist rescale(const EmpiricalDist& dist, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("rescale: scale must be positive and finite");
  }
  return pushforward(dist, [scale](double v) { return v / scale; });
}

} // namespace wrcp
