#pragma once

// Multi-source regression data: synthetic generation with separate
// covariate- and concept-shift knobs, mixture test sets, CSV ingestion and
// bundle (de)serialization.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wrcp/matrix.hpp"
#include "wrcp/rng.hpp"

namespace wrcp {

/// Feature rows, targets and the source each row came from.
struct SampleSet {
  Matrix x;
  std::vector<double> y;
  std::vector<int> source;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return x.cols(); }

  void append(const SampleSet& other);
  SampleSet select(std::span<const std::size_t> rows) const;
  /// Rows whose source label equals `id`.
  SampleSet filter_source(int id) const;

  bool operator==(const SampleSet&) const = default;
};

/// How a source perturbs the shared base regression function.
enum class ConceptKind {
  linear,       // y = base(x) + c * x_1 + noise
  scaled_noise, // y += y / 1000 * xi
  reciprocal,   // y += y / xi, |xi| clamped to >= 0.5
  additive,     // y += xi
};

const char* to_string(ConceptKind kind) noexcept;
ConceptKind concept_kind_from_string(const std::string& name);

/// Generative law of one source: x ~ N(mean, cov_scale^2 I), then the concept.
struct SourceSpec {
  std::vector<double> mean;
  double cov_scale = 1.0;
  ConceptKind kind = ConceptKind::linear;
  double concept_coef = 0.0;
  double noise = 0.1;
};

/// Scalar knobs from which a task is built; these round-trip through the
/// bundle meta file.
struct SyntheticKnobs {
  std::size_t k = 3;
  std::size_t d = 2;
  double r_cov = 1.0;         // radius of the circle holding source means
  double cov_scale = 1.0;     // per-source feature standard deviation
  double concept_scale = 1.0; // linear concept coefficients are concept_scale * (i - (k-1)/2)
  double noise = 0.1;         // base noise standard deviation
  double noise_spread = 0.0;  // source i noise = noise * (1 + noise_spread * i)
  std::string family = "linear"; // "linear" or "xi" (three xi-style sources)
};

struct SyntheticTask {
  std::vector<SourceSpec> sources;
  std::uint64_t seed = 0;
  SyntheticKnobs knobs;

  static SyntheticTask from_knobs(const SyntheticKnobs& knobs, std::uint64_t seed);

  std::size_t k() const noexcept { return sources.size(); }
  std::size_t d() const noexcept { return sources.empty() ? 0 : sources.front().mean.size(); }

  /// Noise-free conditional mean of source i.
  double truth(std::size_t i, std::span<const double> x) const;

  /// n fresh draws from source i.
  SampleSet draw(std::size_t i, std::size_t n, Rng& rng) const;

  void validate() const;
};

double base_function(std::span<const double> x) noexcept;

struct TestSet {
  std::vector<double> weights;
  SampleSet data;
};

struct DatasetBundle {
  std::vector<SampleSet> sources;     // training sample per source
  SampleSet calibration;              // pooled over sources, labels kept
  std::vector<TestSet> tests;
  std::vector<SampleSet> pools;       // per-source held-out rows (mixture material)
  std::optional<SyntheticTask> task;  // ground truth when synthetic
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  std::map<std::string, std::string> meta;

  std::size_t k() const noexcept { return sources.size(); }
  std::size_t dim() const noexcept { return calibration.dim(); }
};

struct GenSizes {
  std::size_t n_per_source = 300;
  std::size_t n_cal = 300;
  std::size_t n_test_sets = 30;
  std::size_t m_per_test = 300;
  std::size_t n_pool = 1000; // held-out rows per source
};

DatasetBundle gen_synthetic(const SyntheticTask& task, const GenSizes& sizes, std::size_t trial = 0);

/// A test set drawn from the mixture sum_i w_i D^(i). Synthetic bundles draw
/// fresh rows from the source laws; others resample the held-out pools with
/// replacement.
SampleSet make_mixture_test(const DatasetBundle& bundle, std::span<const double> weights, std::size_t m,
                            std::uint64_t seed);
/// Mixture weights drawn uniformly from the simplex.
TestSet make_random_mixture_test(const DatasetBundle& bundle, std::size_t m, std::uint64_t seed);

/// Reads `source_id,x_1..x_d,y` rows, grouped by ascending source id.
std::vector<SampleSet> read_source_csv(const std::filesystem::path& path);

struct SplitOptions {
  double train_fraction = 0.5; // of each source's rows
  std::size_t n_test_sets = 30;
  std::size_t m_per_test = 300;
  std::uint64_t seed = 0;
};

/// Per source: training rows sampled without replacement, the remainder split
/// into a calibration part and a test part. Calibration parts are pooled; test
/// sets mix the test parts with replacement.
DatasetBundle split_sources(std::vector<SampleSet> groups, const SplitOptions& options);
DatasetBundle load_csv(const std::filesystem::path& path, const SplitOptions& options);

void write_sample_csv(const SampleSet& data, const std::filesystem::path& path);
SampleSet read_sample_csv(const std::filesystem::path& path);

void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle read_bundle(const std::filesystem::path& dir);

} // namespace wrcp
