#include "wrcp/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "wrcp/error.hpp"
#include "wrcp/kv.hpp"

namespace wrcp {

namespace {

// stream tags for derive_seed
constexpr std::uint64_t kTagTrial = 0x7472;
constexpr std::uint64_t kTagSource = 0x5352;
constexpr std::uint64_t kTagCalib = 0x4341;
constexpr std::uint64_t kTagPool = 0x504f;
constexpr std::uint64_t kTagTest = 0x5445;
constexpr std::uint64_t kTagSplit = 0x5350;

const double kXiStd = std::sqrt(10.0);
constexpr double kXiMinMagnitude = 0.5;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric value '" + s + "'", line);
  }
  return v;
}

int parse_int(const std::string& s, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("non-integer source_id '" + s + "'", line);
  }
  return v;
}

// Reads the header and returns the feature dimension.
std::size_t parse_header(const std::string& line) {
  auto fields = split_fields(line);
  if (fields.size() < 3 || fields.front() != "source_id" || fields.back() != "y") {
    throw ParseError("header must be source_id,x_1,...,x_d,y", 1);
  }
  for (std::size_t c = 1; c + 1 < fields.size(); ++c) {
    if (fields[c] != "x_" + std::to_string(c)) {
      throw ParseError("missing column x_" + std::to_string(c), 1);
    }
  }
  return fields.size() - 2;
}

template <class RowFn> void for_each_csv_row(const std::filesystem::path& path, RowFn&& on_row) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(is, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw ParseError("empty file " + path.string(), 1);
  }
  const std::size_t d = parse_header(line);
  std::size_t line_no = 1;
  std::vector<double> x(d);
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    auto fields = split_fields(line);
    if (fields.size() != d + 2) {
      throw ParseError(fmt::format("expected {} fields, found {}", d + 2, fields.size()), line_no);
    }
    int id = parse_int(fields[0], line_no);
    for (std::size_t c = 0; c < d; ++c) {
      x[c] = parse_double(fields[c + 1], line_no);
    }
    double y = parse_double(fields.back(), line_no);
    on_row(id, std::span<const double>(x), y, d);
  }
}

void validate_simplex(std::span<const double> w, std::size_t k) {
  if (w.size() != k) {
    throw DomainError("mixture weights: need one weight per source");
  }
  double total = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0)) {
      throw DomainError("mixture weights: negative entry");
    }
    total += wi;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("mixture weights: must sum to 1");
  }
}

std::string join_weights(std::span<const double> w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    out += fmt::format("{}{:.17g}", i ? "," : "", w[i]);
  }
  return out;
}

} // namespace

// ------------------------------------------------------------------ SampleSet

void SampleSet::append(const SampleSet& other) {
  for (std::size_t r = 0; r < other.size(); ++r) {
    x.append_row(other.x.row(r));
  }
  y.insert(y.end(), other.y.begin(), other.y.end());
  source.insert(source.end(), other.source.begin(), other.source.end());
}

SampleSet SampleSet::select(std::span<const std::size_t> rows) const {
  SampleSet out;
  out.x = x.select_rows(rows);
  for (auto r : rows) {
    out.y.push_back(y[r]);
    out.source.push_back(source[r]);
  }
  return out;
}

SampleSet SampleSet::filter_source(int id) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < size(); ++r) {
    if (source[r] == id) {
      rows.push_back(r);
    }
  }
  SampleSet out = select(rows);
  if (out.size() == 0) {
    out.x = Matrix(0, dim());
  }
  return out;
}

// ------------------------------------------------------------- synthetic tasks

const char* to_string(ConceptKind kind) noexcept {
  switch (kind) {
  case ConceptKind::linear: return "linear";
  case ConceptKind::scaled_noise: return "scaled_noise";
  case ConceptKind::reciprocal: return "reciprocal";
  case ConceptKind::additive: return "additive";
  }
  return "linear";
}

ConceptKind concept_kind_from_string(const std::string& name) {
  for (auto k : {ConceptKind::linear, ConceptKind::scaled_noise, ConceptKind::reciprocal, ConceptKind::additive}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  throw DomainError("unknown concept kind '" + name + "'");
}

double base_function(std::span<const double> x) noexcept {
  double v = std::sin(x[0]);
  if (x.size() > 1) {
    v += 0.5 * x[1];
  }
  return v;
}

SyntheticTask SyntheticTask::from_knobs(const SyntheticKnobs& knobs, std::uint64_t seed) {
  if (knobs.k < 1 || knobs.d < 1) {
    throw DomainError("SyntheticTask: k and d must be positive");
  }
  if (!(knobs.noise >= 0.0) || !(knobs.cov_scale > 0.0) || !(knobs.noise_spread >= 0.0)) {
    throw DomainError("SyntheticTask: invalid scale knob");
  }
  SyntheticTask task;
  task.seed = seed;
  task.knobs = knobs;
  const std::size_t k = knobs.k;
  for (std::size_t i = 0; i < k; ++i) {
    SourceSpec s;
    s.mean.assign(knobs.d, 0.0);
    double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    if (knobs.d == 1) {
      s.mean[0] = knobs.r_cov * (static_cast<double>(i) - 0.5 * static_cast<double>(k - 1));
    } else {
      s.mean[0] = knobs.r_cov * std::cos(angle);
      s.mean[1] = knobs.r_cov * std::sin(angle);
    }
    s.cov_scale = knobs.cov_scale;
    s.noise = knobs.noise * (1.0 + knobs.noise_spread * static_cast<double>(i));
    if (knobs.family == "linear") {
      s.kind = ConceptKind::linear;
      s.concept_coef = knobs.concept_scale * (static_cast<double>(i) - 0.5 * static_cast<double>(k - 1));
    } else if (knobs.family == "xi") {
      static constexpr ConceptKind kinds[] = {ConceptKind::scaled_noise, ConceptKind::reciprocal,
                                              ConceptKind::additive};
      s.kind = kinds[i % 3];
    } else {
      throw DomainError("SyntheticTask: unknown family '" + knobs.family + "'");
    }
    task.sources.push_back(std::move(s));
  }
  task.validate();
  return task;
}

void SyntheticTask::validate() const {
  if (sources.empty()) {
    throw DomainError("SyntheticTask: no sources");
  }
  for (const auto& s : sources) {
    if (s.mean.size() != d() || s.mean.empty()) {
      throw DomainError("SyntheticTask: inconsistent feature dimension");
    }
    if (!(s.noise >= 0.0) || !(s.cov_scale > 0.0)) {
      throw DomainError("SyntheticTask: invalid noise or covariance scale");
    }
  }
}

double SyntheticTask::truth(std::size_t i, std::span<const double> x) const {
  const auto& s = sources.at(i);
  double v = base_function(x);
  if (s.kind == ConceptKind::linear) {
    v += s.concept_coef * x[0];
  }
  return v;
}

SampleSet SyntheticTask::draw(std::size_t i, std::size_t n, Rng& rng) const {
  const auto& s = sources.at(i);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::normal_distribution<double> xi_dist(0.0, kXiStd);
  SampleSet out;
  out.x = Matrix(n, d());
  out.y.resize(n);
  out.source.assign(n, static_cast<int>(i));
  for (std::size_t r = 0; r < n; ++r) {
    auto row = out.x.row(r);
    for (std::size_t c = 0; c < d(); ++c) {
      row[c] = s.mean[c] + s.cov_scale * std_normal(rng);
    }
    double y = truth(i, row) + s.noise * std_normal(rng);
    switch (s.kind) {
    case ConceptKind::linear: break;
    case ConceptKind::scaled_noise: y += y / 1000.0 * xi_dist(rng); break;
    case ConceptKind::reciprocal: {
      double xi = xi_dist(rng);
      if (std::abs(xi) < kXiMinMagnitude) {
        xi = std::copysign(kXiMinMagnitude, xi);
      }
      y += y / xi;
      break;
    }
    case ConceptKind::additive: y += xi_dist(rng); break;
    }
    out.y[r] = y;
  }
  return out;
}

DatasetBundle gen_synthetic(const SyntheticTask& task, const GenSizes& sizes, std::size_t trial) {
  task.validate();
  if (sizes.n_per_source < 1 || sizes.n_cal < task.k() || sizes.m_per_test < 1 || sizes.n_pool < 1) {
    throw DomainError("gen_synthetic: sizes must be positive (n_cal >= k)");
  }
  const std::uint64_t base = derive_seed(task.seed, kTagTrial, trial);
  DatasetBundle b;
  b.seed = task.seed;
  b.trial = trial;
  b.task = task;
  const std::size_t k = task.k();
  for (std::size_t i = 0; i < k; ++i) {
    Rng rng(derive_seed(base, kTagSource, i));
    b.sources.push_back(task.draw(i, sizes.n_per_source, rng));
  }
  b.calibration.x = Matrix(0, task.d());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t n_i = sizes.n_cal / k + (i < sizes.n_cal % k ? 1 : 0);
    Rng rng(derive_seed(base, kTagCalib, i));
    b.calibration.append(task.draw(i, n_i, rng));
  }
  for (std::size_t i = 0; i < k; ++i) {
    Rng rng(derive_seed(base, kTagPool, i));
    b.pools.push_back(task.draw(i, sizes.n_pool, rng));
  }
  for (std::size_t j = 0; j < sizes.n_test_sets; ++j) {
    b.tests.push_back(make_random_mixture_test(b, sizes.m_per_test, derive_seed(base, kTagTest, j)));
  }
  b.meta["n_per_source"] = std::to_string(sizes.n_per_source);
  b.meta["n_cal"] = std::to_string(sizes.n_cal);
  b.meta["m_per_test"] = std::to_string(sizes.m_per_test);
  b.meta["n_pool"] = std::to_string(sizes.n_pool);
  return b;
}

SampleSet make_mixture_test(const DatasetBundle& bundle, std::span<const double> weights, std::size_t m,
                            std::uint64_t seed) {
  validate_simplex(weights, bundle.k());
  Rng rng(seed);
  SampleSet out;
  out.x = Matrix(0, bundle.dim());
  if (bundle.task) {
    for (std::size_t r = 0; r < m; ++r) {
      out.append(bundle.task->draw(sample_index(weights, rng), 1, rng));
    }
    return out;
  }
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    if (weights[i] > 0.0 && (i >= bundle.pools.size() || bundle.pools[i].size() == 0)) {
      throw DomainError("make_mixture_test: source " + std::to_string(i) + " has no held-out rows");
    }
  }
  std::vector<std::size_t> pick(1);
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t i = sample_index(weights, rng);
    std::uniform_int_distribution<std::size_t> row(0, bundle.pools[i].size() - 1);
    pick[0] = row(rng);
    out.append(bundle.pools[i].select(pick));
  }
  return out;
}

TestSet make_random_mixture_test(const DatasetBundle& bundle, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  TestSet t;
  t.weights = sample_simplex(bundle.k(), rng);
  t.data = make_mixture_test(bundle, t.weights, m, derive_seed(seed, kTagTest));
  return t;
}

// --------------------------------------------------------------------- CSV I/O

std::vector<SampleSet> read_source_csv(const std::filesystem::path& path) {
  std::map<int, SampleSet> groups;
  for_each_csv_row(path, [&](int id, std::span<const double> x, double y, std::size_t d) {
    auto& g = groups[id];
    if (g.x.cols() == 0) {
      g.x = Matrix(0, d);
    }
    g.x.append_row(x);
    g.y.push_back(y);
    g.source.push_back(id);
  });
  if (groups.empty()) {
    throw ParseError("no data rows in " + path.string(), 2);
  }
  std::vector<SampleSet> out;
  for (auto& [id, g] : groups) {
    out.push_back(std::move(g));
  }
  return out;
}

SampleSet read_sample_csv(const std::filesystem::path& path) {
  SampleSet out;
  bool first = true;
  for_each_csv_row(path, [&](int id, std::span<const double> x, double y, std::size_t d) {
    if (first) {
      out.x = Matrix(0, d);
      first = false;
    }
    out.x.append_row(x);
    out.y.push_back(y);
    out.source.push_back(id);
  });
  return out;
}

void write_sample_csv(const SampleSet& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
  std::string header = "source_id";
  for (std::size_t c = 1; c <= data.dim(); ++c) {
    header += ",x_" + std::to_string(c);
  }
  os << header << ",y\n";
  fmt::memory_buffer buf;
  for (std::size_t r = 0; r < data.size(); ++r) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{}", data.source[r]);
    for (double v : data.x.row(r)) {
      fmt::format_to(std::back_inserter(buf), ",{:.17g}", v);
    }
    fmt::format_to(std::back_inserter(buf), ",{:.17g}\n", data.y[r]);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

DatasetBundle split_sources(std::vector<SampleSet> groups, const SplitOptions& options) {
  if (groups.empty()) {
    throw DomainError("split_sources: no sources");
  }
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw DomainError("split_sources: train_fraction must lie in (0, 1)");
  }
  DatasetBundle b;
  b.seed = options.seed;
  const std::size_t d = groups.front().dim();
  b.calibration.x = Matrix(0, d);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& g = groups[i];
    const std::size_t n = g.size();
    if (g.dim() != d) {
      throw DomainError("split_sources: sources disagree on feature dimension");
    }
    if (n < 3) {
      throw InsufficientDataError("split_sources: source " + std::to_string(i) + " needs at least 3 rows");
    }
    // relabel to dense indices
    std::fill(g.source.begin(), g.source.end(), static_cast<int>(i));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(options.seed, kTagSplit, i));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(n))), 1, n - 2);
    std::size_t n_cal = std::max<std::size_t>(1, (n - n_train) / 2);
    std::span<const std::size_t> all(perm);
    b.sources.push_back(g.select(all.subspan(0, n_train)));
    b.calibration.append(g.select(all.subspan(n_train, n_cal)));
    b.pools.push_back(g.select(all.subspan(n_train + n_cal)));
  }
  for (std::size_t j = 0; j < options.n_test_sets; ++j) {
    b.tests.push_back(make_random_mixture_test(b, options.m_per_test, derive_seed(options.seed, kTagTest, j)));
  }
  b.meta["train_fraction"] = fmt::format("{:.17g}", options.train_fraction);
  b.meta["m_per_test"] = std::to_string(options.m_per_test);
  return b;
}

DatasetBundle load_csv(const std::filesystem::path& path, const SplitOptions& options) {
  return split_sources(read_source_csv(path), options);
}

// ------------------------------------------------------------ bundle directory

void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "sources", ec);
  fs::create_directories(dir / "tests", ec);
  fs::create_directories(dir / "pools", ec);
  if (ec) {
    throw std::runtime_error("cannot create bundle directory " + dir.string() + ": " + ec.message());
  }
  for (std::size_t i = 0; i < bundle.k(); ++i) {
    write_sample_csv(bundle.sources[i], dir / "sources" / fmt::format("source_{}.csv", i));
  }
  for (std::size_t i = 0; i < bundle.pools.size(); ++i) {
    write_sample_csv(bundle.pools[i], dir / "pools" / fmt::format("pool_{}.csv", i));
  }
  write_sample_csv(bundle.calibration, dir / "calibration.csv");
  for (std::size_t j = 0; j < bundle.tests.size(); ++j) {
    write_sample_csv(bundle.tests[j].data, dir / "tests" / fmt::format("test_{}.csv", j));
    std::ofstream ws(dir / "tests" / fmt::format("test_{}.weights", j), std::ios::trunc);
    ws << join_weights(bundle.tests[j].weights) << '\n';
    if (!ws) {
      throw std::runtime_error("cannot write weights for test " + std::to_string(j) + " in " + dir.string());
    }
  }
  KeyValues meta = bundle.meta;
  meta["seed"] = std::to_string(bundle.seed);
  meta["trial"] = std::to_string(bundle.trial);
  meta["k"] = std::to_string(bundle.k());
  meta["d"] = std::to_string(bundle.dim());
  meta["n_test_sets"] = std::to_string(bundle.tests.size());
  meta["synthetic"] = bundle.task ? "1" : "0";
  if (bundle.task) {
    const auto& kn = bundle.task->knobs;
    meta["task.seed"] = std::to_string(bundle.task->seed);
    meta["task.k"] = std::to_string(kn.k);
    meta["task.d"] = std::to_string(kn.d);
    meta["task.r_cov"] = fmt::format("{:.17g}", kn.r_cov);
    meta["task.cov_scale"] = fmt::format("{:.17g}", kn.cov_scale);
    meta["task.concept_scale"] = fmt::format("{:.17g}", kn.concept_scale);
    meta["task.noise"] = fmt::format("{:.17g}", kn.noise);
    meta["task.noise_spread"] = fmt::format("{:.17g}", kn.noise_spread);
    meta["task.family"] = kn.family;
  }
  write_key_values(meta, dir / "meta.txt");
}

DatasetBundle read_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("bundle directory not found: " + dir.string());
  }
  auto meta = read_key_values(dir / "meta.txt");
  DatasetBundle b;
  b.seed = kv_u64(meta, "seed");
  b.trial = kv_size(meta, "trial");
  const std::size_t k = kv_size(meta, "k");
  const std::size_t n_tests = kv_size(meta, "n_test_sets");
  for (std::size_t i = 0; i < k; ++i) {
    b.sources.push_back(read_sample_csv(dir / "sources" / fmt::format("source_{}.csv", i)));
    auto pool = dir / "pools" / fmt::format("pool_{}.csv", i);
    if (std::filesystem::exists(pool)) {
      b.pools.push_back(read_sample_csv(pool));
    }
  }
  b.calibration = read_sample_csv(dir / "calibration.csv");
  for (std::size_t j = 0; j < n_tests; ++j) {
    TestSet t;
    t.data = read_sample_csv(dir / "tests" / fmt::format("test_{}.csv", j));
    std::ifstream ws(dir / "tests" / fmt::format("test_{}.weights", j));
    std::string line;
    if (!ws || !std::getline(ws, line)) {
      throw std::runtime_error("missing weights for test " + std::to_string(j) + " in " + dir.string());
    }
    for (const auto& f : split_fields(line)) {
      t.weights.push_back(parse_double(f, 1));
    }
    b.tests.push_back(std::move(t));
  }
  if (meta.count("synthetic") && meta.at("synthetic") == "1") {
    SyntheticKnobs kn;
    kn.k = kv_size(meta, "task.k");
    kn.d = kv_size(meta, "task.d");
    kn.r_cov = kv_double(meta, "task.r_cov");
    kn.cov_scale = kv_double(meta, "task.cov_scale");
    kn.concept_scale = kv_double(meta, "task.concept_scale");
    kn.noise = kv_double(meta, "task.noise");
    kn.noise_spread = kv_double(meta, "task.noise_spread");
    kn.family = meta.at("task.family");
    b.task = SyntheticTask::from_knobs(kn, kv_u64(meta, "task.seed"));
  }
  for (const char* key : {"seed", "trial", "k", "d", "n_test_sets", "synthetic"}) {
    meta.erase(key);
  }
  for (auto it = meta.begin(); it != meta.end();) {
    it = it->first.rfind("task.", 0) == 0 ? meta.erase(it) : std::next(it);
  }
  b.meta = std::move(meta);
  return b;
}

} // namespace wrcp
