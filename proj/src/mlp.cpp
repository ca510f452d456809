#include "wrcp/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "wrcp/error.hpp"
#include "wrcp/kernels.hpp"

namespace wrcp {

namespace {

constexpr char kMagic[8] = {'W', 'R', 'C', 'P', 'M', 'L', 'P', '1'};
constexpr const char* kHiddenActivation = "relu";
constexpr const char* kOutputActivation = "identity";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T> void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T> T read_pod(std::istream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  }
  return value;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::filesystem::path& path) {
  auto len = read_pod<std::uint32_t>(is, path);
  if (len > 64) {
    throw std::runtime_error("load_checkpoint: corrupt activation tag in " + path.string());
  }
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) {
    throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  }
  return s;
}

} // namespace

// -------------------------------------------------------------------- MlpModel

void MlpModel::layout() {
  if (dims_.size() < 2) {
    throw DomainError("MlpModel: need at least input and output widths");
  }
  for (auto d : dims_) {
    if (d == 0) {
      throw DomainError("MlpModel: zero-width layer");
    }
  }
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpModel::MlpModel(std::vector<std::size_t> dims, std::uint64_t seed) : dims_(std::move(dims)) {
  layout();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    double limit = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (double& w : weight(l)) {
      w = unif(rng);
    }
  }
}

MlpModel MlpModel::standard(std::size_t input_dim, std::uint64_t seed) {
  MlpModel m({input_dim, kHiddenWidth, kHiddenWidth, 1}, seed);
  const std::size_t d = input_dim;
  if (m.parameter_count() != d * kHiddenWidth + kHiddenWidth + kHiddenWidth * kHiddenWidth + kHiddenWidth +
                                 kHiddenWidth + 1) {
    throw std::logic_error("MlpModel::standard: unexpected parameter count");
  }
  return m;
}

MlpModel MlpModel::zeros(std::vector<std::size_t> dims) {
  MlpModel m;
  m.dims_ = std::move(dims);
  m.layout();
  return m;
}

std::span<const double> MlpModel::weight(std::size_t layer) const noexcept {
  return {params_.data() + offsets_[layer], dims_[layer] * dims_[layer + 1]};
}
std::span<const double> MlpModel::bias(std::size_t layer) const noexcept {
  return {params_.data() + offsets_[layer] + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}
std::span<double> MlpModel::weight(std::size_t layer) noexcept {
  return {params_.data() + offsets_[layer], dims_[layer] * dims_[layer + 1]};
}
std::span<double> MlpModel::bias(std::size_t layer) noexcept {
  return {params_.data() + offsets_[layer] + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}

double MlpModel::predict(std::span<const double> x) const { return mlp_forward(*this, x); }

std::vector<double> MlpModel::predict(const Matrix& x) const {
  auto cache = mlp_forward(*this, x);
  auto out = cache.output();
  return {out.begin(), out.end()};
}

// --------------------------------------------------------------- forward/back

ForwardCache mlp_forward(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw DomainError("mlp_forward: input dimension mismatch");
  }
  auto dims = model.layer_dims();
  ForwardCache cache;
  cache.layers.reserve(dims.size());
  cache.layers.push_back(x);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix out(x.rows(), dims[l + 1]);
    const bool hidden = l + 1 < model.num_layers();
    kernels::parallel::dense_forward(cache.layers.back(), model.weight(l), model.bias(l), hidden, out);
    cache.layers.push_back(std::move(out));
  }
  return cache;
}

double mlp_forward(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw DomainError("mlp_forward: input dimension mismatch");
  }
  Matrix one(1, x.size(), std::vector<double>(x.begin(), x.end()));
  auto cache = mlp_forward(model, one);
  return cache.output()[0];
}

GradBuffer& GradBuffer::operator+=(const GradBuffer& other) {
  if (other.values_.size() != values_.size()) {
    throw DomainError("GradBuffer: shape mismatch");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] += other.values_[i];
  }
  return *this;
}

GradBuffer backward(const MlpModel& model, const ForwardCache& cache, std::span<const double> grad_outputs) {
  const std::size_t layers = model.num_layers();
  if (cache.layers.size() != layers + 1 || cache.layers.front().cols() != model.input_dim()) {
    throw DomainError("backward: forward cache does not match the model");
  }
  const std::size_t n = cache.layers.front().rows();
  auto dims = model.layer_dims();
  if (grad_outputs.size() != n * dims.back()) {
    throw DomainError("backward: upstream gradient has the wrong length");
  }
  GradBuffer grads(model);
  auto flat = grads.values();

  Matrix delta(n, dims.back(), std::vector<double>(grad_outputs.begin(), grad_outputs.end()));
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in_dim = dims[l];
    const std::size_t out_dim = dims[l + 1];
    auto w_offset = static_cast<std::size_t>(model.weight(l).data() - model.parameters().data());
    std::span<double> d_weight(flat.data() + w_offset, in_dim * out_dim);
    std::span<double> d_bias(flat.data() + w_offset + in_dim * out_dim, out_dim);
    const Matrix& input = cache.layers[l];
    kernels::parallel::dense_weight_grad(delta, input, d_weight, d_bias);
    if (l == 0) {
      break;
    }
    Matrix d_in(n, in_dim);
    kernels::parallel::dense_input_grad(delta, model.weight(l), d_in);
    // rectifier derivative on the hidden layer that produced `input`
    for (std::size_t i = 0; i < d_in.data().size(); ++i) {
      if (!(input.data()[i] > 0.0)) {
        d_in.data()[i] = 0.0;
      }
    }
    delta = std::move(d_in);
  }
  return grads;
}

GradBuffer backward(const MlpModel& model, std::span<const double> grad_outputs, const Matrix& inputs) {
  return backward(model, mlp_forward(model, inputs), grad_outputs);
}

// ------------------------------------------------------------------- optimizer

OptimizerState::OptimizerState(const MlpModel& model, AdamConfig config)
    : config_(config), first_moment_(model.parameter_count(), 0.0), second_moment_(model.parameter_count(), 0.0) {
  if (!(config_.learning_rate > 0.0) || !(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.epsilon > 0.0)) {
    throw DomainError("OptimizerState: invalid optimizer settings");
  }
}

void optimizer_step(MlpModel& model, const GradBuffer& grads, OptimizerState& state) {
  auto params = model.parameters();
  auto g = grads.values();
  if (g.size() != params.size() || state.first_moment_.size() != params.size()) {
    throw DomainError("optimizer_step: shape mismatch");
  }
  for (double v : g) {
    if (!std::isfinite(v)) {
      throw NumericalError("optimizer_step: non-finite gradient, update refused");
    }
  }
  const auto& c = state.config_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment_[i];
    double& v = state.second_moment_[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g[i];
    v = c.beta2 * v + (1.0 - c.beta2) * g[i] * g[i];
    double m_hat = m / correction1;
    double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

MseResult mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) {
    throw DomainError("mse_loss: empty input");
  }
  if (predictions.size() != targets.size()) {
    throw DomainError("mse_loss: length mismatch");
  }
  const auto n = static_cast<double>(predictions.size());
  MseResult r{0.0, std::vector<double>(predictions.size())};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double diff = predictions[i] - targets[i];
    r.loss += diff * diff;
    r.grad[i] = 2.0 * diff / n;
  }
  r.loss /= n;
  return r;
}

// ------------------------------------------------------------------ checkpoint

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  }
  os.write(kMagic, sizeof(kMagic));
  auto dims = model.layer_dims();
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  write_string(os, kHiddenActivation);
  write_string(os, kOutputActivation);
  write_pod<std::uint64_t>(os, model.parameter_count());
  auto params = model.parameters();
  os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()));
  if (!os) {
    throw std::runtime_error("save_checkpoint: write failed for " + path.string());
  }
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  }
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  }
  auto count = read_pod<std::uint32_t>(is, path);
  if (count < 2 || count > 16) {
    throw std::runtime_error("load_checkpoint: corrupt layer count in " + path.string());
  }
  std::vector<std::size_t> dims(count);
  for (auto& d : dims) {
    d = read_pod<std::uint32_t>(is, path);
  }
  if (read_string(is, path) != kHiddenActivation || read_string(is, path) != kOutputActivation) {
    throw std::runtime_error("load_checkpoint: unsupported activation in " + path.string());
  }
  MlpModel model = MlpModel::zeros(std::move(dims));
  auto n = read_pod<std::uint64_t>(is, path);
  if (n != model.parameter_count()) {
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path.string());
  }
  auto params = model.parameters();
  if (!is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()))) {
    throw std::runtime_error("load_checkpoint: truncated parameters in " + path.string());
  }
  for (double p : params) {
    if (!std::isfinite(p)) {
      throw std::runtime_error("load_checkpoint: non-finite parameter in " + path.string());
    }
  }
  return model;
}

} // namespace wrcp
