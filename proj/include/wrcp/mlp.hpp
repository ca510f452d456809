#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wrcp/matrix.hpp"

namespace wrcp {

/// Hidden width of the standard predictor.
inline constexpr std::size_t kHiddenWidth = 64;

/// Fully connected network, rectifier on hidden layers, identity output.
///
/// All parameters live in one flat vector. Layer l contributes its weight
/// matrix (out x in, row-major) followed by its bias vector.
class MlpModel {
public:
  /// `dims` = (input, hidden..., output); weights drawn uniformly from
  /// +-sqrt(6 / (fan_in + fan_out)), biases zero.
  MlpModel(std::vector<std::size_t> dims, std::uint64_t seed);

  /// The (d, 64, 64, 1) regressor.
  static MlpModel standard(std::size_t input_dim, std::uint64_t seed);

  /// Same shape with every parameter zero.
  static MlpModel zeros(std::vector<std::size_t> dims);

  std::span<const std::size_t> layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t num_layers() const noexcept { return dims_.size() - 1; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<const double> weight(std::size_t layer) const noexcept;
  std::span<const double> bias(std::size_t layer) const noexcept;
  std::span<double> weight(std::size_t layer) noexcept;
  std::span<double> bias(std::size_t layer) noexcept;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;

  bool operator==(const MlpModel&) const = default;

private:
  MlpModel() = default;
  void layout();

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_; // start of each layer's weights
  std::vector<double> params_;
};

/// Post-activation outputs of every layer; `layers[0]` is the input batch.
struct ForwardCache {
  std::vector<Matrix> layers;

  std::span<const double> output() const noexcept { return layers.back().data(); }
};

ForwardCache mlp_forward(const MlpModel& model, const Matrix& x);
double mlp_forward(const MlpModel& model, std::span<const double> x);

/// Gradients with the same flat layout as `MlpModel::parameters()`.
class GradBuffer {
public:
  GradBuffer() = default;
  explicit GradBuffer(const MlpModel& model) : values_(model.parameter_count(), 0.0) {}

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  GradBuffer& operator+=(const GradBuffer& other);

private:
  std::vector<double> values_;
};

/// Reverse-mode gradient of sum_j g_j * h(x_j) with respect to every
/// parameter, using intermediates from `mlp_forward` on the same batch.
GradBuffer backward(const MlpModel& model, const ForwardCache& cache, std::span<const double> grad_outputs);
GradBuffer backward(const MlpModel& model, std::span<const double> grad_outputs, const Matrix& inputs);

/// Adaptive-moment optimizer settings.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class OptimizerState {
public:
  OptimizerState(const MlpModel& model, AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }

private:
  friend void optimizer_step(MlpModel&, const GradBuffer&, OptimizerState&);

  AdamConfig config_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  std::uint64_t step_ = 0;
};

/// One bias-corrected adaptive-moment update. Throws NumericalError and
/// leaves everything untouched if any gradient entry is non-finite.
void optimizer_step(MlpModel& model, const GradBuffer& grads, OptimizerState& state);

struct MseResult {
  double loss;
  std::vector<double> grad; // d loss / d prediction
};

MseResult mse_loss(std::span<const double> predictions, std::span<const double> targets);

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

} // namespace wrcp
