#pragma once

// Small dense feedforward networks with reverse-mode gradients and Adam.
// Batches are row-major: one sample per row.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace gdoe::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { kRelu, kTanh, kSigmoid, kLinear };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& text);

/// Penalties on one layer. Activity penalties act on the layer output and
/// are averaged over the batch rows.
struct Regularization {
  double kernel_l1 = 0.0;
  double kernel_l2 = 0.0;
  double bias_l1 = 0.0;
  double bias_l2 = 0.0;
  double activity_l1 = 0.0;
  double activity_l2 = 0.0;

  bool any() const {
    return kernel_l1 != 0.0 || kernel_l2 != 0.0 || bias_l1 != 0.0 || bias_l2 != 0.0 ||
           activity_l1 != 0.0 || activity_l2 != 0.0;
  }
};

struct DenseLayer {
  Matrix weights;  // in x out
  RowVector bias;  // out
  Activation activation = Activation::kLinear;
  Regularization regularization;

  Eigen::Index in_width() const { return weights.rows(); }
  Eigen::Index out_width() const { return weights.cols(); }
};

enum class Init {
  kScaled,      // N(0, 2/fan_in) for relu layers, N(0, 1/fan_in) otherwise
  kNormal005,   // N(0, 0.05^2)
};

struct LayerSpec {
  Eigen::Index width = 0;
  Activation activation = Activation::kLinear;
  Regularization regularization;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Random initialization; biases start at zero.
  static DenseNet create(Eigen::Index input_width, std::span<const LayerSpec> layers,
                         std::mt19937_64& rng, Init init = Init::kScaled);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::Index input_width() const;
  Eigen::Index output_width() const;

  /// Shape composition and finiteness.
  void validate() const;

  std::size_t parameter_count() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-layer values kept for the backward pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // affine outputs
  std::vector<Matrix> post;  // activations
};

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<RowVector> bias;
  Matrix input;  // d loss / d input, for chaining networks

  /// Zeroed gradients shaped like `net`.
  static Gradients zeros_like(const DenseNet& net);
};

/// Exact gradients of the composed function given d loss / d output.
/// Regularization gradients are added for every configured penalty.
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad);

/// Sum of all configured penalties (kernel, bias, activity) for this pass.
double regularization_loss(const DenseNet& net, const ForwardCache& cache);

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d pred
};

/// Mean binary cross-entropy over all elements, pred clamped to
/// [1e-7, 1 - 1e-7].
LossResult binary_crossentropy(const Matrix& pred, const Matrix& target);

/// Mean squared error over all elements.
LossResult mse(const Matrix& pred, const Matrix& target);

/// A named view of one parameter tensor (or its gradient).
struct ParamView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

/// Views over every weight matrix and bias vector, named "<prefix>.<i>.w|b".
std::vector<ParamView> parameter_views(DenseNet& net, const std::string& prefix);
std::vector<ParamView> gradient_views(Gradients& grads, const std::string& prefix);

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update. Throws Error(kNumeric) naming the first
/// parameter with a non-finite gradient; nothing is modified in that case.
void adam_step(std::span<const ParamView> params, std::span<const ParamView> grads,
               AdamState& state);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& j);

inline constexpr int kWeightFormatVersion = 1;

}  // namespace gdoe::nn
