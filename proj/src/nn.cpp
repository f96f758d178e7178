#include "gdoe/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gdoe/error.hpp"

namespace gdoe::nn {

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kLinear: return "linear";
  }
  return "?";
}

Activation activation_from_string(const std::string& text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "tanh") return Activation::kTanh;
  if (text == "sigmoid") return Activation::kSigmoid;
  if (text == "linear") return Activation::kLinear;
  throw Error(ErrorCode::kValidation, "unknown activation '" + text + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

DenseNet DenseNet::create(Eigen::Index input_width, std::span<const LayerSpec> layers,
                          std::mt19937_64& rng, Init init) {
  if (input_width < 1 || layers.empty()) {
    throw Error(ErrorCode::kValidation, "a network needs a positive input width and one layer");
  }
  std::vector<DenseLayer> built;
  Eigen::Index fan_in = input_width;
  for (const LayerSpec& spec : layers) {
    if (spec.width < 1) throw Error(ErrorCode::kValidation, "layer width must be positive");
    double stddev = 0.05;
    if (init == Init::kScaled) {
      const double gain = spec.activation == Activation::kRelu ? 2.0 : 1.0;
      stddev = std::sqrt(gain / static_cast<double>(fan_in));
    }
    std::normal_distribution<double> gauss(0.0, stddev);
    DenseLayer layer;
    layer.weights.resize(fan_in, spec.width);
    for (Eigen::Index r = 0; r < fan_in; ++r) {
      for (Eigen::Index c = 0; c < spec.width; ++c) layer.weights(r, c) = gauss(rng);
    }
    layer.bias = RowVector::Zero(spec.width);
    layer.activation = spec.activation;
    layer.regularization = spec.regularization;
    built.push_back(std::move(layer));
    fan_in = spec.width;
  }
  return DenseNet(std::move(built));
}

Eigen::Index DenseNet::input_width() const {
  return layers_.empty() ? 0 : layers_.front().in_width();
}

Eigen::Index DenseNet::output_width() const {
  return layers_.empty() ? 0 : layers_.back().out_width();
}

void DenseNet::validate() const {
  if (layers_.empty()) throw Error(ErrorCode::kValidation, "network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    if (layer.bias.size() != layer.out_width()) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(i) + ": bias width mismatch");
    }
    if (i > 0 && layers_[i - 1].out_width() != layer.in_width()) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(i) +
                                         ": input width does not match previous output");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw Error(ErrorCode::kNumeric, "layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

namespace {

void apply_activation(Activation activation, const Matrix& pre, Matrix& post) {
  switch (activation) {
    case Activation::kRelu: post = pre.cwiseMax(0.0); break;
    case Activation::kTanh: post = pre.array().tanh().matrix(); break;
    case Activation::kSigmoid:
      post = (1.0 / (1.0 + (-pre.array()).exp())).matrix();
      break;
    case Activation::kLinear: post = pre; break;
  }
}

// d post / d pre, multiplied elementwise into `grad`.
void apply_activation_derivative(Activation activation, const Matrix& pre, const Matrix& post,
                                 Matrix& grad) {
  switch (activation) {
    case Activation::kRelu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      break;
    case Activation::kTanh: grad.array() *= 1.0 - post.array().square(); break;
    case Activation::kSigmoid: grad.array() *= post.array() * (1.0 - post.array()); break;
    case Activation::kLinear: break;
  }
}

template <typename Derived>
auto sign_of(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

void check_cache(const DenseNet& net, const ForwardCache& cache) {
  const auto& layers = net.layers();
  if (cache.pre.size() != layers.size() || cache.post.size() != layers.size() ||
      cache.input.cols() != net.input_width()) {
    throw Error(ErrorCode::kContract, "backward: cache does not match the network");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (cache.pre[i].cols() != layers[i].out_width() ||
        cache.pre[i].rows() != cache.input.rows() ||
        cache.post[i].rows() != cache.pre[i].rows()) {
      throw Error(ErrorCode::kContract,
                  "backward: stale cache at layer " + std::to_string(i));
    }
  }
}

}  // namespace

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache* cache) {
  if (batch.cols() != net.input_width()) {
    throw Error(ErrorCode::kShape, "forward: batch width " + std::to_string(batch.cols()) +
                                       " does not match network input " +
                                       std::to_string(net.input_width()));
  }
  const auto& layers = net.layers();
  if (cache != nullptr) {
    cache->input = batch;
    cache->pre.resize(layers.size());
    cache->post.resize(layers.size());
  }
  Matrix current = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& layer = layers[i];
    Matrix pre = current * layer.weights;
    pre.rowwise() += layer.bias;
    Matrix post;
    apply_activation(layer.activation, pre, post);
    if (cache != nullptr) {
      cache->pre[i] = std::move(pre);
      cache->post[i] = post;
    }
    current = std::move(post);
  }
  return current;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(RowVector::Zero(layer.bias.size()));
  }
  return g;
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad) {
  check_cache(net, cache);
  const auto& layers = net.layers();
  if (loss_grad.rows() != cache.post.back().rows() ||
      loss_grad.cols() != cache.post.back().cols()) {
    throw Error(ErrorCode::kShape, "backward: loss gradient shape does not match the output");
  }
  const double rows = static_cast<double>(cache.input.rows());
  Gradients grads;
  grads.weights.resize(layers.size());
  grads.bias.resize(layers.size());

  Matrix upstream = loss_grad;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const DenseLayer& layer = layers[i];
    const Regularization& reg = layer.regularization;
    if (reg.activity_l1 != 0.0) upstream += (reg.activity_l1 / rows) * sign_of(cache.post[i]);
    if (reg.activity_l2 != 0.0) upstream += (2.0 * reg.activity_l2 / rows) * cache.post[i];

    apply_activation_derivative(layer.activation, cache.pre[i], cache.post[i], upstream);
    const Matrix& input = i == 0 ? cache.input : cache.post[i - 1];
    grads.weights[i].noalias() = input.transpose() * upstream;
    grads.bias[i] = upstream.colwise().sum();
    if (reg.kernel_l1 != 0.0) grads.weights[i] += reg.kernel_l1 * sign_of(layer.weights);
    if (reg.kernel_l2 != 0.0) grads.weights[i] += 2.0 * reg.kernel_l2 * layer.weights;
    if (reg.bias_l1 != 0.0) grads.bias[i] += reg.bias_l1 * sign_of(layer.bias);
    if (reg.bias_l2 != 0.0) grads.bias[i] += 2.0 * reg.bias_l2 * layer.bias;

    Matrix next = upstream * layer.weights.transpose();
    upstream = std::move(next);
  }
  grads.input = std::move(upstream);
  return grads;
}

double regularization_loss(const DenseNet& net, const ForwardCache& cache) {
  check_cache(net, cache);
  const double rows = static_cast<double>(cache.input.rows());
  double total = 0.0;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Regularization& reg = layers[i].regularization;
    total += reg.kernel_l1 * layers[i].weights.cwiseAbs().sum();
    total += reg.kernel_l2 * layers[i].weights.squaredNorm();
    total += reg.bias_l1 * layers[i].bias.cwiseAbs().sum();
    total += reg.bias_l2 * layers[i].bias.squaredNorm();
    total += reg.activity_l1 * cache.post[i].cwiseAbs().sum() / rows;
    total += reg.activity_l2 * cache.post[i].squaredNorm() / rows;
  }
  return total;
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0) {
    throw Error(ErrorCode::kShape, std::string(what) + ": prediction and target shapes differ");
  }
}

}  // namespace

LossResult binary_crossentropy(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "binary_crossentropy");
  constexpr double kClamp = 1e-7;
  const double n = static_cast<double>(pred.size());
  LossResult result;
  result.grad.resize(pred.rows(), pred.cols());
  double sum = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c) {
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      const double raw = pred(r, c);
      const double p = std::clamp(raw, kClamp, 1.0 - kClamp);
      const double t = target(r, c);
      sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      const bool clamped = raw < kClamp || raw > 1.0 - kClamp;
      result.grad(r, c) = clamped ? 0.0 : (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
  }
  result.value = sum / n;
  return result;
}

LossResult mse(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "mse");
  const double n = static_cast<double>(pred.size());
  LossResult result;
  const Matrix diff = pred - target;
  result.value = diff.squaredNorm() / n;
  result.grad = (2.0 / n) * diff;
  return result;
}

std::vector<ParamView> parameter_views(DenseNet& net, const std::string& prefix) {
  std::vector<ParamView> views;
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    views.push_back({base + ".w", layers[i].weights.data(),
                     static_cast<std::size_t>(layers[i].weights.size())});
    views.push_back({base + ".b", layers[i].bias.data(),
                     static_cast<std::size_t>(layers[i].bias.size())});
  }
  return views;
}

std::vector<ParamView> gradient_views(Gradients& grads, const std::string& prefix) {
  std::vector<ParamView> views;
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    views.push_back({base + ".w", grads.weights[i].data(),
                     static_cast<std::size_t>(grads.weights[i].size())});
    views.push_back({base + ".b", grads.bias[i].data(),
                     static_cast<std::size_t>(grads.bias[i].size())});
  }
  return views;
}

void adam_step(std::span<const ParamView> params, std::span<const ParamView> grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kShape, "adam_step: parameter and gradient lists differ in length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size) {
      throw Error(ErrorCode::kShape, "adam_step: gradient shape mismatch for " + params[i].name);
    }
    for (std::size_t k = 0; k < grads[i].size; ++k) {
      if (!std::isfinite(grads[i].data[k])) {
        throw Error(ErrorCode::kNumeric, "adam_step: non-finite gradient for " + params[i].name);
      }
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size, 0.0);
      state.v.emplace_back(p.size, 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShape, "adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != params[i].size) {
      throw Error(ErrorCode::kShape, "adam_step: moment shape mismatch for " + params[i].name);
    }
    for (std::size_t k = 0; k < params[i].size; ++k) {
      const double g = grads[i].data[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      params[i].data[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) weights.push_back(layer.weights(r, c));
    }
    const auto& reg = layer.regularization;
    layers.push_back({
        {"in", layer.in_width()},
        {"out", layer.out_width()},
        {"activation", to_string(layer.activation)},
        {"weights", weights},
        {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())},
        {"regularization",
         {{"kernel_l1", reg.kernel_l1},
          {"kernel_l2", reg.kernel_l2},
          {"bias_l1", reg.bias_l1},
          {"bias_l2", reg.bias_l2},
          {"activity_l1", reg.activity_l1},
          {"activity_l2", reg.activity_l2}}},
    });
  }
  return {{"format_version", kWeightFormatVersion}, {"layers", layers}};
}

DenseNet dense_net_from_json(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kWeightFormatVersion) {
    throw Error(ErrorCode::kValidation,
                "unsupported weight format version " + std::to_string(version));
  }
  std::vector<DenseLayer> layers;
  for (const auto& item : j.at("layers")) {
    DenseLayer layer;
    const auto in = item.at("in").get<Eigen::Index>();
    const auto out = item.at("out").get<Eigen::Index>();
    const auto weights = item.at("weights").get<std::vector<double>>();
    const auto bias = item.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weights.size()) != in * out ||
        static_cast<Eigen::Index>(bias.size()) != out) {
      throw Error(ErrorCode::kShape, "serialized layer has inconsistent array sizes");
    }
    layer.weights.resize(in, out);
    for (Eigen::Index r = 0; r < in; ++r) {
      for (Eigen::Index c = 0; c < out; ++c) {
        layer.weights(r, c) = weights[static_cast<std::size_t>(r * out + c)];
      }
    }
    layer.bias = Eigen::Map<const RowVector>(bias.data(), out);
    layer.activation = activation_from_string(item.at("activation").get<std::string>());
    if (item.contains("regularization")) {
      const auto& reg = item.at("regularization");
      layer.regularization.kernel_l1 = reg.value("kernel_l1", 0.0);
      layer.regularization.kernel_l2 = reg.value("kernel_l2", 0.0);
      layer.regularization.bias_l1 = reg.value("bias_l1", 0.0);
      layer.regularization.bias_l2 = reg.value("bias_l2", 0.0);
      layer.regularization.activity_l1 = reg.value("activity_l1", 0.0);
      layer.regularization.activity_l2 = reg.value("activity_l2", 0.0);
    }
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

}  // namespace gdoe::nn
