#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gdoe/design.hpp"
#include "gdoe/geometry_types.hpp"
#include "gdoe/nn.hpp"

namespace gdoe::vae {

using nn::Matrix;

inline constexpr Eigen::Index kLatentDim = 2;

struct TrainingConfig {
  double beta = 0.3;
  std::size_t batch_size = 256;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::size_t train_dup = 50;
  std::size_t test_dup = 30;
  NoiseConfig noise;
  double learning_rate = 0.001;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const nlohmann::json& j);

/// Encoder D -> 512 relu -> 32 relu -> {mean, log-variance} heads of width 2;
/// decoder 2 -> 32 relu -> 512 relu -> D sigmoid.
struct VaeModel {
  nn::DenseNet encoder;
  nn::DenseNet mean_head;
  nn::DenseNet logvar_head;
  nn::DenseNet decoder;
  ColumnMap column_map;
  TrainingConfig config;

  /// Freshly initialized weights for input width `input_width`.
  static VaeModel create(const ColumnMap& column_map, const TrainingConfig& config,
                         std::mt19937_64& rng);

  Eigen::Index input_width() const { return encoder.input_width(); }

  /// Latent mean (n x 2) of each input row.
  Matrix encode_mean(const Matrix& x) const;

  /// Decoder output (n x D) for latent rows z (n x 2).
  Matrix decode(const Matrix& z) const;

  void validate() const;
};

nlohmann::json to_json(const VaeModel& model);
VaeModel vae_model_from_json(const nlohmann::json& j);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) in closed form.
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);

struct VaeGradients {
  nn::Gradients encoder;
  nn::Gradients mean_head;
  nn::Gradients logvar_head;
  nn::Gradients decoder;
};

struct VaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;  // per-row summed BCE, averaged over rows
  double mean_bce = 0.0;        // per-element BCE
  double kl = 0.0;              // per-row KL, averaged over rows
};

/// Loss on batch `x` with the noise `eps` (n x 2) frozen: z = mu + sigma * eps.
/// Pass eps = zeros to evaluate at z = mu. Fills `grads` when non-null.
VaeLoss vae_loss(const VaeModel& model, const Matrix& x, const Matrix& eps, double beta,
                 VaeGradients* grads = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_reconstruction = 0.0;
  double test_bce = 0.0;
  double test_kl = 0.0;
};

nlohmann::json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct TrainResult {
  VaeModel model;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Duplicate/split, then minibatch Adam on BCE + beta * KL. Deterministic
/// given cfg.seed. Throws TrainingError on a non-finite loss.
TrainResult train(const EncodedMatrix& m, const TrainingConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct LatentEmbedding {
  std::vector<std::int64_t> trial_ids;
  std::vector<Point2> mean;
  std::vector<Point2> uniformed;
};

/// Posterior means of every row plus their normal-CDF images.
LatentEmbedding embed(const VaeModel& model, const EncodedMatrix& m,
                      std::span<const std::int64_t> trial_ids);

/// Maps points to the original latent space; uniformed points must lie
/// strictly inside (0,1)^2.
std::vector<Point2> to_original(std::span<const Point2> points, LatentSpace space);
std::vector<Point2> to_uniformed(std::span<const Point2> points, LatentSpace space);

/// Decodes latent points into a generated Design (ids 0..n-1).
Design decode_latent(const VaeModel& model, std::span<const Point2> points, LatentSpace space,
                     bool snap);

/// Raw decoder outputs (n x D) for points in `space`.
Matrix decode_points(const VaeModel& model, std::span<const Point2> points, LatentSpace space);

}  // namespace gdoe::vae
