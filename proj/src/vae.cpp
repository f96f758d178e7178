#include "gdoe/vae.hpp"

#include <cmath>

#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/stats.hpp"

namespace gdoe::vae {

using nlohmann::json;

void TrainingConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kValidation, "beta must be a finite nonnegative number");
  }
  if (batch_size < 1) throw Error(ErrorCode::kValidation, "batch size must be at least 1");
  if (epochs < 1) throw Error(ErrorCode::kValidation, "epochs must be at least 1");
  if (train_dup < 1 || test_dup < 1) {
    throw Error(ErrorCode::kValidation, "duplication counts must be at least 1");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kValidation, "learning rate must be positive");
  noise.validate();
}

json to_json(const TrainingConfig& config) {
  return {{"beta", config.beta},           {"batch_size", config.batch_size},
          {"epochs", config.epochs},       {"seed", config.seed},
          {"train_dup", config.train_dup}, {"test_dup", config.test_dup},
          {"noise", gdoe::to_json(config.noise)}, {"learning_rate", config.learning_rate}};
}

TrainingConfig training_config_from_json(const json& j) {
  TrainingConfig config;
  config.beta = j.value("beta", config.beta);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.epochs = j.value("epochs", config.epochs);
  config.seed = j.value("seed", config.seed);
  config.train_dup = j.value("train_dup", config.train_dup);
  config.test_dup = j.value("test_dup", config.test_dup);
  if (j.contains("noise")) config.noise = noise_from_json(j.at("noise"));
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.validate();
  return config;
}

VaeModel VaeModel::create(const ColumnMap& column_map, const TrainingConfig& config,
                          std::mt19937_64& rng) {
  using nn::Activation;
  using nn::LayerSpec;
  const auto width = static_cast<Eigen::Index>(column_map.width());
  if (width < 2) throw Error(ErrorCode::kValidation, "the encoded design needs at least 2 columns");

  const LayerSpec encoder_layers[] = {{512, Activation::kRelu, {}}, {32, Activation::kRelu, {}}};
  const LayerSpec head[] = {{kLatentDim, Activation::kLinear, {}}};
  const LayerSpec decoder_layers[] = {{32, Activation::kRelu, {}},
                                      {512, Activation::kRelu, {}},
                                      {width, Activation::kSigmoid, {}}};
  VaeModel model;
  model.encoder = nn::DenseNet::create(width, encoder_layers, rng);
  model.mean_head = nn::DenseNet::create(32, head, rng);
  model.logvar_head = nn::DenseNet::create(32, head, rng);
  model.decoder = nn::DenseNet::create(kLatentDim, decoder_layers, rng);
  model.column_map = column_map;
  model.config = config;
  return model;
}

Matrix VaeModel::encode_mean(const Matrix& x) const {
  return nn::forward(mean_head, nn::forward(encoder, x));
}

Matrix VaeModel::decode(const Matrix& z) const { return nn::forward(decoder, z); }

void VaeModel::validate() const {
  encoder.validate();
  mean_head.validate();
  logvar_head.validate();
  decoder.validate();
  const auto width = static_cast<Eigen::Index>(column_map.width());
  if (encoder.input_width() != width || decoder.output_width() != width) {
    throw Error(ErrorCode::kShape, "encoder input / decoder output must match the column map");
  }
  if (mean_head.input_width() != encoder.output_width() ||
      logvar_head.input_width() != encoder.output_width() ||
      mean_head.output_width() != kLatentDim || logvar_head.output_width() != kLatentDim ||
      decoder.input_width() != kLatentDim) {
    throw Error(ErrorCode::kShape, "the latent dimension must be exactly 2");
  }
}

json to_json(const VaeModel& model) {
  return {{"encoder", nn::to_json(model.encoder)},
          {"mean_head", nn::to_json(model.mean_head)},
          {"logvar_head", nn::to_json(model.logvar_head)},
          {"decoder", nn::to_json(model.decoder)},
          {"column_map", gdoe::to_json(model.column_map)},
          {"training_config", to_json(model.config)}};
}

VaeModel vae_model_from_json(const json& j) {
  VaeModel model;
  model.encoder = nn::dense_net_from_json(j.at("encoder"));
  model.mean_head = nn::dense_net_from_json(j.at("mean_head"));
  model.logvar_head = nn::dense_net_from_json(j.at("logvar_head"));
  model.decoder = nn::dense_net_from_json(j.at("decoder"));
  model.column_map = column_map_from_json(j.at("column_map"));
  model.config = training_config_from_json(j.at("training_config"));
  model.validate();
  return model;
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) {
    throw Error(ErrorCode::kShape, "kl_divergence: mu and logvar lengths differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(logvar[i])) {
      throw Error(ErrorCode::kNumeric, "kl_divergence: non-finite input");
    }
    sum += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  }
  return 0.5 * sum;
}

VaeLoss vae_loss(const VaeModel& model, const Matrix& x, const Matrix& eps, double beta,
                 VaeGradients* grads) {
  const Eigen::Index n = x.rows();
  if (eps.rows() != n || eps.cols() != kLatentDim) {
    throw Error(ErrorCode::kShape, "vae_loss: noise must be n x 2");
  }
  nn::ForwardCache body_cache;
  nn::ForwardCache mean_cache;
  nn::ForwardCache logvar_cache;
  nn::ForwardCache decoder_cache;
  const Matrix hidden = nn::forward(model.encoder, x, &body_cache);
  const Matrix mu = nn::forward(model.mean_head, hidden, &mean_cache);
  const Matrix logvar = nn::forward(model.logvar_head, hidden, &logvar_cache);
  const Matrix sigma = (0.5 * logvar.array()).exp().matrix();
  const Matrix z = mu + sigma.cwiseProduct(eps);
  const Matrix recon = nn::forward(model.decoder, z, &decoder_cache);

  const double width = static_cast<double>(x.cols());
  const double rows = static_cast<double>(n);
  const nn::LossResult bce = nn::binary_crossentropy(recon, x);

  VaeLoss loss;
  loss.mean_bce = bce.value;
  loss.reconstruction = bce.value * width;
  const Matrix kl_terms =
      (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).matrix();
  loss.kl = 0.5 * kl_terms.sum() / rows;
  loss.total = loss.reconstruction + beta * loss.kl;
  if (grads == nullptr) return loss;

  const Matrix recon_grad = width * bce.grad;
  grads->decoder = nn::backward(model.decoder, decoder_cache, recon_grad);
  const Matrix& dz = grads->decoder.input;
  const Matrix dmu = dz + (beta / rows) * mu;
  const Matrix dlogvar =
      (dz.array() * 0.5 * sigma.array() * eps.array() +
       (beta / rows) * 0.5 * (logvar.array().exp() - 1.0))
          .matrix();
  grads->mean_head = nn::backward(model.mean_head, mean_cache, dmu);
  grads->logvar_head = nn::backward(model.logvar_head, logvar_cache, dlogvar);
  const Matrix dhidden = grads->mean_head.input + grads->logvar_head.input;
  grads->encoder = nn::backward(model.encoder, body_cache, dhidden);
  return loss;
}

json to_json(const EpochRecord& record) {
  return {{"epoch", record.epoch},
          {"train_loss", record.train_loss},
          {"test_loss", record.test_loss},
          {"test_reconstruction", record.test_reconstruction},
          {"test_bce", record.test_bce},
          {"test_kl", record.test_kl}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.test_loss = j.at("test_loss").get<double>();
  r.test_reconstruction = j.value("test_reconstruction", 0.0);
  r.test_bce = j.value("test_bce", 0.0);
  r.test_kl = j.value("test_kl", 0.0);
  return r;
}

namespace {

std::vector<nn::ParamView> all_params(VaeModel& model) {
  std::vector<nn::ParamView> views;
  for (auto&& part : {nn::parameter_views(model.encoder, "encoder"),
                      nn::parameter_views(model.mean_head, "mean_head"),
                      nn::parameter_views(model.logvar_head, "logvar_head"),
                      nn::parameter_views(model.decoder, "decoder")}) {
    views.insert(views.end(), part.begin(), part.end());
  }
  return views;
}

std::vector<nn::ParamView> all_grads(VaeGradients& grads) {
  std::vector<nn::ParamView> views;
  for (auto&& part : {nn::gradient_views(grads.encoder, "encoder"),
                      nn::gradient_views(grads.mean_head, "mean_head"),
                      nn::gradient_views(grads.logvar_head, "logvar_head"),
                      nn::gradient_views(grads.decoder, "decoder")}) {
    views.insert(views.end(), part.begin(), part.end());
  }
  return views;
}

bool has_distinct_rows(const Matrix& m) {
  for (Eigen::Index r = 1; r < m.rows(); ++r) {
    if (m.row(r) != m.row(0)) return true;
  }
  return false;
}

}  // namespace

TrainResult train(const EncodedMatrix& m, const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (m.rows.cols() < 2) {
    throw Error(ErrorCode::kValidation, "training needs at least 2 encoded columns");
  }
  if (m.rows.rows() < 2 || !has_distinct_rows(m.rows)) {
    throw Error(ErrorCode::kValidation, "training needs at least 2 distinct rows");
  }

  std::mt19937_64 rng(cfg.seed);
  const SplitMatrices split =
      duplicate_and_split(m.rows, cfg.train_dup, cfg.test_dup, cfg.noise, rng());

  TrainResult result;
  result.model = VaeModel::create(m.column_map, cfg, rng);
  VaeModel& model = result.model;
  nn::AdamState adam;
  adam.learning_rate = cfg.learning_rate;

  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index n = split.train.rows();
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  const Matrix zero_eps = Matrix::Zero(split.test.rows(), kLatentDim);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double weighted = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index rows = std::min(batch, n - start);
      const Matrix x = split.train.middleRows(start, rows);
      Matrix eps(rows, kLatentDim);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < kLatentDim; ++c) eps(r, c) = gauss(rng);
      }
      VaeGradients grads;
      const VaeLoss loss = vae_loss(model, x, eps, cfg.beta, &grads);
      if (!std::isfinite(loss.total)) {
        throw TrainingError(epoch, "training diverged at epoch " + std::to_string(epoch));
      }
      weighted += loss.total * static_cast<double>(rows);
      auto params = all_params(model);
      auto grad_views = all_grads(grads);
      try {
        nn::adam_step(params, grad_views, adam);
      } catch (const Error& e) {
        throw TrainingError(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " +
                                       e.what());
      }
    }
    const VaeLoss test = vae_loss(model, split.test, zero_eps, cfg.beta);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = weighted / static_cast<double>(n);
    record.test_loss = test.total;
    record.test_reconstruction = test.reconstruction;
    record.test_bce = test.mean_bce;
    record.test_kl = test.kl;
    if (!std::isfinite(record.test_loss)) {
      throw TrainingError(epoch, "test loss is not finite at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

LatentEmbedding embed(const VaeModel& model, const EncodedMatrix& m,
                      std::span<const std::int64_t> trial_ids) {
  if (m.rows.cols() != model.input_width()) {
    throw Error(ErrorCode::kShape, "embed: encoded width " + std::to_string(m.rows.cols()) +
                                       " does not match the model input " +
                                       std::to_string(model.input_width()));
  }
  if (static_cast<Eigen::Index>(trial_ids.size()) != m.rows.rows()) {
    throw Error(ErrorCode::kShape, "embed: one trial id per row is required");
  }
  const Matrix mu = model.encode_mean(m.rows);
  LatentEmbedding out;
  out.trial_ids.assign(trial_ids.begin(), trial_ids.end());
  for (Eigen::Index r = 0; r < mu.rows(); ++r) {
    const Point2 p{mu(r, 0), mu(r, 1)};
    out.mean.push_back(p);
    out.uniformed.push_back({stats::normal_cdf(p.x), stats::normal_cdf(p.y)});
  }
  return out;
}

std::vector<Point2> to_original(std::span<const Point2> points, LatentSpace space) {
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const Point2& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::kDomain, "latent coordinates must be finite");
    }
    if (space == LatentSpace::kOriginal) {
      out.push_back(p);
      continue;
    }
    if (!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)) {
      throw Error(ErrorCode::kDomain, "uniformed coordinates must lie strictly inside (0,1)^2");
    }
    out.push_back({stats::normal_quantile(p.x), stats::normal_quantile(p.y)});
  }
  return out;
}

std::vector<Point2> to_uniformed(std::span<const Point2> points, LatentSpace space) {
  if (space == LatentSpace::kUniformed) {
    to_original(points, space);  // domain check
    return {points.begin(), points.end()};
  }
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const Point2& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::kDomain, "latent coordinates must be finite");
    }
    out.push_back({stats::normal_cdf(p.x), stats::normal_cdf(p.y)});
  }
  return out;
}

Matrix decode_points(const VaeModel& model, std::span<const Point2> points, LatentSpace space) {
  const auto original = to_original(points, space);
  Matrix z(static_cast<Eigen::Index>(original.size()), kLatentDim);
  for (std::size_t i = 0; i < original.size(); ++i) {
    z(static_cast<Eigen::Index>(i), 0) = original[i].x;
    z(static_cast<Eigen::Index>(i), 1) = original[i].y;
  }
  return model.decode(z);
}

Design decode_latent(const VaeModel& model, std::span<const Point2> points, LatentSpace space,
                     bool snap) {
  const Matrix decoded = decode_points(model, points, space);
  Design design;
  design.factors = model.column_map.factors;
  design.provenance = Provenance::kGeneratedGrid;
  std::vector<double> row(static_cast<std::size_t>(decoded.cols()));
  for (Eigen::Index r = 0; r < decoded.rows(); ++r) {
    for (Eigen::Index c = 0; c < decoded.cols(); ++c) row[static_cast<std::size_t>(c)] = decoded(r, c);
    design.trials.push_back(decode_vector(row, model.column_map, snap));
    design.trial_ids.push_back(r);
  }
  return design;
}

}  // namespace gdoe::vae
