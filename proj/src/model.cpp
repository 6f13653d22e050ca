#include "lfm/model.hpp"

#include <cmath>
#include <optional>

#include "lfm/errors.hpp"
#include "lfm/ops.hpp"

namespace lfm {

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::tkp:
      return "tkp";
    case Pooling::gap:
      return "gap";
    case Pooling::gmp:
      return "gmp";
  }
  return "tkp";
}

Pooling parse_pooling(const std::string& name) {
  if (name == "tkp") return Pooling::tkp;
  if (name == "gap") return Pooling::gap;
  if (name == "gmp") return Pooling::gmp;
  throw ConfigError("unknown pooling '" + name + "' (expected tkp, gap or gmp)");
}

std::size_t ModelConfig::feature_width() const {
  return pooling == Pooling::tkp ? kMapChannels * tkp.k : kMapChannels;
}

void ModelConfig::validate() const {
  npr.validate();
  snet.validate();
  tkp.validate();
  if (!std::isfinite(decision_threshold)) throw ConfigError("decision_threshold must be finite");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
}

LfmModel::LfmModel(ModelConfig cfg, Rng& rng) : config(std::move(cfg)) {
  config.validate();
  snet = snet_init(config.snet, rng);
  const std::size_t width = config.feature_width();
  fc_weight = Tensor({1, width});
  const double stddev = std::sqrt(1.0 / static_cast<double>(width));
  for (double& w : fc_weight.data()) w = stddev * rng.normal();
  fc_bias = Tensor({1}, 0.0);
}

std::vector<Tensor*> LfmModel::parameters() {
  std::vector<Tensor*> out;
  for (ConvLayer& layer : snet.layers) {
    out.push_back(&layer.weight);
    if (!layer.bias.empty()) out.push_back(&layer.bias);
  }
  out.push_back(&fc_weight);
  out.push_back(&fc_bias);
  return out;
}

std::vector<const Tensor*> LfmModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const ConvLayer& layer : snet.layers) {
    out.push_back(&layer.weight);
    if (!layer.bias.empty()) out.push_back(&layer.bias);
  }
  out.push_back(&fc_weight);
  out.push_back(&fc_bias);
  return out;
}

std::size_t total_param_count(const ModelConfig& cfg) {
  return snet_param_count(cfg.snet) + tkp_param_count() + cfg.feature_width() + 1;
}

std::size_t total_param_count(const LfmModel& model) { return total_param_count(model.config); }

LossReport compose_loss(double loss_a, double loss_b, double alpha) {
  return {loss_a, loss_b, alpha, loss_a + alpha * loss_b};
}

namespace {

void check_head(const LfmModel& model) {
  const std::size_t width = model.config.feature_width();
  if (model.fc_weight.numel() != width || model.fc_bias.numel() != 1) {
    throw DimensionError("model head expects " + std::to_string(width) + " inputs, weight has " +
                         std::to_string(model.fc_weight.numel()));
  }
}

// dL/dz for BCE(sigmoid(z)); zero where the probability clamp is active.
double logit_grad(double probability, int label) {
  if (probability <= kProbabilityFloor || probability >= 1.0 - kProbabilityFloor) return 0.0;
  return probability - static_cast<double>(label);
}

struct PoolState {
  std::optional<PooledVectors> tkp;
  std::optional<GmpResult> gmp;
  Shape maps_shape;
  std::vector<double> vector;

  const std::vector<double>* vector_star() const {
    return tkp && tkp->vector_star ? &*tkp->vector_star : nullptr;
  }
};

PoolState pool_maps(const Tensor& maps, const ModelConfig& cfg, const Rng* rng) {
  PoolState s;
  s.maps_shape = maps.shape();
  switch (cfg.pooling) {
    case Pooling::tkp:
      if (rng) {
        TkpConfig training = cfg.tkp;
        training.training = true;
        s.tkp = tkp_forward(maps, training, *rng);
      } else {
        s.tkp = tkp_forward(maps, cfg.tkp);
      }
      s.vector = s.tkp->vector;
      break;
    case Pooling::gap:
      s.vector = gap_forward(maps);
      break;
    case Pooling::gmp:
      s.gmp = gmp_forward(maps);
      s.vector = s.gmp->vector;
      break;
  }
  return s;
}

Tensor unpool(const PoolState& s, const ModelConfig& cfg, std::span<const double> grad_vec,
              std::span<const double> grad_star) {
  switch (cfg.pooling) {
    case Pooling::tkp:
      return tkp_backward(*s.tkp, grad_vec, grad_star);
    case Pooling::gap:
      return gap_backward(s.maps_shape, grad_vec);
    case Pooling::gmp:
      return gmp_backward(*s.gmp, grad_vec);
  }
  throw StateError("unknown pooling");
}

Tensor snet_input(const Tensor& image, const ModelConfig& cfg) {
  return npr_extract(image, cfg.npr);
}

struct SampleResult {
  double score = 0.0;
  double aux_score = 0.0;
  bool has_aux = false;
  double loss_a = 0.0;
  double loss_b = 0.0;
  std::vector<std::vector<double>> grads;
};

SampleResult run_sample(const Tensor& image, int label, const LfmModel& model, const Rng* rng,
                        double batch_scale) {
  const ModelConfig& cfg = model.config;
  const Tensor features = snet_input(image, cfg);
  const SNetTrace trace = snet_forward_trace(features, model.snet, cfg.snet);
  const PoolState pooled = pool_maps(trace.output, cfg, rng);

  const std::span<const double> w = model.fc_weight.data();
  const double b = model.fc_bias[0];
  SampleResult r;
  r.score = sigmoid(dot_affine(pooled.vector, w, b));
  r.loss_a = bce_loss(r.score, label);
  const double dz = logit_grad(r.score, label) * batch_scale;
  double dz_star = 0.0;
  const std::vector<double>* star = pooled.vector_star();
  if (star) {
    r.has_aux = true;
    r.aux_score = sigmoid(dot_affine(*star, w, b));
    r.loss_b = bce_loss(r.aux_score, label);
    dz_star = cfg.alpha * logit_grad(r.aux_score, label) * batch_scale;
  }

  const std::size_t width = w.size();
  std::vector<double> grad_w(width);
  std::vector<double> grad_vec(width);
  std::vector<double> grad_star;
  for (std::size_t i = 0; i < width; ++i) {
    grad_w[i] = dz * pooled.vector[i];
    grad_vec[i] = dz * w[i];
  }
  if (star) {
    grad_star.resize(width);
    for (std::size_t i = 0; i < width; ++i) {
      grad_w[i] += dz_star * (*star)[i];
      grad_star[i] = dz_star * w[i];
    }
  }

  const Tensor grad_maps = unpool(pooled, cfg, grad_vec, grad_star);
  SNetGrads sg = snet_backward(trace, model.snet, cfg.snet, grad_maps);
  for (std::size_t l = 0; l < sg.weights.size(); ++l) {
    r.grads.push_back(std::move(sg.weights[l].values()));
    if (cfg.snet.bias) r.grads.push_back(std::move(sg.biases[l].values()));
  }
  r.grads.push_back(std::move(grad_w));
  r.grads.push_back({dz + dz_star});
  return r;
}

TrainForward run_batch(std::span<const Tensor> images, std::span<const int> labels,
                       const LfmModel& model, const Rng* rng) {
  if (images.empty()) throw DomainError("forward_train: empty batch");
  if (images.size() != labels.size()) {
    throw DimensionError("forward_train: " + std::to_string(images.size()) + " images but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DomainError("forward_train: label must be 0 or 1");
  }
  model.config.validate();
  check_head(model);

  const std::size_t n = images.size();
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<SampleResult> results(n);
  std::vector<std::string> errors(n);

  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      if (rng) {
        const Rng stream = rng->substream(idx);
        results[idx] = run_sample(images[idx], labels[idx], model, &stream, scale);
      } else {
        results[idx] = run_sample(images[idx], labels[idx], model, nullptr, scale);
      }
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) throw DimensionError("sample " + std::to_string(i) + ": " + errors[i]);
  }

  TrainForward out;
  out.scores.resize(n);
  double sum_a = 0.0;
  double sum_b = 0.0;
  const bool has_aux = results.front().has_aux;
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] = results[i].score;
    sum_a += results[i].loss_a;
    sum_b += results[i].loss_b;
    if (has_aux) out.aux_scores.push_back(results[i].aux_score);
  }
  out.loss = compose_loss(sum_a * scale, has_aux ? sum_b * scale : 0.0, model.config.alpha);

  // Ordered reduction keeps the sum independent of the thread schedule.
  out.grads = std::move(results.front().grads);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t p = 0; p < out.grads.size(); ++p) {
      std::vector<double>& acc = out.grads[p];
      const std::vector<double>& g = results[i].grads[p];
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
    }
  }
  return out;
}

}  // namespace

TrainForward forward_train(std::span<const Tensor> images, std::span<const int> labels,
                           const LfmModel& model, const Rng& rng) {
  return run_batch(images, labels, model, &rng);
}

TrainForward forward_deterministic(std::span<const Tensor> images, std::span<const int> labels,
                                   const LfmModel& model) {
  return run_batch(images, labels, model, nullptr);
}

double infer_logit(const Tensor& image, const LfmModel& model) {
  const ModelConfig& cfg = model.config;
  check_head(model);
  const Tensor features = snet_input(image, cfg);
  const Tensor maps = snet_forward(features, model.snet, cfg.snet);
  const PoolState pooled = pool_maps(maps, cfg, nullptr);
  return dot_affine(pooled.vector, model.fc_weight.data(), model.fc_bias[0]);
}

Inference infer(const Tensor& image, const LfmModel& model) {
  Inference r;
  r.probability = sigmoid(infer_logit(image, model));
  r.label = r.probability >= model.config.decision_threshold ? 1 : 0;
  return r;
}

}  // namespace lfm
