#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lfm/npr.hpp"
#include "lfm/rng.hpp"
#include "lfm/snet.hpp"
#include "lfm/tensor.hpp"
#include "lfm/tkp.hpp"

namespace lfm {

enum class Pooling { tkp, gap, gmp };

std::string to_string(Pooling p);
Pooling parse_pooling(const std::string& name);

struct ModelConfig {
  NprConfig npr;
  SNetConfig snet;
  Pooling pooling = Pooling::tkp;
  TkpConfig tkp;
  double decision_threshold = 0.5;
  double alpha = 0.1;  // weight of the random-k auxiliary loss

  /// Length of the pooled vector fed to the classifier head.
  std::size_t feature_width() const;
  void validate() const;
};

/// NPR -> salience network -> pooling -> one shared linear head.
struct LfmModel {
  ModelConfig config;
  SNetParams snet;
  Tensor fc_weight;  // [1 x feature_width]
  Tensor fc_bias;    // [1]

  LfmModel() = default;
  /// Randomly initialised model (He-normal convs and head, zero biases).
  LfmModel(ModelConfig cfg, Rng& rng);

  /// All learnable arrays in declaration order: per conv layer weight then
  /// bias (when enabled), then head weight, head bias.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

std::size_t total_param_count(const LfmModel& model);
std::size_t total_param_count(const ModelConfig& cfg);

struct LossReport {
  double loss_a = 0.0;
  double loss_b = 0.0;
  double alpha = 0.1;
  double total = 0.0;
};

/// L_total = L_A + alpha * L_B.
LossReport compose_loss(double loss_a, double loss_b, double alpha);

struct TrainForward {
  std::vector<double> scores;      // sigmoid(head(Vector)) per sample
  std::vector<double> aux_scores;  // sigmoid(head(Vector*)); empty without random-k
  LossReport loss;
  std::vector<std::vector<double>> grads;  // aligned with LfmModel::parameters()
};

/// Training-mode forward and backward over one batch. Sample i draws from
/// `rng.substream(i)`, so results do not depend on how samples are scheduled.
TrainForward forward_train(std::span<const Tensor> images, std::span<const int> labels,
                           const LfmModel& model, const Rng& rng);

/// Deterministic inference-path forward/backward for one image: loss is the
/// BCE of the main head only (no dropout, no random-k).
TrainForward forward_deterministic(std::span<const Tensor> images, std::span<const int> labels,
                                   const LfmModel& model);

struct Inference {
  double probability = 0.5;
  int label = 0;
};

/// Pre-sigmoid head output on the inference path.
double infer_logit(const Tensor& image, const LfmModel& model);
Inference infer(const Tensor& image, const LfmModel& model);

}  // namespace lfm
