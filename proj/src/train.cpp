#include "lfm/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lfm/errors.hpp"

namespace lfm {

namespace {

enum Purpose : std::uint64_t { kInit = 0, kShuffle = 1, kSteps = 2 };

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train: eps must be > 0");
}

Rng run_stream(std::uint64_t seed, std::uint64_t purpose) {
  return Rng(seed).substream(purpose);
}

LfmModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng = run_stream(seed, kInit);
  return LfmModel(cfg, rng);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

TrainResult train(LfmModel model, std::span<const SampleRecord> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model.config.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  bool has_real = false;
  bool has_fake = false;
  for (const SampleRecord& s : data) {
    has_real |= s.label == 0;
    has_fake |= s.label == 1;
  }
  if (!has_real || !has_fake) throw ConfigError("train: dataset must contain both classes");

  std::vector<Tensor*> params = model.parameters();
  AdamState adam(params, {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
  Rng shuffle_rng = run_stream(cfg.seed, kShuffle);
  const Rng step_root = run_stream(cfg.seed, kSteps);

  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> batch_images;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(data.size(), shuffle_rng);
    double sum_total = 0.0;
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_images.push_back(data[order[i]].image);
        batch_labels.push_back(data[order[i]].label);
      }
      const Rng step_rng = step_root.substream(result.steps);
      const TrainForward fw = forward_train(batch_images, batch_labels, model, step_rng);
      adam_step(params, fw.grads, adam);
      ++result.steps;
      const double weight = static_cast<double>(end - start);
      sum_total += fw.loss.total * weight;
      sum_a += fw.loss.loss_a * weight;
      sum_b += fw.loss.loss_b * weight;
    }
    const double n = static_cast<double>(data.size());
    EpochStats stats{epoch, sum_total / n, sum_a / n, sum_b / n};
    result.curve.push_back(stats);
    if (stats.mean_total < best_loss) {
      best_loss = stats.mean_total;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    if (on_epoch) on_epoch(stats);
  }
  result.final_model = std::move(model);
  return result;
}

}  // namespace lfm
