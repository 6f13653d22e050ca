#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lfm/adam.hpp"
#include "lfm/model.hpp"
#include "lfm/synth.hpp"

namespace lfm {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_total = 0.0;
  double mean_loss_a = 0.0;
  double mean_loss_b = 0.0;
};

struct TrainResult {
  LfmModel final_model;
  LfmModel best_model;  // lowest epoch-mean total loss
  std::size_t best_epoch = 0;
  std::vector<EpochStats> curve;
  std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Shuffled mini-batch Adam on L_total. One permutation per epoch, last partial
/// batch kept. Deterministic given cfg.seed and the dataset order.
TrainResult train(LfmModel model, std::span<const SampleRecord> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Random initial model for a run seed (the same stream train() uses).
LfmModel init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Rng used for parameter initialisation, epoch shuffles and per-step draws.
Rng run_stream(std::uint64_t seed, std::uint64_t purpose);

/// Uniform permutation of [0, n) by Fisher-Yates.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace lfm
