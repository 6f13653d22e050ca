#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lfm/metrics.hpp"
#include "lfm/model.hpp"
#include "lfm/synth.hpp"

namespace lfm {

struct EvalReport {
  double acc = 0.0;
  double ap = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::vector<ScoredLabel> scores;
  std::size_t params = 0;
  double images_per_second = 0.0;  // 0 unless throughput was measured
};

/// Inference probabilities for every image, fanned out over `workers` threads
/// (0 = OpenMP default). Results do not depend on the worker count.
std::vector<double> score_images(const LfmModel& model, std::span<const Tensor> images,
                                 std::size_t workers = 0);

EvalReport evaluate(const LfmModel& model, std::span<const SampleRecord> samples,
                    std::size_t workers = 0, bool measure_throughput = false);

/// One JSON object with keys acc, ap, n_real, n_fake, params,
/// images_per_second and the score list.
std::string to_json(const EvalReport& report);

struct BenchReport {
  std::size_t images = 0;
  std::size_t batch = 0;
  std::size_t workers = 0;
  std::size_t params = 0;
  double seconds = 0.0;
  double images_per_second = 0.0;
  std::vector<double> probabilities;
};

/// Wall-clock inference throughput over `images`, processed in chunks of
/// `batch` images spread across `workers` threads.
BenchReport bench(const LfmModel& model, std::span<const Tensor> images, std::size_t batch,
                  std::size_t workers);

std::string to_json(const BenchReport& report);

}  // namespace lfm
