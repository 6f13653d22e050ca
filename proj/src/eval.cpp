#include "lfm/eval.hpp"

#include <omp.h>

#include <chrono>
#include <json.hpp>

#include "lfm/errors.hpp"

namespace lfm {

namespace {

int thread_count(std::size_t workers) {
  return workers == 0 ? omp_get_max_threads() : static_cast<int>(workers);
}

void score_range(const LfmModel& model, std::span<const Tensor> images, std::size_t chunk,
                 std::size_t workers, std::vector<double>& out) {
  const std::size_t n = images.size();
  const long chunks = static_cast<long>((n + chunk - 1) / chunk);
  std::vector<std::string> errors(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(workers))
  for (long c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    try {
      for (std::size_t i = begin; i < end; ++i) out[i] = infer(images[i], model).probability;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw DimensionError(e);
  }
}

}  // namespace

std::vector<double> score_images(const LfmModel& model, std::span<const Tensor> images,
                                 std::size_t workers) {
  std::vector<double> out(images.size());
  if (!images.empty()) score_range(model, images, 1, workers, out);
  return out;
}

EvalReport evaluate(const LfmModel& model, std::span<const SampleRecord> samples,
                    std::size_t workers, bool measure_throughput) {
  if (samples.empty()) throw DomainError("evaluate: empty sample set");
  std::vector<Tensor> images;
  images.reserve(samples.size());
  for (const SampleRecord& s : samples) images.push_back(s.image);

  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> probs = score_images(model, images, workers);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  EvalReport r;
  r.params = total_param_count(model);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.scores.push_back({probs[i], samples[i].label});
    if (samples[i].label == 1) {
      ++r.n_fake;
    } else {
      ++r.n_real;
    }
  }
  r.acc = accuracy(r.scores, model.config.decision_threshold);
  r.ap = r.n_fake > 0 ? average_precision(r.scores) : 0.0;
  if (measure_throughput && seconds > 0.0) {
    r.images_per_second = static_cast<double>(samples.size()) / seconds;
  }
  return r;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["acc"] = report.acc;
  j["ap"] = report.ap;
  j["n_real"] = report.n_real;
  j["n_fake"] = report.n_fake;
  j["params"] = report.params;
  j["images_per_second"] = report.images_per_second;
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const ScoredLabel& s : report.scores) scores.push_back({s.score, s.label});
  j["scores"] = std::move(scores);
  return j.dump(2) + "\n";
}

BenchReport bench(const LfmModel& model, std::span<const Tensor> images, std::size_t batch,
                  std::size_t workers) {
  if (images.empty()) throw DomainError("bench: empty image set");
  if (batch < 1) throw ConfigError("bench: batch must be >= 1");
  BenchReport r;
  r.images = images.size();
  r.batch = batch;
  r.workers = static_cast<std::size_t>(thread_count(workers));
  r.params = total_param_count(model);
  r.probabilities.resize(images.size());
  const auto start = std::chrono::steady_clock::now();
  score_range(model, images, batch, workers, r.probabilities);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.images_per_second = r.seconds > 0.0 ? static_cast<double>(r.images) / r.seconds : 0.0;
  return r;
}

std::string to_json(const BenchReport& report) {
  nlohmann::ordered_json j;
  j["images"] = report.images;
  j["batch"] = report.batch;
  j["workers"] = report.workers;
  j["params"] = report.params;
  j["seconds"] = report.seconds;
  j["images_per_second"] = report.images_per_second;
  return j.dump(2) + "\n";
}

}  // namespace lfm
