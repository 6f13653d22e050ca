#include "lfm/metrics.hpp"

#include <algorithm>
#include <vector>

#include "lfm/errors.hpp"

namespace lfm {

double accuracy(std::span<const ScoredLabel> scores, double threshold) {
  if (scores.empty()) throw DomainError("accuracy: empty score list");
  std::size_t correct = 0;
  for (const ScoredLabel& s : scores) {
    if ((s.score >= threshold) == (s.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double average_precision(std::span<const ScoredLabel> scores) {
  std::size_t positives = 0;
  for (const ScoredLabel& s : scores) positives += s.label == 1 ? 1 : 0;
  if (positives == 0) throw DomainError("average_precision: no positive labels");

  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  const double total_pos = static_cast<double>(positives);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double recall_prev = 0.0;
  double ap = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double threshold = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == threshold) {
      if (sorted[i].label == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
  }
  return ap;
}

}  // namespace lfm
