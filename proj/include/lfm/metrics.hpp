#pragma once

#include <span>

namespace lfm {

struct ScoredLabel {
  double score = 0.0;  // probability of the fake class
  int label = 0;
};

/// Fraction of samples where (score >= threshold) agrees with (label == 1).
double accuracy(std::span<const ScoredLabel> scores, double threshold = 0.5);

/// Step-integrated area under the precision-recall curve of label 1. Equal
/// scores form a single threshold.
double average_precision(std::span<const ScoredLabel> scores);

}  // namespace lfm
