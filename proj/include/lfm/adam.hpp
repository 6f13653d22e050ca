#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lfm/tensor.hpp"

namespace lfm {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moments plus the shared step counter.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(std::span<Tensor* const> params, AdamOptions opts);
};

/// Bias-corrected Adam update of `params` with `grads[i]` matching `params[i]`.
void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads,
               AdamState& state);

}  // namespace lfm
