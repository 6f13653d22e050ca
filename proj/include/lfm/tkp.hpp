#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lfm/rng.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

/// Top-k pooling settings. Dropout and random sampling only act when
/// `training` is set.
struct TkpConfig {
  std::size_t k = 16;
  double p_min = 0.1;
  double p_max = 0.3;
  bool training = false;
  bool rbld_enabled = true;
  bool rks_enabled = true;

  void validate() const;
  /// Also checks 1 <= k <= positions.
  void validate_for(std::size_t positions) const;
};

/// Drop probability of rank `i` (1-based, ascending within the top-k slice).
double rbld_probability(const TkpConfig& cfg, std::size_t rank);

struct PooledVectors {
  std::size_t channels = 0;
  std::size_t k = 0;
  std::vector<double> vector;                      // channels * k, ascending per channel
  std::optional<std::vector<double>> vector_star;  // random-k branch, training only
  std::vector<std::uint32_t> selected_indices;     // flat in-channel position per vector entry
  std::vector<std::uint8_t> dropped;               // 1 where dropout zeroed the entry
  std::vector<std::uint32_t> star_indices;         // flat in-channel position per vector_star entry
  Shape maps_shape;
};

/// Per channel: ascending sort, keep the k largest (ties ordered by flat
/// index), rank-based dropout, random-k side branch; slices concatenated in
/// channel order. Channel c draws from `rng.substream(c)`.
PooledVectors tkp_forward(const Tensor& maps, const TkpConfig& cfg, const Rng& rng);

/// Inference-mode pooling (no randomness).
PooledVectors tkp_forward(const Tensor& maps, const TkpConfig& cfg);

/// Routes upstream gradients back onto the maps. `upstream_star` may be empty
/// when the pooled result has no random-k branch.
Tensor tkp_backward(const PooledVectors& pooled, std::span<const double> upstream_vec,
                    std::span<const double> upstream_star);

/// Learnable parameters of the pooling stage (always zero).
std::size_t tkp_param_count();

/// Per-channel mean / max of [C x H x W] maps.
std::vector<double> gap_forward(const Tensor& maps);
Tensor gap_backward(const Shape& maps_shape, std::span<const double> upstream);

struct GmpResult {
  std::vector<double> vector;
  std::vector<std::uint32_t> argmax;  // flat in-channel position, first maximum
  Shape maps_shape;
};

GmpResult gmp_forward(const Tensor& maps);
Tensor gmp_backward(const GmpResult& forward, std::span<const double> upstream);

}  // namespace lfm
