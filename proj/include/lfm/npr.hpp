#pragma once

#include <cstddef>

#include "lfm/tensor.hpp"

namespace lfm {

/// Neighbouring-pixel residual settings.
struct NprConfig {
  std::size_t window = 2;        // edge of the non-overlapping down-sampling window
  std::size_t anchor_index = 0;  // row-major position kept inside each window
  bool take_abs = true;

  /// Throws ConfigError when window < 2 or the anchor falls outside the window.
  void validate() const;
};

/// image - nearest_upsample(anchor_downsample(image)), optionally in absolute value.
/// H and W must be multiples of the window edge.
Tensor npr_extract(const Tensor& image, const NprConfig& cfg);

/// Gradient of npr_extract with respect to the image: the transpose of the
/// residual map, composed with the sign of the residual when take_abs is on.
Tensor npr_grad(const Tensor& image, const NprConfig& cfg, const Tensor& upstream);

}  // namespace lfm
