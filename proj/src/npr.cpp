#include "lfm/npr.hpp"

#include <cmath>
#include <string>

#include "lfm/errors.hpp"

namespace lfm {

void NprConfig::validate() const {
  if (window < 2) throw ConfigError("npr: window must be >= 2, got " + std::to_string(window));
  if (anchor_index >= window * window) {
    throw ConfigError("npr: anchor_index " + std::to_string(anchor_index) +
                      " outside a " + std::to_string(window) + "x" + std::to_string(window) +
                      " window");
  }
}

namespace {

void check_image(const Tensor& image, const NprConfig& cfg) {
  cfg.validate();
  require_rank(image, 3, "npr_extract");
  if (image.dim(1) % cfg.window != 0 || image.dim(2) % cfg.window != 0) {
    throw DimensionError("npr_extract: height and width must be divisible by the window edge " +
                         std::to_string(cfg.window) + ", got " + shape_to_string(image.shape()));
  }
}

// Residual without the absolute value.
Tensor signed_residual(const Tensor& image, const NprConfig& cfg) {
  const std::size_t channels = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  const std::size_t n = cfg.window;
  const std::size_t ay = cfg.anchor_index / n;
  const std::size_t ax = cfg.anchor_index % n;
  Tensor out(image.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t anchor_y = (y / n) * n + ay;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t anchor_x = (x / n) * n + ax;
        out.at(c, y, x) = image.at(c, y, x) - image.at(c, anchor_y, anchor_x);
      }
    }
  }
  return out;
}

}  // namespace

Tensor npr_extract(const Tensor& image, const NprConfig& cfg) {
  check_image(image, cfg);
  Tensor residual = signed_residual(image, cfg);
  if (cfg.take_abs) {
    for (double& v : residual.data()) v = std::fabs(v);
  }
  return residual;
}

Tensor npr_grad(const Tensor& image, const NprConfig& cfg, const Tensor& upstream) {
  check_image(image, cfg);
  if (upstream.shape() != image.shape()) {
    throw DimensionError("npr_grad: upstream shape " + shape_to_string(upstream.shape()) +
                         " does not match image " + shape_to_string(image.shape()));
  }
  Tensor g = upstream;
  if (cfg.take_abs) {
    const Tensor residual = signed_residual(image, cfg);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double r = residual[i];
      g[i] *= r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    }
  }
  // Transpose of r = x - x_anchor: every pixel passes its gradient through,
  // and the anchor additionally collects minus the window sum.
  const std::size_t n = cfg.window;
  const std::size_t ay = cfg.anchor_index / n;
  const std::size_t ax = cfg.anchor_index % n;
  Tensor grad = g;
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    for (std::size_t by = 0; by < image.dim(1); by += n) {
      for (std::size_t bx = 0; bx < image.dim(2); bx += n) {
        double window_sum = 0.0;
        for (std::size_t dy = 0; dy < n; ++dy) {
          for (std::size_t dx = 0; dx < n; ++dx) window_sum += g.at(c, by + dy, bx + dx);
        }
        grad.at(c, by + ay, bx + ax) -= window_sum;
      }
    }
  }
  return grad;
}

}  // namespace lfm
