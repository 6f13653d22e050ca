#include <limits>
#include <string>

#include "lfm/errors.hpp"
#include "lfm/kernels.hpp"

namespace lfm::kernels {

ConvGeometry make_conv_geometry(std::size_t in_channels, std::size_t in_height,
                                std::size_t in_width, std::size_t out_channels,
                                std::size_t kernel_h, std::size_t kernel_w,
                                std::size_t stride, std::size_t padding) {
  if (kernel_h < 1 || kernel_w < 1) throw DimensionError("conv2d: kernel extents must be >= 1");
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (in_channels == 0 || out_channels == 0) throw DimensionError("conv2d: zero channels");
  if (in_height + 2 * padding < kernel_h) {
    throw DimensionError("conv2d: height axis " + std::to_string(in_height) + " (+2*" +
                         std::to_string(padding) + " padding) smaller than kernel height " +
                         std::to_string(kernel_h));
  }
  if (in_width + 2 * padding < kernel_w) {
    throw DimensionError("conv2d: width axis " + std::to_string(in_width) + " (+2*" +
                         std::to_string(padding) + " padding) smaller than kernel width " +
                         std::to_string(kernel_w));
  }
  ConvGeometry g;
  g.in_channels = in_channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.out_channels = out_channels;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.padding = padding;
  g.out_height = (in_height + 2 * padding - kernel_h) / stride + 1;
  g.out_width = (in_width + 2 * padding - kernel_w) / stride + 1;
  return g;
}

PoolGeometry make_pool_geometry(std::size_t channels, std::size_t in_height,
                                std::size_t in_width, std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1) throw DimensionError("maxpool2d: window and stride must be >= 1");
  if (in_height < window) {
    throw DimensionError("maxpool2d: height axis " + std::to_string(in_height) +
                         " smaller than window " + std::to_string(window));
  }
  if (in_width < window) {
    throw DimensionError("maxpool2d: width axis " + std::to_string(in_width) +
                         " smaller than window " + std::to_string(window));
  }
  if (channels * in_height * in_width > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("maxpool2d: input too large for 32-bit argmax indices");
  }
  PoolGeometry g;
  g.channels = channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.window = window;
  g.stride = stride;
  g.out_height = (in_height - window) / stride + 1;
  g.out_width = (in_width - window) / stride + 1;
  return g;
}

namespace ref {

namespace {

// Signed input coordinate for an output position and kernel tap.
long input_coord(std::size_t out, std::size_t tap, const ConvGeometry& g) {
  return static_cast<long>(out * g.stride + tap) - static_cast<long>(g.padding);
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const long ih = static_cast<long>(g.in_height);
  const long iw = static_cast<long>(g.in_width);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const long y = input_coord(oy, ky, g);
            if (y < 0 || y >= ih) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long x = input_coord(ox, kx, g);
              if (x < 0 || x >= iw) continue;
              const double w = weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              acc += w * in[(ci * g.in_height + static_cast<std::size_t>(y)) * g.in_width +
                            static_cast<std::size_t>(x)];
            }
          }
        }
        out[(co * g.out_height + oy) * g.out_width + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in) {
  const long ih = static_cast<long>(g.in_height);
  const long iw = static_cast<long>(g.in_width);
  for (double& v : grad_in) v = 0.0;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      for (std::size_t oy = 0; oy < g.out_height; ++oy) {
        for (std::size_t ox = 0; ox < g.out_width; ++ox) {
          const double go = grad_out[(co * g.out_height + oy) * g.out_width + ox];
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const long y = input_coord(oy, ky, g);
            if (y < 0 || y >= ih) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long x = input_coord(ox, kx, g);
              if (x < 0 || x >= iw) continue;
              const double w = weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              grad_in[(ci * g.in_height + static_cast<std::size_t>(y)) * g.in_width +
                      static_cast<std::size_t>(x)] += w * go;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const long ih = static_cast<long>(g.in_height);
  const long iw = static_cast<long>(g.in_width);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    if (!grad_bias.empty()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.out_height * g.out_width; ++i) {
        acc += grad_out[co * g.out_height * g.out_width + i];
      }
      grad_bias[co] = acc;
    }
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < g.out_height; ++oy) {
            const long y = input_coord(oy, ky, g);
            if (y < 0 || y >= ih) continue;
            for (std::size_t ox = 0; ox < g.out_width; ++ox) {
              const long x = input_coord(ox, kx, g);
              if (x < 0 || x >= iw) continue;
              acc += grad_out[(co * g.out_height + oy) * g.out_width + ox] *
                     in[(ci * g.in_height + static_cast<std::size_t>(y)) * g.in_width +
                        static_cast<std::size_t>(x)];
            }
          }
          grad_weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] = acc;
        }
      }
    }
  }
}

void maxpool2d_forward(const PoolGeometry& g, std::span<const double> in,
                       std::span<double> out, std::span<std::uint32_t> argmax) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        std::size_t best = (c * g.in_height + oy * g.stride) * g.in_width + ox * g.stride;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const std::size_t idx =
                (c * g.in_height + oy * g.stride + wy) * g.in_width + ox * g.stride + wx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (c * g.out_height + oy) * g.out_width + ox;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2d_backward(const PoolGeometry& g, std::span<const double> grad_out,
                        std::span<const std::uint32_t> argmax, std::span<double> grad_in) {
  for (double& v : grad_in) v = 0.0;
  for (std::size_t o = 0; o < g.output_size(); ++o) grad_in[argmax[o]] += grad_out[o];
}

}  // namespace ref
}  // namespace lfm::kernels
