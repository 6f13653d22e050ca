#pragma once

// Raw conv/pool kernels on flat row-major buffers.
//
// Two implementations share one contract: `ref` is the plain serial loop
// nest kept as the testing baseline, `omp` is the OpenMP-parallel version
// used by the library. Forward passes are bit-identical between them;
// gradients agree to rounding (summation order differs).
// Called from inside an active parallel region, `omp` kernels run on the
// calling thread only.

#include <cstddef>
#include <cstdint>
#include <span>

namespace lfm::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_height = 0;
  std::size_t out_width = 0;

  std::size_t input_size() const { return in_channels * in_height * in_width; }
  std::size_t output_size() const { return out_channels * out_height * out_width; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
};

/// Validates extents and fills in the output size. Throws DimensionError.
ConvGeometry make_conv_geometry(std::size_t in_channels, std::size_t in_height,
                                std::size_t in_width, std::size_t out_channels,
                                std::size_t kernel_h, std::size_t kernel_w,
                                std::size_t stride, std::size_t padding);

struct PoolGeometry {
  std::size_t channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t window = 2;
  std::size_t stride = 2;
  std::size_t out_height = 0;
  std::size_t out_width = 0;

  std::size_t input_size() const { return channels * in_height * in_width; }
  std::size_t output_size() const { return channels * out_height * out_width; }
};

PoolGeometry make_pool_geometry(std::size_t channels, std::size_t in_height,
                                std::size_t in_width, std::size_t window, std::size_t stride);

namespace ref {

/// out = conv(in, weight) + bias. An empty bias means no bias term.
void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out);
/// grad_in is overwritten.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in);
/// grad_weight / grad_bias are overwritten; grad_bias may be empty.
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_weight,
                            std::span<double> grad_bias);
/// argmax receives the flat input index chosen for every output (first maximum in
/// row-major window order).
void maxpool2d_forward(const PoolGeometry& g, std::span<const double> in,
                       std::span<double> out, std::span<std::uint32_t> argmax);
void maxpool2d_backward(const PoolGeometry& g, std::span<const double> grad_out,
                        std::span<const std::uint32_t> argmax, std::span<double> grad_in);

}  // namespace ref

namespace omp {

void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_weight,
                            std::span<double> grad_bias);
void maxpool2d_forward(const PoolGeometry& g, std::span<const double> in,
                       std::span<double> out, std::span<std::uint32_t> argmax);
void maxpool2d_backward(const PoolGeometry& g, std::span<const double> grad_out,
                        std::span<const std::uint32_t> argmax, std::span<double> grad_in);

}  // namespace omp

}  // namespace lfm::kernels
