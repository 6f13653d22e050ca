#pragma once

// Differentiable operations used by the detector. Each forward has a
// matching backward that maps an upstream gradient to gradients of the
// inputs (reverse mode, one op at a time).

#include <cstdint>
#include <span>
#include <vector>

#include "lfm/kernels.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

/// Lower clamp applied to probabilities (sigmoid outputs and BCE inputs).
inline constexpr double kProbabilityFloor = 1e-12;

// conv2d --------------------------------------------------------------------

/// input [Cin x H x W], weight [Cout x Cin x kh x kw], bias [Cout] or an empty
/// Tensor for no bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

struct Conv2dGrads {
  Tensor input;   // empty when not requested
  Tensor weight;
  Tensor bias;    // empty when the layer has no bias
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, bool has_bias,
                            const Tensor& grad_output, std::size_t stride = 1,
                            std::size_t padding = 0, bool need_input_grad = true);

kernels::ConvGeometry conv2d_geometry(const Shape& input, const Shape& weight,
                                      std::size_t stride, std::size_t padding);

// maxpool2d -----------------------------------------------------------------

struct MaxPoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
  kernels::PoolGeometry geometry;
};

MaxPoolResult maxpool2d(const Tensor& input, std::size_t window = 2, std::size_t stride = 2);
Tensor maxpool2d_backward(const MaxPoolResult& forward, const Tensor& grad_output);

// linear --------------------------------------------------------------------

/// input [N], weight [1 x N], bias [1] -> [1].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, double grad_output);

/// weight . input + bias over raw buffers; used on the pooled vectors.
double dot_affine(std::span<const double> input, std::span<const double> weight, double bias);

// elementwise ---------------------------------------------------------------

double sigmoid(double x);
Tensor sigmoid(const Tensor& x);
/// Gradient given the forward output y = sigmoid(x).
Tensor sigmoid_backward(const Tensor& output, const Tensor& grad_output);

Tensor abs(const Tensor& x);
Tensor abs_backward(const Tensor& input, const Tensor& grad_output);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);
void relu_inplace(Tensor& x);

// loss ----------------------------------------------------------------------

/// -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1-1e-12].
double bce_loss(double probability, double label);
/// Batch mean of bce_loss.
double bce_loss(std::span<const double> probabilities, std::span<const double> labels);
/// d(bce_loss)/d(probability); zero where the clamp is active.
double bce_grad(double probability, double label);

}  // namespace lfm
