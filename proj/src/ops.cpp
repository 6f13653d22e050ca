#include "lfm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lfm/errors.hpp"

namespace lfm {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + shape_to_string(a.shape()) +
                         " does not match " + shape_to_string(b.shape()));
  }
}

void require_label(double label) {
  if (label != 0.0 && label != 1.0) {
    throw DomainError("bce_loss: label must be 0 or 1, got " + std::to_string(label));
  }
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

}  // namespace

kernels::ConvGeometry conv2d_geometry(const Shape& input, const Shape& weight,
                                      std::size_t stride, std::size_t padding) {
  if (input.size() != 3) {
    throw DimensionError("conv2d: input must be rank 3 (C x H x W), got " + shape_to_string(input));
  }
  if (weight.size() != 4) {
    throw DimensionError("conv2d: weight must be rank 4 (Cout x Cin x kh x kw), got " +
                         shape_to_string(weight));
  }
  if (weight[1] != input[0]) {
    throw DimensionError("conv2d: channel axis mismatch, weight expects " +
                         std::to_string(weight[1]) + " input channels but input has " +
                         std::to_string(input[0]));
  }
  return kernels::make_conv_geometry(input[0], input[1], input[2], weight[0], weight[2],
                                     weight[3], stride, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  const auto g = conv2d_geometry(input.shape(), weight.shape(), stride, padding);
  if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != g.out_channels)) {
    throw DimensionError("conv2d: bias axis 0 must equal output channels " +
                         std::to_string(g.out_channels) + ", got " + shape_to_string(bias.shape()));
  }
  Tensor out({g.out_channels, g.out_height, g.out_width});
  kernels::omp::conv2d_forward(g, input.data(), weight.data(), bias.data(), out.data());
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, bool has_bias,
                            const Tensor& grad_output, std::size_t stride, std::size_t padding,
                            bool need_input_grad) {
  const auto g = conv2d_geometry(input.shape(), weight.shape(), stride, padding);
  const Shape out_shape{g.out_channels, g.out_height, g.out_width};
  if (grad_output.shape() != out_shape) {
    throw DimensionError("conv2d_backward: upstream gradient shape " +
                         shape_to_string(grad_output.shape()) + " does not match output " +
                         shape_to_string(out_shape));
  }
  Conv2dGrads grads;
  grads.weight = Tensor(weight.shape());
  if (has_bias) grads.bias = Tensor({g.out_channels});
  kernels::omp::conv2d_backward_weight(g, grad_output.data(), input.data(), grads.weight.data(),
                                       grads.bias.data());
  if (need_input_grad) {
    grads.input = Tensor(input.shape());
    kernels::omp::conv2d_backward_input(g, grad_output.data(), weight.data(), grads.input.data());
  }
  return grads;
}

MaxPoolResult maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 3, "maxpool2d");
  MaxPoolResult r;
  r.geometry = kernels::make_pool_geometry(input.dim(0), input.dim(1), input.dim(2), window, stride);
  r.output = Tensor({r.geometry.channels, r.geometry.out_height, r.geometry.out_width});
  r.argmax.resize(r.geometry.output_size());
  kernels::omp::maxpool2d_forward(r.geometry, input.data(), r.output.data(), r.argmax);
  return r;
}

Tensor maxpool2d_backward(const MaxPoolResult& forward, const Tensor& grad_output) {
  if (forward.argmax.size() != forward.geometry.output_size()) {
    throw StateError("maxpool2d_backward: forward result carries no argmax record");
  }
  require_same_shape(grad_output, forward.output, "maxpool2d_backward");
  const auto& g = forward.geometry;
  Tensor grad_in({g.channels, g.in_height, g.in_width});
  kernels::omp::maxpool2d_backward(g, grad_output.data(), forward.argmax, grad_in.data());
  return grad_in;
}

double dot_affine(std::span<const double> input, std::span<const double> weight, double bias) {
  if (input.size() != weight.size()) {
    throw DimensionError("linear: weight inner axis " + std::to_string(weight.size()) +
                         " does not match input length " + std::to_string(input.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) acc += weight[i] * input[i];
  return acc + bias;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 1, "linear input");
  require_rank(weight, 2, "linear weight");
  if (weight.dim(0) != 1) {
    throw DimensionError("linear: weight axis 0 must be 1, got " + shape_to_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != 1) {
    throw DimensionError("linear: bias must have shape [1], got " + shape_to_string(bias.shape()));
  }
  return Tensor({1}, {dot_affine(input.data(), weight.data(), bias[0])});
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, double grad_output) {
  require_rank(input, 1, "linear_backward input");
  if (weight.numel() != input.numel()) {
    throw DimensionError("linear_backward: weight axis 1 does not match input length");
  }
  LinearGrads g;
  g.input = Tensor(input.shape());
  g.weight = Tensor(weight.shape());
  g.bias = Tensor({1}, {grad_output});
  for (std::size_t i = 0; i < input.numel(); ++i) {
    g.input[i] = grad_output * weight[i];
    g.weight[i] = grad_output * input[i];
  }
  return g;
}

double sigmoid(double x) {
  const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return clamp_probability(y);
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

Tensor sigmoid_backward(const Tensor& output, const Tensor& grad_output) {
  require_same_shape(output, grad_output, "sigmoid_backward");
  Tensor g(output.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) {
    g[i] = grad_output[i] * output[i] * (1.0 - output[i]);
  }
  return g;
}

Tensor abs(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::fabs(x[i]);
  return y;
}

Tensor abs_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "abs_backward");
  Tensor g(input.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) {
    const double s = input[i] > 0.0 ? 1.0 : (input[i] < 0.0 ? -1.0 : 0.0);
    g[i] = s * grad_output[i];
  }
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  relu_inplace(y);
  return y;
}

void relu_inplace(Tensor& x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor g(input.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
  return g;
}

double bce_loss(double probability, double label) {
  require_label(label);
  const double p = clamp_probability(probability);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double bce_loss(std::span<const double> probabilities, std::span<const double> labels) {
  if (probabilities.size() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(probabilities.size()) +
                         " probabilities but " + std::to_string(labels.size()) + " labels");
  }
  if (probabilities.empty()) throw DomainError("bce_loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) sum += bce_loss(probabilities[i], labels[i]);
  return sum / static_cast<double>(probabilities.size());
}

double bce_grad(double probability, double label) {
  require_label(label);
  if (probability < kProbabilityFloor || probability > 1.0 - kProbabilityFloor) return 0.0;
  return -(label / probability) + (1.0 - label) / (1.0 - probability);
}

}  // namespace lfm
