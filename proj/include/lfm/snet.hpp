#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lfm/ops.hpp"
#include "lfm/rng.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Channel count of the salience maps.
inline constexpr std::size_t kMapChannels = 64;

/// Salience network layout: conv layers with 2x2 kernels except a final 1x1
/// projection to 64 channels, an activation between conv layers, and 2x2
/// max-pooling after the listed (1-based) conv layers.
struct SNetConfig {
  std::size_t in_channels = 3;
  std::size_t num_conv_layers = 5;
  std::vector<std::size_t> channel_plan{32, 64, 64, 64, 64};
  std::vector<std::size_t> pool_after{1, 2, 3};
  Activation activation = Activation::relu;
  bool bias = true;

  /// Default layout for `layers` conv layers: [32, 64, ...] with pooling after 1..3.
  static SNetConfig with_layers(std::size_t layers);

  std::size_t kernel_size(std::size_t layer) const;
  bool pools_after(std::size_t layer) const;
  void validate() const;
};

struct ConvLayer {
  Tensor weight;  // [Cout x Cin x k x k]
  Tensor bias;    // [Cout], empty when bias is off
};

struct SNetParams {
  std::vector<ConvLayer> layers;
};

/// He-normal weights, zero biases.
SNetParams snet_init(const SNetConfig& cfg, Rng& rng);

struct StageShape {
  std::string stage;  // e.g. "conv1", "pool1"
  Shape shape;
};

/// Output shape after every stage for an input of `height` x `width`.
/// Throws DimensionError naming the first stage with no valid output.
std::vector<StageShape> snet_stage_shapes(const SNetConfig& cfg, std::size_t height,
                                          std::size_t width);

struct ReceptiveField {
  std::size_t size = 1;  // edge in input pixels
  std::size_t jump = 1;  // input distance between neighbouring output units
};

ReceptiveField snet_receptive_field(const SNetConfig& cfg);

std::size_t snet_param_count(const SNetConfig& cfg);

/// Activations retained for the backward pass.
struct SNetTrace {
  std::vector<Tensor> inputs;       // input of conv layer l
  std::vector<Tensor> activations;  // conv output after the activation, before pooling
  std::vector<std::optional<MaxPoolResult>> pools;
  Tensor output;
};

Tensor snet_forward(const Tensor& input, const SNetParams& params, const SNetConfig& cfg);
SNetTrace snet_forward_trace(const Tensor& input, const SNetParams& params, const SNetConfig& cfg);

struct SNetGrads {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;  // empty tensors when bias is off
  Tensor input;                // empty unless requested
};

SNetGrads snet_backward(const SNetTrace& trace, const SNetParams& params, const SNetConfig& cfg,
                        const Tensor& grad_output, bool need_input_grad = false);

}  // namespace lfm
