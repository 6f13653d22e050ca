#include "lfm/snet.hpp"

#include <algorithm>
#include <cmath>

#include "lfm/errors.hpp"

namespace lfm {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "' (expected relu or identity)");
}

SNetConfig SNetConfig::with_layers(std::size_t layers) {
  SNetConfig cfg;
  cfg.num_conv_layers = layers;
  cfg.channel_plan.assign(layers, kMapChannels);
  if (layers > 0) cfg.channel_plan[0] = 32;
  cfg.pool_after.clear();
  for (std::size_t l = 1; l <= 3 && l < layers; ++l) cfg.pool_after.push_back(l);
  return cfg;
}

std::size_t SNetConfig::kernel_size(std::size_t layer) const {
  return layer + 1 == num_conv_layers ? 1 : 2;
}

bool SNetConfig::pools_after(std::size_t layer) const {
  return std::find(pool_after.begin(), pool_after.end(), layer + 1) != pool_after.end();
}

void SNetConfig::validate() const {
  if (in_channels == 0) throw ConfigError("snet: in_channels must be positive");
  if (num_conv_layers < 1) throw ConfigError("snet: num_conv_layers must be >= 1");
  if (channel_plan.size() != num_conv_layers) {
    throw ConfigError("snet: channel_plan has " + std::to_string(channel_plan.size()) +
                      " entries for " + std::to_string(num_conv_layers) + " conv layers");
  }
  for (std::size_t c : channel_plan) {
    if (c == 0) throw ConfigError("snet: channel_plan entries must be positive");
  }
  if (channel_plan.back() != kMapChannels) {
    throw ConfigError("snet: final conv layer must produce " + std::to_string(kMapChannels) +
                      " channels, got " + std::to_string(channel_plan.back()));
  }
  for (std::size_t p : pool_after) {
    if (p < 1 || p > num_conv_layers) {
      throw ConfigError("snet: pool_after index " + std::to_string(p) + " outside 1.." +
                        std::to_string(num_conv_layers));
    }
  }
  std::vector<std::size_t> sorted = pool_after;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("snet: pool_after lists a layer twice");
  }
}

SNetParams snet_init(const SNetConfig& cfg, Rng& rng) {
  cfg.validate();
  SNetParams params;
  std::size_t cin = cfg.in_channels;
  for (std::size_t l = 0; l < cfg.num_conv_layers; ++l) {
    const std::size_t k = cfg.kernel_size(l);
    const std::size_t cout = cfg.channel_plan[l];
    ConvLayer layer;
    layer.weight = Tensor({cout, cin, k, k});
    const double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    for (double& w : layer.weight.data()) w = stddev * rng.normal();
    if (cfg.bias) layer.bias = Tensor({cout}, 0.0);
    params.layers.push_back(std::move(layer));
    cin = cout;
  }
  return params;
}

std::vector<StageShape> snet_stage_shapes(const SNetConfig& cfg, std::size_t height,
                                          std::size_t width) {
  cfg.validate();
  std::vector<StageShape> stages;
  std::size_t h = height;
  std::size_t w = width;
  for (std::size_t l = 0; l < cfg.num_conv_layers; ++l) {
    const std::size_t k = cfg.kernel_size(l);
    const std::string conv_name = "conv" + std::to_string(l + 1);
    if (h < k || w < k) {
      throw DimensionError("snet: input " + std::to_string(height) + "x" + std::to_string(width) +
                           " too small, stage " + conv_name + " receives " + std::to_string(h) +
                           "x" + std::to_string(w) + " for a " + std::to_string(k) + "x" +
                           std::to_string(k) + " kernel");
    }
    h = h - k + 1;
    w = w - k + 1;
    stages.push_back({conv_name, {cfg.channel_plan[l], h, w}});
    if (cfg.pools_after(l)) {
      const std::string pool_name = "pool" + std::to_string(l + 1);
      if (h < 2 || w < 2) {
        throw DimensionError("snet: input " + std::to_string(height) + "x" +
                             std::to_string(width) + " too small, stage " + pool_name +
                             " receives " + std::to_string(h) + "x" + std::to_string(w));
      }
      h = (h - 2) / 2 + 1;
      w = (w - 2) / 2 + 1;
      stages.push_back({pool_name, {cfg.channel_plan[l], h, w}});
    }
  }
  return stages;
}

ReceptiveField snet_receptive_field(const SNetConfig& cfg) {
  cfg.validate();
  ReceptiveField rf;
  for (std::size_t l = 0; l < cfg.num_conv_layers; ++l) {
    rf.size += (cfg.kernel_size(l) - 1) * rf.jump;
    if (cfg.pools_after(l)) {
      rf.size += rf.jump;  // 2x2 window
      rf.jump *= 2;
    }
  }
  return rf;
}

std::size_t snet_param_count(const SNetConfig& cfg) {
  cfg.validate();
  std::size_t total = 0;
  std::size_t cin = cfg.in_channels;
  for (std::size_t l = 0; l < cfg.num_conv_layers; ++l) {
    const std::size_t k = cfg.kernel_size(l);
    const std::size_t cout = cfg.channel_plan[l];
    total += cout * cin * k * k + (cfg.bias ? cout : 0);
    cin = cout;
  }
  return total;
}

namespace {

void check_params(const SNetParams& params, const SNetConfig& cfg) {
  if (params.layers.size() != cfg.num_conv_layers) {
    throw DimensionError("snet: parameters hold " + std::to_string(params.layers.size()) +
                         " layers, config expects " + std::to_string(cfg.num_conv_layers));
  }
}

}  // namespace

SNetTrace snet_forward_trace(const Tensor& input, const SNetParams& params, const SNetConfig& cfg) {
  require_rank(input, 3, "snet_forward");
  // Validates config and reports the first stage that would collapse.
  snet_stage_shapes(cfg, input.dim(1), input.dim(2));
  check_params(params, cfg);

  SNetTrace trace;
  trace.inputs.reserve(cfg.num_conv_layers);
  trace.activations.reserve(cfg.num_conv_layers);
  trace.pools.reserve(cfg.num_conv_layers);
  Tensor current = input;
  for (std::size_t l = 0; l < cfg.num_conv_layers; ++l) {
    const ConvLayer& layer = params.layers[l];
    Tensor out = conv2d(current, layer.weight, layer.bias);
    const bool last = l + 1 == cfg.num_conv_layers;
    if (!last && cfg.activation == Activation::relu) relu_inplace(out);
    trace.inputs.push_back(std::move(current));
    if (cfg.pools_after(l)) {
      MaxPoolResult pooled = maxpool2d(out);
      current = pooled.output;
      trace.pools.emplace_back(std::move(pooled));
    } else {
      current = out;
      trace.pools.emplace_back(std::nullopt);
    }
    trace.activations.push_back(std::move(out));
  }
  trace.output = std::move(current);
  return trace;
}

Tensor snet_forward(const Tensor& input, const SNetParams& params, const SNetConfig& cfg) {
  return snet_forward_trace(input, params, cfg).output;
}

SNetGrads snet_backward(const SNetTrace& trace, const SNetParams& params, const SNetConfig& cfg,
                        const Tensor& grad_output, bool need_input_grad) {
  check_params(params, cfg);
  if (trace.inputs.size() != cfg.num_conv_layers) {
    throw StateError("snet_backward: trace does not match the network depth");
  }
  if (grad_output.shape() != trace.output.shape()) {
    throw DimensionError("snet_backward: upstream gradient shape " +
                         shape_to_string(grad_output.shape()) + " does not match maps " +
                         shape_to_string(trace.output.shape()));
  }
  SNetGrads grads;
  grads.weights.resize(cfg.num_conv_layers);
  grads.biases.resize(cfg.num_conv_layers);
  Tensor g = grad_output;
  for (std::size_t l = cfg.num_conv_layers; l-- > 0;) {
    if (trace.pools[l]) g = maxpool2d_backward(*trace.pools[l], g);
    const bool last = l + 1 == cfg.num_conv_layers;
    if (!last && cfg.activation == Activation::relu) {
      // Post-activation output is positive exactly where the pre-activation was.
      const Tensor& a = trace.activations[l];
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (!(a[i] > 0.0)) g[i] = 0.0;
      }
    }
    const bool want_input = l > 0 || need_input_grad;
    Conv2dGrads cg = conv2d_backward(trace.inputs[l], params.layers[l].weight, cfg.bias, g, 1, 0,
                                     want_input);
    grads.weights[l] = std::move(cg.weight);
    grads.biases[l] = std::move(cg.bias);
    if (want_input) g = std::move(cg.input);
  }
  if (need_input_grad) grads.input = std::move(g);
  return grads;
}

}  // namespace lfm
