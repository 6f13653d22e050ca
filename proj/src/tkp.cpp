#include "lfm/tkp.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lfm/errors.hpp"

namespace lfm {

void TkpConfig::validate() const {
  if (k < 1) throw ConfigError("tkp: k must be >= 1");
  if (!(p_min >= 0.0) || !(p_min <= p_max)) {
    throw ConfigError("tkp: need 0 <= p_min <= p_max, got p_min=" + std::to_string(p_min) +
                      " p_max=" + std::to_string(p_max));
  }
  if (!(p_max < 1.0)) throw ConfigError("tkp: p_max must be < 1, got " + std::to_string(p_max));
}

void TkpConfig::validate_for(std::size_t positions) const {
  validate();
  if (k > positions) {
    throw ConfigError("tkp: k=" + std::to_string(k) + " exceeds the " + std::to_string(positions) +
                      " positions of each map");
  }
}

double rbld_probability(const TkpConfig& cfg, std::size_t rank) {
  if (cfg.k == 1) return cfg.p_min;
  return cfg.p_min + (cfg.p_max - cfg.p_min) * static_cast<double>(rank - 1) /
                         static_cast<double>(cfg.k - 1);
}

namespace {

// Ascending by value, ties by ascending flat index.
struct AscendingByValue {
  const double* values;
  bool operator()(std::uint32_t a, std::uint32_t b) const {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  }
};

PooledVectors run_tkp(const Tensor& maps, const TkpConfig& cfg, const Rng* rng) {
  require_rank(maps, 3, "tkp_forward");
  const std::size_t channels = maps.dim(0);
  const std::size_t positions = maps.dim(1) * maps.dim(2);
  cfg.validate_for(positions);
  const std::size_t k = cfg.k;
  const bool dropout = cfg.training && cfg.rbld_enabled;
  const bool sampling = cfg.training && cfg.rks_enabled;
  if ((dropout || sampling) && rng == nullptr) {
    throw StateError("tkp_forward: training mode needs a random stream");
  }

  PooledVectors out;
  out.channels = channels;
  out.k = k;
  out.maps_shape = maps.shape();
  out.vector.resize(channels * k);
  out.selected_indices.resize(channels * k);
  out.dropped.assign(channels * k, 0);
  if (sampling) {
    out.vector_star.emplace(channels * k);
    out.star_indices.resize(channels * k);
  }

  std::vector<double> probs(k);
  for (std::size_t i = 0; i < k; ++i) probs[i] = rbld_probability(cfg, i + 1);

  std::vector<std::uint32_t> order(positions);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = maps.data().data() + c * positions;
    const AscendingByValue less{plane};
    std::iota(order.begin(), order.end(), 0U);
    // Move the k largest to the tail, then order just the tail.
    const auto tail = order.begin() + static_cast<long>(positions - k);
    std::nth_element(order.begin(), tail, order.end(), less);
    std::sort(tail, order.end(), less);

    Rng stream = rng ? rng->substream(c) : Rng(0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t pos = tail[static_cast<long>(i)];
      double value = plane[pos];
      if (dropout && stream.uniform() <= probs[i]) {
        value = 0.0;
        out.dropped[c * k + i] = 1;
      }
      out.vector[c * k + i] = value;
      out.selected_indices[c * k + i] = pos;
    }

    if (sampling) {
      // Partial Fisher-Yates: first k entries become a uniform k-subset.
      std::iota(order.begin(), order.end(), 0U);
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + stream.below(positions - i);
        std::swap(order[i], order[j]);
      }
      std::sort(order.begin(), order.begin() + static_cast<long>(k), less);
      for (std::size_t i = 0; i < k; ++i) {
        (*out.vector_star)[c * k + i] = plane[order[i]];
        out.star_indices[c * k + i] = order[i];
      }
    }
  }
  return out;
}

}  // namespace

PooledVectors tkp_forward(const Tensor& maps, const TkpConfig& cfg, const Rng& rng) {
  return run_tkp(maps, cfg, &rng);
}

PooledVectors tkp_forward(const Tensor& maps, const TkpConfig& cfg) {
  TkpConfig inference = cfg;
  inference.training = false;
  return run_tkp(maps, inference, nullptr);
}

Tensor tkp_backward(const PooledVectors& pooled, std::span<const double> upstream_vec,
                    std::span<const double> upstream_star) {
  const std::size_t n = pooled.channels * pooled.k;
  if (pooled.maps_shape.size() != 3 || pooled.selected_indices.size() != n ||
      pooled.dropped.size() != n) {
    throw StateError("tkp_backward: pooled result carries no selection record");
  }
  if (upstream_vec.size() != n) {
    throw DimensionError("tkp_backward: upstream vector length " +
                         std::to_string(upstream_vec.size()) + ", expected " + std::to_string(n));
  }
  if (!upstream_star.empty()) {
    if (!pooled.vector_star || pooled.star_indices.size() != n) {
      throw StateError("tkp_backward: gradient given for an absent random-k branch");
    }
    if (upstream_star.size() != n) {
      throw DimensionError("tkp_backward: upstream random-k length " +
                           std::to_string(upstream_star.size()) + ", expected " + std::to_string(n));
    }
  }
  Tensor grad(pooled.maps_shape);
  const std::size_t positions = pooled.maps_shape[1] * pooled.maps_shape[2];
  for (std::size_t c = 0; c < pooled.channels; ++c) {
    double* plane = grad.data().data() + c * positions;
    for (std::size_t i = 0; i < pooled.k; ++i) {
      const std::size_t e = c * pooled.k + i;
      if (!pooled.dropped[e]) plane[pooled.selected_indices[e]] += upstream_vec[e];
    }
    if (!upstream_star.empty()) {
      for (std::size_t i = 0; i < pooled.k; ++i) {
        const std::size_t e = c * pooled.k + i;
        plane[pooled.star_indices[e]] += upstream_star[e];
      }
    }
  }
  return grad;
}

std::size_t tkp_param_count() { return 0; }

std::vector<double> gap_forward(const Tensor& maps) {
  require_rank(maps, 3, "gap_forward");
  const std::size_t positions = maps.dim(1) * maps.dim(2);
  std::vector<double> out(maps.dim(0));
  for (std::size_t c = 0; c < out.size(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < positions; ++i) sum += maps[c * positions + i];
    out[c] = sum / static_cast<double>(positions);
  }
  return out;
}

Tensor gap_backward(const Shape& maps_shape, std::span<const double> upstream) {
  if (maps_shape.size() != 3 || upstream.size() != maps_shape[0]) {
    throw DimensionError("gap_backward: upstream length " + std::to_string(upstream.size()) +
                         " does not match maps " + shape_to_string(maps_shape));
  }
  Tensor grad(maps_shape);
  const std::size_t positions = maps_shape[1] * maps_shape[2];
  for (std::size_t c = 0; c < maps_shape[0]; ++c) {
    const double share = upstream[c] / static_cast<double>(positions);
    for (std::size_t i = 0; i < positions; ++i) grad[c * positions + i] = share;
  }
  return grad;
}

GmpResult gmp_forward(const Tensor& maps) {
  require_rank(maps, 3, "gmp_forward");
  const std::size_t positions = maps.dim(1) * maps.dim(2);
  GmpResult r;
  r.maps_shape = maps.shape();
  r.vector.resize(maps.dim(0));
  r.argmax.resize(maps.dim(0));
  for (std::size_t c = 0; c < maps.dim(0); ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < positions; ++i) {
      if (maps[c * positions + i] > maps[c * positions + best]) best = i;
    }
    r.vector[c] = maps[c * positions + best];
    r.argmax[c] = static_cast<std::uint32_t>(best);
  }
  return r;
}

Tensor gmp_backward(const GmpResult& forward, std::span<const double> upstream) {
  if (forward.maps_shape.size() != 3 || forward.argmax.size() != forward.maps_shape[0]) {
    throw StateError("gmp_backward: forward result carries no argmax record");
  }
  if (upstream.size() != forward.maps_shape[0]) {
    throw DimensionError("gmp_backward: upstream length " + std::to_string(upstream.size()) +
                         " does not match maps " + shape_to_string(forward.maps_shape));
  }
  Tensor grad(forward.maps_shape);
  const std::size_t positions = forward.maps_shape[1] * forward.maps_shape[2];
  for (std::size_t c = 0; c < upstream.size(); ++c) {
    grad[c * positions + forward.argmax[c]] = upstream[c];
  }
  return grad;
}

}  // namespace lfm
