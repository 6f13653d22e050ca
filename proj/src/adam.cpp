#include "lfm/adam.hpp"

#include <cmath>
#include <string>

#include "lfm/errors.hpp"

namespace lfm {

AdamState::AdamState(std::span<Tensor* const> params, AdamOptions opts) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.emplace_back(p->numel(), 0.0);
    v.emplace_back(p->numel(), 0.0);
  }
}

void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->numel();
    if (grads[i].size() != n || state.m[i].size() != n || state.v[i].size() != n) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has " +
                           std::to_string(n) + " values but gradient has " +
                           std::to_string(grads[i].size()));
    }
  }

  state.t += 1;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> p = params[i]->data();
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    const std::vector<double>& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace lfm
