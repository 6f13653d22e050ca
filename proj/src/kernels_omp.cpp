#include <omp.h>

#include <algorithm>
#include <vector>

#include "lfm/kernels.hpp"

namespace lfm::kernels::omp {

namespace {

// Half-open range of output columns whose tap `kx` lands inside the input row.
struct ColumnRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kx) {
  // x = ox * stride + kx - padding must lie in [0, in_width).
  const long pad = static_cast<long>(g.padding);
  const long s = static_cast<long>(g.stride);
  const long k = static_cast<long>(kx);
  long lo = 0;
  if (k < pad) lo = (pad - k + s - 1) / s;
  const long last = static_cast<long>(g.in_width) - 1 + pad - k;
  long hi = last < 0 ? 0 : last / s + 1;
  hi = std::min(hi, static_cast<long>(g.out_width));
  ColumnRange r;
  r.lo = static_cast<std::size_t>(std::max(0L, lo));
  r.hi = static_cast<std::size_t>(std::max(static_cast<long>(r.lo), hi));
  return r;
}

bool row_of(const ConvGeometry& g, std::size_t oy, std::size_t ky, std::size_t& y) {
  const long v = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
  if (v < 0 || v >= static_cast<long>(g.in_height)) return false;
  y = static_cast<std::size_t>(v);
  return true;
}

// Dense stride-1, unpadded case. Rows are processed "wide": output position
// p = oy * in_width + ox over a flat run, so every tap is a contiguous shifted
// read of the input plane. Columns ox >= out_width are scratch and dropped.
constexpr std::size_t kTile = 8;
constexpr std::size_t kChannelBlock = 4;

bool is_dense(const ConvGeometry& g) { return g.stride == 1 && g.padding == 0; }

std::size_t wide_length(const ConvGeometry& g) {
  return (g.out_height - 1) * g.in_width + g.out_width;
}

// wide[co][p] for co in [co0, co0 + cb); summation order per output is
// bias, then (ci, ky, kx) ascending, matching the reference kernel.
template <std::size_t CB>
void dense_forward_block(const ConvGeometry& g, const double* in, const double* weight,
                         const double* bias, std::size_t co0, double* wide, std::size_t wide_stride) {
  const std::size_t len = wide_length(g);
  const std::size_t in_plane = g.in_height * g.in_width;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  for (std::size_t p0 = 0; p0 < len; p0 += kTile) {
    const std::size_t n = std::min(kTile, len - p0);
    double acc[CB][kTile];
    for (std::size_t b = 0; b < CB; ++b) {
      const double init = bias ? bias[co0 + b] : 0.0;
      for (std::size_t t = 0; t < kTile; ++t) acc[b][t] = init;
    }
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const double* src = in + ci * in_plane + p0;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const double* x = src + ky * g.in_width + kx;
          double w[CB];
          for (std::size_t b = 0; b < CB; ++b) {
            w[b] = weight[((co0 + b) * g.in_channels + ci) * taps + ky * g.kernel_w + kx];
          }
          if (n == kTile) {
            for (std::size_t b = 0; b < CB; ++b) {
#pragma omp simd
              for (std::size_t t = 0; t < kTile; ++t) acc[b][t] += w[b] * x[t];
            }
          } else {
            for (std::size_t b = 0; b < CB; ++b) {
              for (std::size_t t = 0; t < n; ++t) acc[b][t] += w[b] * x[t];
            }
          }
        }
      }
    }
    for (std::size_t b = 0; b < CB; ++b) {
      for (std::size_t t = 0; t < n; ++t) wide[b * wide_stride + p0 + t] = acc[b][t];
    }
  }
}

void dense_forward(const ConvGeometry& g, const double* in, const double* weight,
                   const double* bias, double* out) {
  const std::size_t len = wide_length(g);
  const std::size_t plane = g.out_height * g.out_width;
  const long blocks = static_cast<long>((g.out_channels + kChannelBlock - 1) / kChannelBlock);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long blk = 0; blk < blocks; ++blk) {
    const std::size_t co0 = static_cast<std::size_t>(blk) * kChannelBlock;
    const std::size_t cb = std::min(kChannelBlock, g.out_channels - co0);
    std::vector<double> wide(kChannelBlock * len);
    if (cb == kChannelBlock) {
      dense_forward_block<kChannelBlock>(g, in, weight, bias, co0, wide.data(), len);
    } else {
      for (std::size_t b = 0; b < cb; ++b) {
        dense_forward_block<1>(g, in, weight, bias, co0 + b, wide.data() + b * len, len);
      }
    }
    for (std::size_t b = 0; b < cb; ++b) {
      for (std::size_t oy = 0; oy < g.out_height; ++oy) {
        std::copy_n(wide.data() + b * len + oy * g.in_width, g.out_width,
                    out + (co0 + b) * plane + oy * g.out_width);
      }
    }
  }
}

// grad_in is the full correlation of grad_out with the flipped kernel: pad the
// upstream gradient by (k - 1) on every side and run the dense forward with
// weights transposed to [Cin x Cout x kh x kw] and flipped spatially.
void dense_backward_input(const ConvGeometry& g, const double* grad_out, const double* weight,
                          double* grad_in) {
  ConvGeometry t;
  t.in_channels = g.out_channels;
  t.out_channels = g.in_channels;
  t.kernel_h = g.kernel_h;
  t.kernel_w = g.kernel_w;
  t.in_height = g.out_height + 2 * (g.kernel_h - 1);
  t.in_width = g.out_width + 2 * (g.kernel_w - 1);
  t.out_height = g.in_height;
  t.out_width = g.in_width;

  std::vector<double> padded(t.in_channels * t.in_height * t.in_width, 0.0);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      std::copy_n(grad_out + (co * g.out_height + oy) * g.out_width, g.out_width,
                  padded.data() + (co * t.in_height + oy + g.kernel_h - 1) * t.in_width +
                      g.kernel_w - 1);
    }
  }
  const std::size_t taps = g.kernel_h * g.kernel_w;
  std::vector<double> flipped(g.weight_size());
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          flipped[(ci * g.out_channels + co) * taps + (g.kernel_h - 1 - ky) * g.kernel_w +
                  (g.kernel_w - 1 - kx)] = weight[(co * g.in_channels + ci) * taps + ky * g.kernel_w + kx];
        }
      }
    }
  }
  dense_forward(t, padded.data(), flipped.data(), nullptr, grad_in);
}

// grad_w[co][ci][tap] = sum_p wide_grad[co][p] * in[ci][p + shift(tap)], with
// the upstream gradient spread onto the wide layout (zeros in scratch columns).
void dense_backward_weight(const ConvGeometry& g, const double* grad_out, const double* in,
                           double* grad_weight, double* grad_bias) {
  const std::size_t len = wide_length(g);
  const std::size_t in_plane = g.in_height * g.in_width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  const long out_channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long co_l = 0; co_l < out_channels; ++co_l) {
    const auto co = static_cast<std::size_t>(co_l);
    const double* go = grad_out + co * out_plane;
    if (grad_bias) {
      double acc = 0.0;
      for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
      grad_bias[co] = acc;
    }
    std::vector<double> wide(len, 0.0);
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      std::copy_n(go + oy * g.out_width, g.out_width, wide.data() + oy * g.in_width);
    }
    std::vector<double> acc(taps * kTile);
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const double* src = in + ci * in_plane;
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t p0 = 0;
      for (; p0 + kTile <= len; p0 += kTile) {
        const double* gv = wide.data() + p0;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const double* x = src + p0 + ky * g.in_width + kx;
            double* a = acc.data() + (ky * g.kernel_w + kx) * kTile;
#pragma omp simd
            for (std::size_t t = 0; t < kTile; ++t) a[t] += gv[t] * x[t];
          }
        }
      }
      for (std::size_t tap = 0; tap < taps; ++tap) {
        const std::size_t shift = (tap / g.kernel_w) * g.in_width + tap % g.kernel_w;
        double sum = 0.0;
        for (std::size_t t = 0; t < kTile; ++t) sum += acc[tap * kTile + t];
        for (std::size_t p = p0; p < len; ++p) sum += wide[p] * src[p + shift];
        grad_weight[(co * g.in_channels + ci) * taps + tap] = sum;
      }
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  if (is_dense(g)) {
    dense_forward(g, in.data(), weight.data(), bias.empty() ? nullptr : bias.data(), out.data());
    return;
  }
  const std::size_t plane = g.out_height * g.out_width;
  const long out_channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long co_l = 0; co_l < out_channels; ++co_l) {
    const auto co = static_cast<std::size_t>(co_l);
    double* dst = out.data() + co * plane;
    std::fill(dst, dst + plane, bias.empty() ? 0.0 : bias[co]);
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const double* src = in.data() + ci * g.in_height * g.in_width;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const double w = weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
          const ColumnRange cols = valid_columns(g, kx);
          for (std::size_t oy = 0; oy < g.out_height; ++oy) {
            std::size_t y = 0;
            if (!row_of(g, oy, ky, y)) continue;
            double* orow = dst + oy * g.out_width;
            const double* irow = src + y * g.in_width;
            if (g.stride == 1) {
              const double* shifted = irow + kx - g.padding;
#pragma omp simd
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += w * shifted[ox];
            } else {
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                orow[ox] += w * irow[ox * g.stride + kx - g.padding];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in) {
  if (is_dense(g)) {
    dense_backward_input(g, grad_out.data(), weight.data(), grad_in.data());
    return;
  }
  const std::size_t in_plane = g.in_height * g.in_width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const long in_channels = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long ci_l = 0; ci_l < in_channels; ++ci_l) {
    const auto ci = static_cast<std::size_t>(ci_l);
    double* dst = grad_in.data() + ci * in_plane;
    std::fill(dst, dst + in_plane, 0.0);
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const double* go = grad_out.data() + co * out_plane;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const double w = weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
          const ColumnRange cols = valid_columns(g, kx);
          for (std::size_t oy = 0; oy < g.out_height; ++oy) {
            std::size_t y = 0;
            if (!row_of(g, oy, ky, y)) continue;
            const double* grow = go + oy * g.out_width;
            double* irow = dst + y * g.in_width;
            if (g.stride == 1) {
              double* shifted = irow + kx - g.padding;
#pragma omp simd
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) shifted[ox] += w * grow[ox];
            } else {
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                irow[ox * g.stride + kx - g.padding] += w * grow[ox];
              }
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
  if (is_dense(g)) {
    dense_backward_weight(g, grad_out.data(), in.data(), grad_weight.data(),
                          grad_bias.empty() ? nullptr : grad_bias.data());
    return;
  }
  const std::size_t in_plane = g.in_height * g.in_width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const long out_channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long co_l = 0; co_l < out_channels; ++co_l) {
    const auto co = static_cast<std::size_t>(co_l);
    const double* go = grad_out.data() + co * out_plane;
    if (!grad_bias.empty()) {
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
      grad_bias[co] = acc;
    }
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const double* src = in.data() + ci * in_plane;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const ColumnRange cols = valid_columns(g, kx);
          double acc = 0.0;
          for (std::size_t oy = 0; oy < g.out_height; ++oy) {
            std::size_t y = 0;
            if (!row_of(g, oy, ky, y)) continue;
            const double* grow = go + oy * g.out_width;
            const double* irow = src + y * g.in_width;
            if (g.stride == 1) {
              const double* shifted = irow + kx - g.padding;
#pragma omp simd reduction(+ : acc)
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) acc += grow[ox] * shifted[ox];
            } else {
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                acc += grow[ox] * irow[ox * g.stride + kx - g.padding];
              }
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
  const long channels = static_cast<long>(g.channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long c_l = 0; c_l < channels; ++c_l) {
    const auto c = static_cast<std::size_t>(c_l);
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const std::size_t base = (c * g.in_height + oy * g.stride) * g.in_width + ox * g.stride;
        std::size_t best = base;
        double best_value = in[base];
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          const std::size_t row = base + wy * g.in_width;
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            if (in[row + wx] > best_value) {
              best_value = in[row + wx];
              best = row + wx;
            }
          }
        }
        const std::size_t o = (c * g.out_height + oy) * g.out_width + ox;
        out[o] = best_value;
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2d_backward(const PoolGeometry& g, std::span<const double> grad_out,
                        std::span<const std::uint32_t> argmax, std::span<double> grad_in) {
  // Each output's argmax lies in its own channel plane, so channels never collide.
  const std::size_t in_plane = g.in_height * g.in_width;
  const std::size_t out_plane = g.out_height * g.out_width;
  const long channels = static_cast<long>(g.channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (long c_l = 0; c_l < channels; ++c_l) {
    const auto c = static_cast<std::size_t>(c_l);
    std::fill(grad_in.begin() + static_cast<long>(c * in_plane),
              grad_in.begin() + static_cast<long>((c + 1) * in_plane), 0.0);
    for (std::size_t o = c * out_plane; o < (c + 1) * out_plane; ++o) {
      grad_in[argmax[o]] += grad_out[o];
    }
  }
}

}  // namespace lfm::kernels::omp
