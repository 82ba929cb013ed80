#pragma once

// Direct-loop linear kernels shared by the float reference and the integer
// oracle. Deliberately naive: these are the golden paths.

#include <cstddef>
#include <span>

#include "stemc/graph.hpp"

namespace stemc::detail {

/// out[i] += sum over the synapses of input group `group` of weight * x.
/// Average pooling and residual joins use unit weights (`weights` unused).
template <typename Acc, typename W, typename X>
void accumulate_group(const LayerSpec& spec, const W* weights, std::span<const X> x, std::span<Acc> out) {
  switch (spec.kind) {
    case LayerKind::FullyConnected: {
      const std::size_t in = static_cast<std::size_t>(spec.in_features);
      for (std::size_t i = 0; i < out.size(); ++i) {
        Acc acc{};
        const W* row = weights + i * in;
        for (std::size_t j = 0; j < in; ++j) acc += static_cast<Acc>(row[j]) * static_cast<Acc>(x[j]);
        out[i] += acc;
      }
      return;
    }
    case LayerKind::Conv2d:
    case LayerKind::AvgPool2d: {
      const bool pool = spec.kind == LayerKind::AvgPool2d;
      const int ih = spec.in_shape[1], iw = spec.in_shape[2];
      const int oh = spec.out_shape[1], ow = spec.out_shape[2];
      const int k = spec.kernel;
      for (int oc = 0; oc < spec.out_channels; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            Acc acc{};
            const int ic_begin = pool ? oc : 0;
            const int ic_end = pool ? oc + 1 : spec.in_channels;
            for (int ic = ic_begin; ic < ic_end; ++ic) {
              for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * spec.stride - spec.padding + ky;
                if (iy < 0 || iy >= ih) continue;
                for (int kx = 0; kx < k; ++kx) {
                  const int ix = ox * spec.stride - spec.padding + kx;
                  if (ix < 0 || ix >= iw) continue;
                  const Acc xv = static_cast<Acc>(x[(static_cast<std::size_t>(ic) * ih + iy) * iw + ix]);
                  if (pool) {
                    acc += xv;
                  } else {
                    const std::size_t widx = ((static_cast<std::size_t>(oc) * spec.in_channels + ic) * k + ky) * k + kx;
                    acc += static_cast<Acc>(weights[widx]) * xv;
                  }
                }
              }
            }
            out[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] += acc;
          }
        }
      }
      return;
    }
    case LayerKind::ResidualAdd:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<Acc>(x[i]);
      return;
    case LayerKind::Flatten:
      return;
  }
}

/// Neurons per bias entry: spatial size for conv, 1 for fully-connected.
inline std::size_t bias_stride(const LayerSpec& spec) {
  return spec.kind == LayerKind::Conv2d
             ? static_cast<std::size_t>(spec.out_shape[1]) * static_cast<std::size_t>(spec.out_shape[2])
             : 1;
}

}  // namespace stemc::detail
