#ifndef HBDR_LAYERS_HPP
#define HBDR_LAYERS_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbdr/rng.hpp"
#include "hbdr/tensor.hpp"

namespace hbdr {

enum class Activation { identity, sigmoid, softmax };
enum class Mode { training, inference };

// Convolution is valid cross-correlation (no kernel flip), stride 1.
// Bias is kept per (output map, input map) pair and enters the sum once
// per input map; that is how the reference parameter accounting arrives
// at 53,248 parameters for the second convolution layer, and it is what
// param_count reports. Functionally the per-pair biases collapse to one
// bias per output map.
template <typename T>
struct ConvLayer {
  Tensor<T> kernels;  // [out_maps, in_maps, kh, kw]
  Tensor<T> bias;     // [out_maps, in_maps]

  ConvLayer() = default;
  ConvLayer(std::size_t out_maps, std::size_t in_maps, std::size_t kh,
            std::size_t kw)
      : kernels({out_maps, in_maps, kh, kw}), bias({out_maps, in_maps}) {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw std::invalid_argument("conv kernel dims must be odd");
  }

  std::size_t out_maps() const { return kernels.dim(0); }
  std::size_t in_maps() const { return kernels.dim(1); }
  std::size_t kh() const { return kernels.dim(2); }
  std::size_t kw() const { return kernels.dim(3); }
};

template <typename T>
struct ConvCache {
  Tensor<T> input;   // [in_maps, H, W]
  Tensor<T> output;  // [out_maps, H-kh+1, W-kw+1], post-activation
  Activation act = Activation::identity;
  bool valid = false;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

namespace detail {

// out[oc,:,:] = bias_sum(oc) + sum_ic xcorr(in[ic], k[oc][ic])
template <typename T>
void conv2d_forward_raw(const T* in, std::size_t in_maps, std::size_t h,
                        std::size_t w, const ConvLayer<T>& layer, T* out,
                        std::size_t oh, std::size_t ow) {
  const std::size_t kh = layer.kh(), kw = layer.kw(), oc_n = layer.out_maps();
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    T bias_sum = T{0};
    for (std::size_t ic = 0; ic < in_maps; ++ic)
      bias_sum += layer.bias[oc * in_maps + ic];
    T* out_map = out + oc * oh * ow;
    std::fill(out_map, out_map + oh * ow, bias_sum);
    for (std::size_t ic = 0; ic < in_maps; ++ic) {
      const T* in_map = in + ic * h * w;
      const T* kmap = layer.kernels.data() + (oc * in_maps + ic) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T kv = kmap[ky * kw + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* in_row = in_map + (oy + ky) * w + kx;
            T* out_row = out_map + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox)
              out_row[ox] += kv * in_row[ox];
          }
        }
      }
    }
  }
}

// grad_in[ic, oy+ky, ox+kx] += k[oc][ic][ky][kx] * grad_pre[oc, oy, ox]
template <typename T>
void conv2d_grad_input_raw(const T* grad_pre, std::size_t oh, std::size_t ow,
                           const ConvLayer<T>& layer, T* grad_in,
                           std::size_t h, std::size_t w) {
  const std::size_t kh = layer.kh(), kw = layer.kw();
  const std::size_t oc_n = layer.out_maps(), ic_n = layer.in_maps();
  std::fill(grad_in, grad_in + ic_n * h * w, T{0});
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    const T* g_map = grad_pre + oc * oh * ow;
    for (std::size_t ic = 0; ic < ic_n; ++ic) {
      T* gi_map = grad_in + ic * h * w;
      const T* kmap = layer.kernels.data() + (oc * ic_n + ic) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T kv = kmap[ky * kw + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* g_row = g_map + oy * ow;
            T* gi_row = gi_map + (oy + ky) * w + kx;
            for (std::size_t ox = 0; ox < ow; ++ox)
              gi_row[ox] += kv * g_row[ox];
          }
        }
      }
    }
  }
}

// grad_k[oc][ic][ky][kx] += sum_{oy,ox} grad_pre[oc,oy,ox] * in[ic,oy+ky,ox+kx]
// grad_b[oc][ic] += sum_{oy,ox} grad_pre[oc,oy,ox]
template <typename T>
void conv2d_grad_params_raw(const T* grad_pre, std::size_t oh, std::size_t ow,
                            const T* in, std::size_t h, std::size_t w,
                            const ConvLayer<T>& layer, T* grad_k, T* grad_b) {
  const std::size_t kh = layer.kh(), kw = layer.kw();
  const std::size_t oc_n = layer.out_maps(), ic_n = layer.in_maps();
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    const T* g_map = grad_pre + oc * oh * ow;
    T g_total = T{0};
    for (std::size_t i = 0; i < oh * ow; ++i) g_total += g_map[i];
    for (std::size_t ic = 0; ic < ic_n; ++ic) {
      grad_b[oc * ic_n + ic] += g_total;
      const T* in_map = in + ic * h * w;
      T* gk_map = grad_k + (oc * ic_n + ic) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          T s = T{0};
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* g_row = g_map + oy * ow;
            const T* in_row = in_map + (oy + ky) * w + kx;
            for (std::size_t ox = 0; ox < ow; ++ox) s += g_row[ox] * in_row[ox];
          }
          gk_map[ky * kw + kx] += s;
        }
      }
    }
  }
}

template <typename T>
void apply_activation(T* x, std::size_t n, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i) x[i] = sigmoid(x[i]);
      break;
    case Activation::softmax: {
      T mx = x[0];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
      T sum = T{0};
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
      }
      for (std::size_t i = 0; i < n; ++i) x[i] /= sum;
      break;
    }
  }
}

// grad wrt preactivation, given grad wrt output and the output itself.
template <typename T>
void activation_backward(const T* grad_out, const T* out, std::size_t n,
                         Activation act, T* grad_pre) {
  switch (act) {
    case Activation::identity:
      std::copy(grad_out, grad_out + n, grad_pre);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i)
        grad_pre[i] = grad_out[i] * out[i] * (T{1} - out[i]);
      break;
    case Activation::softmax: {
      T dot = T{0};
      for (std::size_t i = 0; i < n; ++i) dot += grad_out[i] * out[i];
      for (std::size_t i = 0; i < n; ++i)
        grad_pre[i] = out[i] * (grad_out[i] - dot);
      break;
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& input, const ConvLayer<T>& layer,
                       Activation act, ConvCache<T>* cache = nullptr) {
  if (act == Activation::softmax)
    throw std::invalid_argument("conv_forward: softmax not supported here");
  if (input.rank() != 3)
    throw std::invalid_argument("conv_forward: input must be [maps, H, W]");
  if (input.dim(0) != layer.in_maps())
    throw std::invalid_argument("conv_forward: input map count mismatch");
  const std::size_t h = input.dim(1), w = input.dim(2);
  if (h < layer.kh() || w < layer.kw())
    throw std::invalid_argument("conv_forward: input smaller than kernel");
  const std::size_t oh = h - layer.kh() + 1, ow = w - layer.kw() + 1;
  Tensor<T> out({layer.out_maps(), oh, ow});
  detail::conv2d_forward_raw(input.data(), input.dim(0), h, w, layer,
                             out.data(), oh, ow);
  detail::apply_activation(out.data(), out.size(), act);
  if (cache) {
    cache->input = input;
    cache->output = out;
    cache->act = act;
    cache->valid = true;
  }
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T>& grad_out,
                           const ConvCache<T>& cache,
                           const ConvLayer<T>& layer) {
  if (!cache.valid)
    throw std::invalid_argument("conv_backward: missing forward cache");
  if (!grad_out.same_shape(cache.output))
    throw std::invalid_argument("conv_backward: grad shape mismatch");
  const std::size_t oh = grad_out.dim(1), ow = grad_out.dim(2);
  const std::size_t h = cache.input.dim(1), w = cache.input.dim(2);
  Tensor<T> grad_pre = grad_out;
  detail::activation_backward(grad_out.data(), cache.output.data(),
                              grad_out.size(), cache.act, grad_pre.data());
  ConvGrads<T> g;
  g.input = Tensor<T>(cache.input.shape());
  g.kernels = Tensor<T>(layer.kernels.shape());
  g.bias = Tensor<T>(layer.bias.shape());
  detail::conv2d_grad_input_raw(grad_pre.data(), oh, ow, layer, g.input.data(),
                                h, w);
  detail::conv2d_grad_params_raw(grad_pre.data(), oh, ow, cache.input.data(),
                                 h, w, layer, g.kernels.data(), g.bias.data());
  return g;
}

// Max pooling over non-overlapping n-by-n windows. window == 1 is the
// identity. Ties break to the first element in row-major window order
// so the backward routing is deterministic.
struct MaxPoolLayer {
  std::size_t window = 2;
};

template <typename T>
struct PoolCache {
  std::vector<std::size_t> in_shape;
  std::vector<std::int32_t> argmax;  // flat input index per output cell
  bool valid = false;
};

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& input, const MaxPoolLayer& layer,
                          PoolCache<T>* cache = nullptr) {
  if (input.rank() != 3)
    throw std::invalid_argument("maxpool_forward: input must be [maps, H, W]");
  const std::size_t n = layer.window;
  if (n == 0) throw std::invalid_argument("maxpool_forward: window 0");
  const std::size_t maps = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % n != 0 || w % n != 0)
    throw std::invalid_argument(
        "maxpool_forward: spatial dims " + std::to_string(h) + "x" +
        std::to_string(w) + " not divisible by window " + std::to_string(n));
  const std::size_t oh = h / n, ow = w / n;
  Tensor<T> out({maps, oh, ow});
  std::vector<std::int32_t> argmax(out.size());
  for (std::size_t m = 0; m < maps; ++m) {
    const T* in_map = input.data() + m * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * n) * w + ox * n;
        T best_v = in_map[best];
        for (std::size_t dy = 0; dy < n; ++dy) {
          for (std::size_t dx = 0; dx < n; ++dx) {
            const std::size_t idx = (oy * n + dy) * w + (ox * n + dx);
            if (in_map[idx] > best_v) {
              best_v = in_map[idx];
              best = idx;
            }
          }
        }
        out[(m * oh + oy) * ow + ox] = best_v;
        argmax[(m * oh + oy) * ow + ox] =
            static_cast<std::int32_t>(m * h * w + best);
      }
    }
  }
  if (cache) {
    cache->in_shape = input.shape();
    cache->argmax = std::move(argmax);
    cache->valid = true;
  }
  return out;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_out,
                           const PoolCache<T>& cache) {
  if (!cache.valid)
    throw std::invalid_argument("maxpool_backward: missing forward cache");
  if (grad_out.size() != cache.argmax.size())
    throw std::invalid_argument("maxpool_backward: grad size mismatch");
  Tensor<T> grad_in(cache.in_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    grad_in[static_cast<std::size_t>(cache.argmax[i])] += grad_out[i];
  return grad_in;
}

// Fully connected layer. bias is [out, groups]; each group entry adds
// into the same unit, mirroring the reference accounting where the
// first fully connected layer keeps one bias per upstream feature map
// (312 x 64). groups == 1 is the ordinary single-bias layout.
template <typename T>
struct FcLayer {
  Tensor<T> weights;  // [out, in]
  Tensor<T> bias;     // [out, groups]

  FcLayer() = default;
  FcLayer(std::size_t out, std::size_t in, std::size_t bias_groups = 1)
      : weights({out, in}), bias({out, bias_groups}) {}

  std::size_t out_dim() const { return weights.dim(0); }
  std::size_t in_dim() const { return weights.dim(1); }
  std::size_t bias_groups() const { return bias.dim(1); }
};

template <typename T>
struct FcCache {
  Tensor<T> input;
  Tensor<T> output;  // post-activation
  Activation act = Activation::identity;
  bool valid = false;
};

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const FcLayer<T>& layer,
                     Activation act, FcCache<T>* cache = nullptr) {
  if (input.rank() != 1)
    throw std::invalid_argument("fc_forward: input must be rank 1");
  if (input.dim(0) != layer.in_dim())
    throw std::invalid_argument("fc_forward: expected input size " +
                                std::to_string(layer.in_dim()) + ", got " +
                                std::to_string(input.dim(0)));
  const std::size_t out_n = layer.out_dim(), in_n = layer.in_dim();
  const std::size_t groups = layer.bias_groups();
  Tensor<T> out({out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    T acc = T{0};
    for (std::size_t g = 0; g < groups; ++g) acc += layer.bias[o * groups + g];
    const T* w_row = layer.weights.data() + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) acc += w_row[i] * input[i];
    out[o] = acc;
  }
  detail::apply_activation(out.data(), out_n, act);
  if (cache) {
    cache->input = input;
    cache->output = out;
    cache->act = act;
    cache->valid = true;
  }
  return out;
}

template <typename T>
struct FcGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

namespace detail {

// grad_w[o][i] += delta[o] * x[i]; grad_b[o][g] += delta[o] per group.
// Accumulates; callers zero the buffers once per batch.
template <typename T>
void fc_grad_params_raw(const T* x, const T* delta, const FcLayer<T>& layer,
                        T* grad_w, T* grad_b) {
  const std::size_t out_n = layer.out_dim(), in_n = layer.in_dim();
  const std::size_t groups = layer.bias_groups();
  for (std::size_t o = 0; o < out_n; ++o) {
    const T d = delta[o];
    for (std::size_t gi = 0; gi < groups; ++gi) grad_b[o * groups + gi] += d;
    T* gw_row = grad_w + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) gw_row[i] += d * x[i];
  }
}

// grad_in[i] = sum_o delta[o] * w[o][i] (overwrites grad_in)
template <typename T>
void fc_grad_input_raw(const T* delta, const FcLayer<T>& layer, T* grad_in) {
  const std::size_t out_n = layer.out_dim(), in_n = layer.in_dim();
  std::fill(grad_in, grad_in + in_n, T{0});
  for (std::size_t o = 0; o < out_n; ++o) {
    const T d = delta[o];
    const T* w_row = layer.weights.data() + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) grad_in[i] += d * w_row[i];
  }
}

}  // namespace detail

// Backward from a gradient already expressed w.r.t. the preactivation
// (the route loss heads use: softmax/cross-entropy reduces to y - t
// there, avoiding the ill-conditioned -t/y intermediate).
template <typename T>
FcGrads<T> fc_backward_from_pre(const Tensor<T>& grad_pre,
                                const FcCache<T>& cache,
                                const FcLayer<T>& layer) {
  if (!cache.valid)
    throw std::invalid_argument("fc_backward: missing forward cache");
  if (grad_pre.size() != layer.out_dim())
    throw std::invalid_argument("fc_backward: grad size mismatch");
  FcGrads<T> g;
  g.input = Tensor<T>({layer.in_dim()});
  g.weights = Tensor<T>(layer.weights.shape());
  g.bias = Tensor<T>(layer.bias.shape());
  detail::fc_grad_params_raw(cache.input.data(), grad_pre.data(), layer,
                             g.weights.data(), g.bias.data());
  detail::fc_grad_input_raw(grad_pre.data(), layer, g.input.data());
  return g;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& grad_out, const FcCache<T>& cache,
                       const FcLayer<T>& layer) {
  if (!cache.valid)
    throw std::invalid_argument("fc_backward: missing forward cache");
  if (grad_out.size() != layer.out_dim())
    throw std::invalid_argument("fc_backward: grad size mismatch");
  Tensor<T> grad_pre({layer.out_dim()});
  detail::activation_backward(grad_out.data(), cache.output.data(),
                              grad_out.size(), cache.act, grad_pre.data());
  return fc_backward_from_pre(grad_pre, cache, layer);
}

// Inverted dropout: kept activations are scaled by 1/keep_prob during
// training so inference is a plain identity and never reads the RNG.
template <typename T>
struct DropoutMask {
  double keep_prob = 1.0;
  Tensor<T> mask;  // entries in {0, 1/keep_prob}; empty when not sampled
  Mode mode = Mode::inference;
};

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  DropoutMask<T> mask;
};

template <typename T>
DropoutResult<T> dropout_apply(const Tensor<T>& activations, double keep_prob,
                               Rng& rng, Mode mode) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw std::invalid_argument("dropout: keep_prob must be in (0, 1]");
  DropoutResult<T> r;
  r.mask.keep_prob = keep_prob;
  r.mask.mode = mode;
  if (mode == Mode::inference || keep_prob == 1.0) {
    r.output = activations;
    return r;
  }
  const T scale = static_cast<T>(1.0 / keep_prob);
  r.mask.mask = Tensor<T>(activations.shape());
  r.output = Tensor<T>(activations.shape());
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const T m = rng.bernoulli(keep_prob) ? scale : T{0};
    r.mask.mask[i] = m;
    r.output[i] = activations[i] * m;
  }
  return r;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out,
                           const DropoutMask<T>& mask) {
  if (mask.mode == Mode::inference || mask.keep_prob == 1.0) return grad_out;
  if (!grad_out.same_shape(mask.mask))
    throw std::invalid_argument("dropout_backward: shape mismatch");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask.mask[i];
  return g;
}

}  // namespace hbdr

#endif  // HBDR_LAYERS_HPP
