#ifndef HBDR_NETWORK_HPP
#define HBDR_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hbdr/filters.hpp"
#include "hbdr/layers.hpp"
#include "hbdr/rbm.hpp"
#include "hbdr/rng.hpp"
#include "hbdr/tensor.hpp"

namespace hbdr {

// Recognizer variants. "cnn" and "cnn-dropout" are aliases: the
// baseline CNN is the Gaussian-initialized one (there is no separate
// fourth initialization scheme).
enum class Variant {
  dbn,
  cnn_gaussian,
  cnn_gabor,
  cnn_gaussian_dropout,
  cnn_gabor_dropout,
};

inline Variant parse_variant(const std::string& s) {
  if (s == "dbn") return Variant::dbn;
  if (s == "cnn" || s == "cnn-gaussian") return Variant::cnn_gaussian;
  if (s == "cnn-gabor") return Variant::cnn_gabor;
  if (s == "cnn-dropout" || s == "cnn-gaussian-dropout")
    return Variant::cnn_gaussian_dropout;
  if (s == "cnn-gabor-dropout") return Variant::cnn_gabor_dropout;
  throw std::invalid_argument(
      "unknown variant '" + s +
      "' (expected dbn | cnn | cnn-dropout | cnn-gaussian | cnn-gabor | "
      "cnn-gaussian-dropout | cnn-gabor-dropout)");
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::dbn: return "dbn";
    case Variant::cnn_gaussian: return "cnn-gaussian";
    case Variant::cnn_gabor: return "cnn-gabor";
    case Variant::cnn_gaussian_dropout: return "cnn-gaussian-dropout";
    case Variant::cnn_gabor_dropout: return "cnn-gabor-dropout";
  }
  return "?";
}

inline bool variant_is_cnn(Variant v) { return v != Variant::dbn; }

inline bool variant_has_dropout(Variant v) {
  return v == Variant::cnn_gaussian_dropout ||
         v == Variant::cnn_gabor_dropout;
}

inline bool variant_has_gabor(Variant v) {
  return v == Variant::cnn_gabor || v == Variant::cnn_gabor_dropout;
}

enum class Loss { cross_entropy, mean_squared_error };

inline Loss parse_loss(const std::string& s) {
  if (s == "xent") return Loss::cross_entropy;
  if (s == "mse") return Loss::mean_squared_error;
  throw std::invalid_argument("unknown loss '" + s +
                              "' (expected xent | mse)");
}

inline const char* loss_name(Loss l) {
  return l == Loss::cross_entropy ? "xent" : "mse";
}

// Output head: softmax scores for cross-entropy, per-class sigmoids
// for squared error.
inline Activation head_activation(Loss l) {
  return l == Loss::cross_entropy ? Activation::softmax
                                  : Activation::sigmoid;
}

// Two conv+pool stages followed by two fully connected layers. The
// defaults give the 32x32 -> 28x28x32 -> 14x14x32 -> 10x10x64 ->
// 5x5x64 -> 312 -> 10 ladder; smaller values are used by the gradient
// checks.
struct CnnArch {
  std::size_t input_size = 32;
  std::size_t input_maps = 1;
  std::size_t c1_maps = 32;
  std::size_t c1_kernel = 5;
  std::size_t s1_window = 2;
  std::size_t c2_maps = 64;
  std::size_t c2_kernel = 5;
  std::size_t s2_window = 2;
  std::size_t f1_units = 312;
  std::size_t n_classes = 10;

  std::size_t c1_out() const { return input_size - c1_kernel + 1; }
  std::size_t s1_out() const { return c1_out() / s1_window; }
  std::size_t c2_out() const { return s1_out() - c2_kernel + 1; }
  std::size_t s2_out() const { return c2_out() / s2_window; }
  std::size_t flat_dim() const { return c2_maps * s2_out() * s2_out(); }

  void validate() const {
    if (input_size == 0 || input_maps == 0 || c1_maps == 0 || c2_maps == 0 ||
        f1_units == 0 || n_classes == 0)
      throw std::invalid_argument("arch: all sizes must be positive");
    if (c1_kernel % 2 == 0 || c2_kernel % 2 == 0)
      throw std::invalid_argument("arch: kernels must be odd");
    if (input_size < c1_kernel)
      throw std::invalid_argument("arch: input smaller than C1 kernel");
    if (s1_window == 0 || c1_out() % s1_window != 0)
      throw std::invalid_argument("arch: C1 output " +
                                  std::to_string(c1_out()) +
                                  " not divisible by S1 window");
    if (s1_out() < c2_kernel)
      throw std::invalid_argument("arch: S1 output smaller than C2 kernel");
    if (s2_window == 0 || c2_out() % s2_window != 0)
      throw std::invalid_argument("arch: C2 output " +
                                  std::to_string(c2_out()) +
                                  " not divisible by S2 window");
  }

  // The ladder of output shapes, one entry per layer C1..F2.
  std::vector<std::vector<std::size_t>> output_shapes() const {
    validate();
    return {{c1_maps, c1_out(), c1_out()}, {c1_maps, s1_out(), s1_out()},
            {c2_maps, c2_out(), c2_out()}, {c2_maps, s2_out(), s2_out()},
            {f1_units},                    {n_classes}};
  }
};

template <typename T>
struct Cnn {
  CnnArch arch;
  ConvLayer<T> c1, c2;
  MaxPoolLayer s1, s2;
  FcLayer<T> f1, f2;
  Loss loss = Loss::cross_entropy;
  double keep_prob = 1.0;  // dropout keep probability; 1 disables
  bool freeze_c1 = false;

  Cnn() = default;
  explicit Cnn(const CnnArch& a, Loss l = Loss::cross_entropy)
      : arch((a.validate(), a)),
        c1(a.c1_maps, a.input_maps, a.c1_kernel, a.c1_kernel),
        c2(a.c2_maps, a.c1_maps, a.c2_kernel, a.c2_kernel),
        s1{a.s1_window},
        s2{a.s2_window},
        f1(a.f1_units, a.flat_dim(), a.c2_maps),
        f2(a.n_classes, a.f1_units, 1),
        loss(l) {}

  void validate() const {
    arch.validate();
    if (f1.in_dim() != arch.flat_dim())
      throw std::invalid_argument(
          "cnn: F1 expects input " + std::to_string(arch.flat_dim()) +
          ", layer has " + std::to_string(f1.in_dim()));
    if (f2.in_dim() != f1.out_dim() || f2.out_dim() != arch.n_classes ||
        f1.out_dim() != arch.f1_units)
      throw std::invalid_argument("cnn: FC shapes inconsistent with arch");
    if (c1.out_maps() != arch.c1_maps || c2.out_maps() != arch.c2_maps ||
        c2.in_maps() != arch.c1_maps)
      throw std::invalid_argument("cnn: conv shapes inconsistent with arch");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
      throw std::invalid_argument("cnn: keep_prob must be in (0, 1]");
  }
};

// Sigmoid MLP with a loss head; the DBN fine-tuning target and the
// shape an unrolled RBM stack takes.
template <typename T>
struct Mlp {
  std::vector<FcLayer<T>> hidden;  // sigmoid activations
  FcLayer<T> head;
  Loss loss = Loss::cross_entropy;

  std::size_t in_dim() const {
    return hidden.empty() ? head.in_dim() : hidden.front().in_dim();
  }
  std::size_t n_classes() const { return head.out_dim(); }
};

// ---- Initialization ----

template <typename T>
void init_fan_in(Tensor<T>& weights, std::size_t fan_in, Rng& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng r = rng;  // value copy: callers pass dedicated substreams
  weights = rand_normal<T>(weights.shape(), 0.0, std, r);
}

// Logistic-sigmoid hidden layers get a gain of 4 on the fan-in rule:
// sigma'(0) = 1/4, so plain 1/sqrt(fan_in) draws collapse the
// sample-to-sample spread of activations by ~4x per layer and leave
// the softmax head staring at near-identical features — the net then
// learns nothing beyond the class prior at any learning rate. The gain
// keeps activation contrast roughly unit through the stack (the same
// correction classic sigmoid MLP recipes apply to Xavier-style init).
inline double sigmoid_gain_std(std::size_t fan_in) {
  return 4.0 / std::sqrt(static_cast<double>(fan_in));
}

// C1 is routed per variant: Gabor bank or N(0, gaussian_std^2) draws.
// Deeper sigmoid layers use gain-corrected fan-in-scaled Gaussians; the
// softmax head uses the plain rule. Each layer draws from its own
// substream so variants sharing a seed differ only in C1.
template <typename T>
void init_cnn(Cnn<T>& net, Variant variant, Rng& init_rng,
              double gaussian_std = 0.1,
              const GaborSpec& gabor = GaborSpec{}) {
  if (!variant_is_cnn(variant))
    throw std::invalid_argument("init_cnn: not a CNN variant");
  net.validate();
  if (variant_has_gabor(variant)) {
    GaborSpec spec = gabor;
    spec.size = net.arch.c1_kernel;
    if (net.arch.input_maps != 1)
      throw std::invalid_argument("init_cnn: gabor C1 needs 1 input map");
    Tensor<T> bank = gabor_bank<T>(net.arch.c1_maps, spec.size, spec, true);
    net.c1.kernels = bank.reshaped(net.c1.kernels.shape());
  } else {
    Rng r = init_rng.substream(1);
    net.c1.kernels =
        rand_normal<T>(net.c1.kernels.shape(), 0.0, gaussian_std, r);
  }
  net.c1.bias.fill(T{0});
  {
    Rng r = init_rng.substream(2);
    const std::size_t fan_in =
        net.arch.c1_maps * net.arch.c2_kernel * net.arch.c2_kernel;
    net.c2.kernels = rand_normal<T>(net.c2.kernels.shape(), 0.0,
                                    sigmoid_gain_std(fan_in), r);
    net.c2.bias.fill(T{0});
  }
  {
    Rng r = init_rng.substream(3);
    net.f1.weights = rand_normal<T>(net.f1.weights.shape(), 0.0,
                                    sigmoid_gain_std(net.f1.in_dim()), r);
    net.f1.bias.fill(T{0});
  }
  {
    Rng r = init_rng.substream(4);
    net.f2.weights = rand_normal<T>(net.f2.weights.shape(), 0.0,
                                    1.0 / std::sqrt((double)net.f2.in_dim()),
                                    r);
    net.f2.bias.fill(T{0});
  }
}

// Fresh RBM: weights N(0, 0.01^2), biases zero.
template <typename T>
RbmParams<T> init_rbm(std::size_t n_visible, std::size_t n_hidden, Rng& rng,
                      double weight_std = 0.01) {
  RbmParams<T> p(n_visible, n_hidden);
  Rng r = rng;
  p.w = rand_normal<T>(p.w.shape(), 0.0, weight_std, r);
  p.a.fill(T{0});
  p.b.fill(T{0});
  return p;
}

// Unroll a pretrained RBM stack into a feed-forward MLP: hidden layer
// l computes sigma(b + W^T v), exactly the stack's mean-field upward
// pass. The softmax head on top is fan-in-initialized from `head_rng`.
template <typename T>
Mlp<T> unroll_rbm_stack(const std::vector<RbmParams<T>>& stack,
                        std::size_t n_classes, Rng& head_rng,
                        Loss loss = Loss::cross_entropy) {
  if (stack.empty()) throw std::invalid_argument("unroll: empty stack");
  Mlp<T> m;
  m.loss = loss;
  for (const RbmParams<T>& p : stack) {
    const std::size_t nv = p.n_visible(), nh = p.n_hidden();
    FcLayer<T> fc(nh, nv, 1);
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nh; ++j)
        fc.weights[j * nv + i] = p.w[i * nh + j];
    for (std::size_t j = 0; j < nh; ++j) fc.bias[j] = p.b[j];
    m.hidden.push_back(std::move(fc));
  }
  const std::size_t top = stack.back().n_hidden();
  m.head = FcLayer<T>(n_classes, top, 1);
  init_fan_in(m.head.weights, top, head_rng);
  m.head.bias.fill(T{0});
  return m;
}

// ---- Loss heads ----

template <typename T>
T loss_value(const Tensor<T>& output, std::size_t label, Loss loss) {
  if (label >= output.size())
    throw std::invalid_argument("loss: label out of range");
  if (loss == Loss::cross_entropy) {
    const T tiny = static_cast<T>(1e-12);
    return -std::log(std::max(output[label], tiny));
  }
  T sum = T{0};
  for (std::size_t c = 0; c < output.size(); ++c) {
    const T d = output[c] - (c == label ? T{1} : T{0});
    sum += d * d;
  }
  return T{0.5} * sum;
}

// Gradient w.r.t. the head preactivation. Softmax + cross-entropy
// gives y - t; sigmoid + squared error gives (y - t) .* y(1-y).
template <typename T>
Tensor<T> loss_delta_pre(const Tensor<T>& output, std::size_t label,
                         Loss loss) {
  if (label >= output.size())
    throw std::invalid_argument("loss: label out of range");
  Tensor<T> d(output.shape());
  for (std::size_t c = 0; c < output.size(); ++c) {
    const T t = (c == label) ? T{1} : T{0};
    d[c] = output[c] - t;
    if (loss == Loss::mean_squared_error)
      d[c] *= output[c] * (T{1} - output[c]);
  }
  return d;
}

// ---- Forward / backward ----

template <typename T>
struct CnnCaches {
  ConvCache<T> c1, c2;
  PoolCache<T> s1, s2;
  FcCache<T> f1, f2;
  DropoutMask<T> drop_flat, drop_f1;
};

template <typename T>
struct MlpCaches {
  std::vector<FcCache<T>> hidden;
  FcCache<T> head;
};

template <typename T>
CnnCaches<T> make_caches(const Cnn<T>&) {
  return {};
}

template <typename T>
MlpCaches<T> make_caches(const Mlp<T>& m) {
  MlpCaches<T> c;
  c.hidden.resize(m.hidden.size());
  return c;
}

// Training mode needs `dropout_rng` when keep_prob < 1; inference and
// keep_prob == 1 never touch it.
template <typename T>
Tensor<T> forward(const Cnn<T>& net, const Tensor<T>& image, Mode mode,
                  Rng* dropout_rng = nullptr, CnnCaches<T>* caches = nullptr) {
  const bool needs_rng =
      mode == Mode::training && net.keep_prob < 1.0 && !dropout_rng;
  if (needs_rng)
    throw std::invalid_argument("forward: dropout needs an rng in training");
  Rng unused(0);
  Rng& rng = dropout_rng ? *dropout_rng : unused;

  Tensor<T> a1 = conv_forward(image, net.c1, Activation::sigmoid,
                              caches ? &caches->c1 : nullptr);
  Tensor<T> p1 = maxpool_forward(a1, net.s1, caches ? &caches->s1 : nullptr);
  Tensor<T> a2 = conv_forward(p1, net.c2, Activation::sigmoid,
                              caches ? &caches->c2 : nullptr);
  Tensor<T> p2 = maxpool_forward(a2, net.s2, caches ? &caches->s2 : nullptr);
  Tensor<T> flat = p2.reshaped({net.arch.flat_dim()});

  DropoutResult<T> df = dropout_apply(flat, net.keep_prob, rng, mode);
  Tensor<T> h1 = fc_forward(df.output, net.f1, Activation::sigmoid,
                            caches ? &caches->f1 : nullptr);
  DropoutResult<T> dh = dropout_apply(h1, net.keep_prob, rng, mode);
  Tensor<T> out = fc_forward(dh.output, net.f2, head_activation(net.loss),
                             caches ? &caches->f2 : nullptr);
  if (caches) {
    caches->drop_flat = std::move(df.mask);
    caches->drop_f1 = std::move(dh.mask);
  }
  return out;
}

template <typename T>
Tensor<T> forward(const Mlp<T>& net, const Tensor<T>& input, Mode /*mode*/,
                  Rng* /*dropout_rng*/ = nullptr,
                  MlpCaches<T>* caches = nullptr) {
  Tensor<T> x = input.rank() == 1 ? input : input.reshaped({input.size()});
  for (std::size_t l = 0; l < net.hidden.size(); ++l)
    x = fc_forward(x, net.hidden[l], Activation::sigmoid,
                   caches ? &caches->hidden[l] : nullptr);
  return fc_forward(x, net.head, head_activation(net.loss),
                    caches ? &caches->head : nullptr);
}

// One gradient tensor per parameter tensor, in the model's canonical
// parameter order. Accumulated across a batch, then scaled.
template <typename T>
struct GradSet {
  std::vector<Tensor<T>> g;

  void zero() {
    for (Tensor<T>& t : g) t.fill(T{0});
  }
  void add(const GradSet<T>& other) {
    if (other.g.size() != g.size())
      throw std::invalid_argument("gradset: size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].same_shape(other.g[i]))
        throw std::invalid_argument("gradset: shape mismatch");
      for (std::size_t k = 0; k < g[i].size(); ++k)
        g[i][k] += other.g[i][k];
    }
  }
  void scale(T s) {
    for (Tensor<T>& t : g)
      for (std::size_t k = 0; k < t.size(); ++k) t[k] *= s;
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
  bool frozen = false;
};

// Canonical parameter order; gradient indices match it.
template <typename T>
std::vector<ParamRef<T>> param_refs(Cnn<T>& m) {
  return {{"c1.kernels", &m.c1.kernels, m.freeze_c1},
          {"c1.bias", &m.c1.bias, m.freeze_c1},
          {"c2.kernels", &m.c2.kernels, false},
          {"c2.bias", &m.c2.bias, false},
          {"f1.weights", &m.f1.weights, false},
          {"f1.bias", &m.f1.bias, false},
          {"f2.weights", &m.f2.weights, false},
          {"f2.bias", &m.f2.bias, false}};
}

template <typename T>
std::vector<ParamRef<T>> param_refs(Mlp<T>& m) {
  std::vector<ParamRef<T>> refs;
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    const std::string base = "h" + std::to_string(l);
    refs.push_back({base + ".weights", &m.hidden[l].weights, false});
    refs.push_back({base + ".bias", &m.hidden[l].bias, false});
  }
  refs.push_back({"head.weights", &m.head.weights, false});
  refs.push_back({"head.bias", &m.head.bias, false});
  return refs;
}

// Read-only named views in the same canonical order as param_refs.
template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> param_views(
    const Cnn<T>& m) {
  return {{"c1.kernels", &m.c1.kernels}, {"c1.bias", &m.c1.bias},
          {"c2.kernels", &m.c2.kernels}, {"c2.bias", &m.c2.bias},
          {"f1.weights", &m.f1.weights}, {"f1.bias", &m.f1.bias},
          {"f2.weights", &m.f2.weights}, {"f2.bias", &m.f2.bias}};
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> param_views(
    const Mlp<T>& m) {
  std::vector<std::pair<std::string, const Tensor<T>*>> views;
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    const std::string base = "h" + std::to_string(l);
    views.push_back({base + ".weights", &m.hidden[l].weights});
    views.push_back({base + ".bias", &m.hidden[l].bias});
  }
  views.push_back({"head.weights", &m.head.weights});
  views.push_back({"head.bias", &m.head.bias});
  return views;
}

template <typename T>
GradSet<T> make_gradset(const std::vector<ParamRef<T>>& refs) {
  GradSet<T> gs;
  gs.g.reserve(refs.size());
  for (const ParamRef<T>& r : refs) gs.g.emplace_back(r.tensor->shape());
  return gs;
}

// Backward through the whole CNN given the head preactivation
// gradient; parameter gradients are accumulated into `grads` (indices
// follow param_refs order). The C1 path is skipped when frozen.
template <typename T>
void backward(const Cnn<T>& net, const CnnCaches<T>& caches,
              const Tensor<T>& delta_head, GradSet<T>& grads) {
  if (grads.g.size() != 8)
    throw std::invalid_argument("cnn backward: bad gradset");
  if (!caches.f2.valid)
    throw std::invalid_argument("cnn backward: missing forward caches");

  detail::fc_grad_params_raw(caches.f2.input.data(), delta_head.data(), net.f2,
                             grads.g[6].data(), grads.g[7].data());
  Tensor<T> grad_hd({net.f1.out_dim()});
  detail::fc_grad_input_raw(delta_head.data(), net.f2, grad_hd.data());

  Tensor<T> grad_h1 = dropout_backward(grad_hd, caches.drop_f1);
  Tensor<T> delta_f1({net.f1.out_dim()});
  detail::activation_backward(grad_h1.data(), caches.f1.output.data(),
                              grad_h1.size(), Activation::sigmoid,
                              delta_f1.data());

  detail::fc_grad_params_raw(caches.f1.input.data(), delta_f1.data(), net.f1,
                             grads.g[4].data(), grads.g[5].data());
  Tensor<T> grad_fd({net.f1.in_dim()});
  detail::fc_grad_input_raw(delta_f1.data(), net.f1, grad_fd.data());

  Tensor<T> grad_flat = dropout_backward(grad_fd, caches.drop_flat);
  const std::size_t s2o = net.arch.s2_out();
  Tensor<T> grad_p2 = grad_flat.reshaped({net.arch.c2_maps, s2o, s2o});

  Tensor<T> grad_a2 = maxpool_backward(grad_p2, caches.s2);
  Tensor<T> delta_c2(grad_a2.shape());
  detail::activation_backward(grad_a2.data(), caches.c2.output.data(),
                              grad_a2.size(), Activation::sigmoid,
                              delta_c2.data());
  const std::size_t c2o = net.arch.c2_out(), s1o = net.arch.s1_out();
  detail::conv2d_grad_params_raw(delta_c2.data(), c2o, c2o,
                                 caches.c2.input.data(), s1o, s1o, net.c2,
                                 grads.g[2].data(), grads.g[3].data());
  if (net.freeze_c1) return;

  Tensor<T> grad_p1({net.arch.c1_maps, s1o, s1o});
  detail::conv2d_grad_input_raw(delta_c2.data(), c2o, c2o, net.c2,
                                grad_p1.data(), s1o, s1o);
  Tensor<T> grad_a1 = maxpool_backward(grad_p1, caches.s1);
  Tensor<T> delta_c1(grad_a1.shape());
  detail::activation_backward(grad_a1.data(), caches.c1.output.data(),
                              grad_a1.size(), Activation::sigmoid,
                              delta_c1.data());
  const std::size_t c1o = net.arch.c1_out(), in = net.arch.input_size;
  detail::conv2d_grad_params_raw(delta_c1.data(), c1o, c1o,
                                 caches.c1.input.data(), in, in, net.c1,
                                 grads.g[0].data(), grads.g[1].data());
}

template <typename T>
void backward(const Mlp<T>& net, const MlpCaches<T>& caches,
              const Tensor<T>& delta_head, GradSet<T>& grads) {
  const std::size_t n_layers = net.hidden.size();
  if (grads.g.size() != 2 * (n_layers + 1))
    throw std::invalid_argument("mlp backward: bad gradset");
  if (!caches.head.valid)
    throw std::invalid_argument("mlp backward: missing forward caches");

  detail::fc_grad_params_raw(caches.head.input.data(), delta_head.data(),
                             net.head, grads.g[2 * n_layers].data(),
                             grads.g[2 * n_layers + 1].data());
  Tensor<T> grad_out({net.head.in_dim()});
  detail::fc_grad_input_raw(delta_head.data(), net.head, grad_out.data());

  for (std::size_t l = n_layers; l-- > 0;) {
    const FcLayer<T>& fc = net.hidden[l];
    Tensor<T> delta({fc.out_dim()});
    detail::activation_backward(grad_out.data(), caches.hidden[l].output.data(),
                                grad_out.size(), Activation::sigmoid,
                                delta.data());
    detail::fc_grad_params_raw(caches.hidden[l].input.data(), delta.data(), fc,
                               grads.g[2 * l].data(), grads.g[2 * l + 1].data());
    grad_out = Tensor<T>({fc.in_dim()});
    detail::fc_grad_input_raw(delta.data(), fc, grad_out.data());
  }
}

// ---- Parameter accounting ----

struct LayerParamCount {
  std::string name;
  std::size_t count;
};

template <typename T>
std::vector<LayerParamCount> param_count_layers(const Cnn<T>& m) {
  return {{"C1", m.c1.kernels.size() + m.c1.bias.size()},
          {"S1", 0},
          {"C2", m.c2.kernels.size() + m.c2.bias.size()},
          {"S2", 0},
          {"F1", m.f1.weights.size() + m.f1.bias.size()},
          {"F2", m.f2.weights.size() + m.f2.bias.size()}};
}

template <typename T>
std::size_t param_count(const std::vector<ParamRef<T>>& refs) {
  std::size_t total = 0;
  for (const ParamRef<T>& r : refs) total += r.tensor->size();
  return total;
}

template <typename T>
std::size_t param_count(Cnn<T>& m) {
  auto refs = param_refs(m);
  return param_count(refs);
}

template <typename T>
std::size_t param_count(Mlp<T>& m) {
  auto refs = param_refs(m);
  return param_count(refs);
}

// p -= lr * g for every unfrozen parameter tensor.
template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, const GradSet<T>& grads,
              T lr) {
  if (params.size() != grads.g.size())
    throw std::invalid_argument("sgd_step: param/grad count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].frozen) continue;
    Tensor<T>& p = *params[i].tensor;
    const Tensor<T>& g = grads.g[i];
    if (!p.same_shape(g))
      throw std::invalid_argument("sgd_step: shape mismatch at " +
                                  params[i].name);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

// ---- Prediction ----

template <typename T>
struct Prediction {
  std::size_t label;
  Tensor<T> probs;
};

// Argmax of the network output; ties break to the lowest class index.
template <typename T, typename Model>
Prediction<T> predict(const Model& net, const Tensor<T>& input) {
  Tensor<T> out = forward(net, input, Mode::inference);
  std::size_t best = 0;
  for (std::size_t c = 1; c < out.size(); ++c)
    if (out[c] > out[best]) best = c;
  return {best, std::move(out)};
}

}  // namespace hbdr

#endif  // HBDR_NETWORK_HPP
