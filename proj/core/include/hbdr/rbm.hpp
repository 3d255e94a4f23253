#ifndef HBDR_RBM_HPP
#define HBDR_RBM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hbdr/rng.hpp"
#include "hbdr/tensor.hpp"

namespace hbdr {

// Bernoulli-Bernoulli RBM parameters theta = (w, b, a): symmetric
// weights w[i][j] between visible unit i and hidden unit j, visible
// biases a, hidden biases b.
template <typename T>
struct RbmParams {
  Tensor<T> w;  // [n_visible, n_hidden]
  Tensor<T> a;  // [n_visible]
  Tensor<T> b;  // [n_hidden]

  RbmParams() = default;
  RbmParams(std::size_t n_visible, std::size_t n_hidden)
      : w({n_visible, n_hidden}), a({n_visible}), b({n_hidden}) {}

  std::size_t n_visible() const { return w.dim(0); }
  std::size_t n_hidden() const { return w.dim(1); }
};

struct CdConfig {
  std::size_t k = 1;             // Gibbs steps per update
  double learning_rate = 0.1;
  double momentum = 0.5;
  double weight_penalty = 2e-4;  // L2, weights only
  std::size_t batch_size = 50;

  void validate() const {
    if (k < 1) throw std::invalid_argument("cd: k must be >= 1");
    if (learning_rate <= 0.0)
      throw std::invalid_argument("cd: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("cd: momentum must be in [0, 1)");
    if (weight_penalty < 0.0)
      throw std::invalid_argument("cd: penalty must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("cd: batch size >= 1");
  }
};

namespace detail {

template <typename T>
void check_rbm_vectors(const Tensor<T>& v, const Tensor<T>& h,
                       const RbmParams<T>& p) {
  if (v.rank() != 1 || v.dim(0) != p.n_visible())
    throw std::invalid_argument("rbm: visible vector size mismatch");
  if (h.rank() != 1 || h.dim(0) != p.n_hidden())
    throw std::invalid_argument("rbm: hidden vector size mismatch");
}

template <typename T>
void check_unit_interval(const Tensor<T>& batch) {
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (!(batch[i] >= T{0} && batch[i] <= T{1}))
      throw std::invalid_argument(
          "rbm: data values must lie in [0, 1] (binary or probabilities)");
}

}  // namespace detail

// E(v, h) = -sum_i a_i v_i - sum_j b_j h_j - sum_ij v_i h_j w_ij
template <typename T>
T energy(const Tensor<T>& v, const Tensor<T>& h, const RbmParams<T>& p) {
  detail::check_rbm_vectors(v, h, p);
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  T e = T{0};
  for (std::size_t i = 0; i < nv; ++i) e -= p.a[i] * v[i];
  for (std::size_t j = 0; j < nh; ++j) e -= p.b[j] * h[j];
  for (std::size_t i = 0; i < nv; ++i) {
    if (v[i] == T{0}) continue;
    const T* w_row = p.w.data() + i * nh;
    T s = T{0};
    for (std::size_t j = 0; j < nh; ++j) s += h[j] * w_row[j];
    e -= v[i] * s;
  }
  return e;
}

// p(h_j = 1 | v) = sigmoid(b_j + sum_i v_i w_ij)
template <typename T>
Tensor<T> prob_h_given_v(const Tensor<T>& v, const RbmParams<T>& p) {
  if (v.rank() != 1 || v.dim(0) != p.n_visible())
    throw std::invalid_argument("rbm: visible vector size mismatch");
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  Tensor<T> out({nh});
  for (std::size_t j = 0; j < nh; ++j) out[j] = p.b[j];
  for (std::size_t i = 0; i < nv; ++i) {
    const T vi = v[i];
    if (vi == T{0}) continue;
    const T* w_row = p.w.data() + i * nh;
    for (std::size_t j = 0; j < nh; ++j) out[j] += vi * w_row[j];
  }
  for (std::size_t j = 0; j < nh; ++j) out[j] = sigmoid(out[j]);
  return out;
}

// p(v_i = 1 | h) = sigmoid(a_i + sum_j h_j w_ij)
template <typename T>
Tensor<T> prob_v_given_h(const Tensor<T>& h, const RbmParams<T>& p) {
  if (h.rank() != 1 || h.dim(0) != p.n_hidden())
    throw std::invalid_argument("rbm: hidden vector size mismatch");
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  Tensor<T> out({nv});
  for (std::size_t i = 0; i < nv; ++i) {
    const T* w_row = p.w.data() + i * nh;
    T s = p.a[i];
    for (std::size_t j = 0; j < nh; ++j) s += h[j] * w_row[j];
    out[i] = sigmoid(s);
  }
  return out;
}

template <typename T>
Tensor<T> sample_bernoulli(const Tensor<T>& probs, Rng& rng) {
  Tensor<T> out(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i)
    out[i] = rng.bernoulli(static_cast<double>(probs[i])) ? T{1} : T{0};
  return out;
}

template <typename T>
struct GibbsResult {
  Tensor<T> h_sample;
  Tensor<T> v_reconstruction;
  Tensor<T> h_probs;
  Tensor<T> v_probs;
};

// One alternating Gibbs step: sample h from p(h|v), then sample v'
// from p(v|h).
template <typename T>
GibbsResult<T> gibbs_step(const Tensor<T>& v, const RbmParams<T>& p,
                          Rng& rng) {
  GibbsResult<T> r;
  r.h_probs = prob_h_given_v(v, p);
  r.h_sample = sample_bernoulli(r.h_probs, rng);
  r.v_probs = prob_v_given_h(r.h_sample, p);
  r.v_reconstruction = sample_bernoulli(r.v_probs, rng);
  return r;
}

template <typename T>
struct RbmGrads {
  Tensor<T> w;
  Tensor<T> a;
  Tensor<T> b;

  RbmGrads() = default;
  explicit RbmGrads(const RbmParams<T>& p)
      : w(p.w.shape()), a(p.a.shape()), b(p.b.shape()) {}
};

// Batch-mean CD-k statistic (positive minus negative phase), the
// stochastic ascent direction before learning rate, momentum, and
// penalty are applied.
//
// Data-side hidden statistics are probabilities; the chain samples
// hidden states and carries probability-valued visible
// reconstructions; the final statistics on the reconstruction side are
// probability-valued on both units. Each sample draws an independent
// child generator from `rng` in sample order, so the reduction is
// deterministic and samples could be evaluated in parallel.
template <typename T>
RbmGrads<T> cd_statistics(const Tensor<T>& batch, const RbmParams<T>& p,
                          std::size_t k, Rng& rng) {
  if (batch.rank() != 2 || batch.dim(1) != p.n_visible())
    throw std::invalid_argument("cd: batch must be [n, n_visible]");
  detail::check_unit_interval(batch);
  const std::size_t n = batch.dim(0), nv = p.n_visible(), nh = p.n_hidden();
  std::vector<std::uint64_t> child_seeds(n);
  for (std::size_t s = 0; s < n; ++s) child_seeds[s] = rng.next_u64();

  RbmGrads<T> g(p);
  Tensor<T> v0({nv});
  for (std::size_t s = 0; s < n; ++s) {
    Rng chain(child_seeds[s]);
    for (std::size_t i = 0; i < nv; ++i) v0[i] = batch[s * nv + i];
    Tensor<T> ph0 = prob_h_given_v(v0, p);
    Tensor<T> ph = ph0;
    Tensor<T> v = v0;
    for (std::size_t t = 0; t < k; ++t) {
      Tensor<T> h = sample_bernoulli(ph, chain);
      v = prob_v_given_h(h, p);
      ph = prob_h_given_v(v, p);
    }
    for (std::size_t i = 0; i < nv; ++i) {
      const T dpos = v0[i], dneg = v[i];
      T* gw_row = g.w.data() + i * nh;
      const T* ph0_p = ph0.data();
      const T* phk_p = ph.data();
      for (std::size_t j = 0; j < nh; ++j)
        gw_row[j] += dpos * ph0_p[j] - dneg * phk_p[j];
      g.a[i] += dpos - dneg;
    }
    for (std::size_t j = 0; j < nh; ++j) g.b[j] += ph0[j] - ph[j];
  }
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < g.w.size(); ++i) g.w[i] *= inv_n;
  for (std::size_t i = 0; i < g.a.size(); ++i) g.a[i] *= inv_n;
  for (std::size_t j = 0; j < g.b.size(); ++j) g.b[j] *= inv_n;
  return g;
}

// One CD-k parameter update with momentum and L2 penalty on the
// weights:
//   vel    = momentum * vel + lr * (pos - neg) / batch
//   w     += vel_w - lr * penalty * w
//   a, b  += vel (no penalty on biases)
template <typename T>
void cd_update(const Tensor<T>& batch, RbmParams<T>& p, const CdConfig& cfg,
               Rng& rng, RbmGrads<T>& velocity) {
  cfg.validate();
  if (!velocity.w.same_shape(p.w))
    throw std::invalid_argument("cd_update: velocity shape mismatch");
  RbmGrads<T> g = cd_statistics(batch, p, cfg.k, rng);
  const T lr = static_cast<T>(cfg.learning_rate);
  const T mom = static_cast<T>(cfg.momentum);
  const T decay = static_cast<T>(cfg.learning_rate * cfg.weight_penalty);
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    velocity.w[i] = mom * velocity.w[i] + lr * g.w[i];
    p.w[i] += velocity.w[i] - decay * p.w[i];
  }
  for (std::size_t i = 0; i < p.a.size(); ++i) {
    velocity.a[i] = mom * velocity.a[i] + lr * g.a[i];
    p.a[i] += velocity.a[i];
  }
  for (std::size_t j = 0; j < p.b.size(); ++j) {
    velocity.b[j] = mom * velocity.b[j] + lr * g.b[j];
    p.b[j] += velocity.b[j];
  }
}

// ---- Exact oracles (enumeration; tiny models only) ----

namespace detail {

inline void check_enumeration_guard(std::size_t nv, std::size_t nh) {
  if (nv + nh > 20)
    throw std::invalid_argument(
        "rbm: exact enumeration limited to n_visible + n_hidden <= 20");
}

template <typename T>
void state_from_mask(std::uint64_t mask, Tensor<T>& out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>((mask >> i) & 1u);
}

}  // namespace detail

// Z = sum over all joint states of exp(-E(v, h)), by direct double
// enumeration of Eq-style joint states.
template <typename T>
double exact_partition(const RbmParams<T>& p) {
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  detail::check_enumeration_guard(nv, nh);
  Tensor<T> v({nv}), h({nh});
  double z = 0.0;
  for (std::uint64_t mv = 0; mv < (1ull << nv); ++mv) {
    detail::state_from_mask(mv, v);
    for (std::uint64_t mh = 0; mh < (1ull << nh); ++mh) {
      detail::state_from_mask(mh, h);
      z += std::exp(-static_cast<double>(energy(v, h, p)));
    }
  }
  return z;
}

// Unnormalized marginal sum_h exp(-E(v, h)) in product form:
// exp(a.v) * prod_j (1 + exp(b_j + sum_i v_i w_ij)). This is an
// independent algebraic route from the joint enumeration above.
template <typename T>
double exact_unnormalized_marginal(const Tensor<T>& v, const RbmParams<T>& p) {
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  double log_term = 0.0;
  for (std::size_t i = 0; i < nv; ++i)
    log_term += static_cast<double>(p.a[i]) * static_cast<double>(v[i]);
  for (std::size_t j = 0; j < nh; ++j) {
    double s = static_cast<double>(p.b[j]);
    for (std::size_t i = 0; i < nv; ++i)
      s += static_cast<double>(v[i]) * static_cast<double>(p.w[i * nh + j]);
    // log(1 + e^s), stable on both sides
    log_term += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }
  return std::exp(log_term);
}

// Mean over the dataset rows of log p(v).
template <typename T>
double exact_log_likelihood(const Tensor<T>& dataset, const RbmParams<T>& p) {
  if (dataset.rank() != 2 || dataset.dim(1) != p.n_visible())
    throw std::invalid_argument("rbm: dataset must be [n, n_visible]");
  detail::check_enumeration_guard(p.n_visible(), p.n_hidden());
  const double log_z = std::log(exact_partition(p));
  const std::size_t n = dataset.dim(0), nv = p.n_visible();
  Tensor<T> v({nv});
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < nv; ++i) v[i] = dataset[s * nv + i];
    total += std::log(exact_unnormalized_marginal(v, p)) - log_z;
  }
  return total / static_cast<double>(n);
}

// Exact gradient of the mean log-likelihood: data expectation (hidden
// term via the Eq. 9 conditional) minus model expectation via full
// enumeration of the visible states.
template <typename T>
RbmGrads<T> exact_gradient(const Tensor<T>& dataset, const RbmParams<T>& p) {
  if (dataset.rank() != 2 || dataset.dim(1) != p.n_visible())
    throw std::invalid_argument("rbm: dataset must be [n, n_visible]");
  const std::size_t nv = p.n_visible(), nh = p.n_hidden();
  detail::check_enumeration_guard(nv, nh);
  RbmGrads<T> g(p);

  const std::size_t n = dataset.dim(0);
  Tensor<T> v({nv});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < nv; ++i) v[i] = dataset[s * nv + i];
    Tensor<T> ph = prob_h_given_v(v, p);
    for (std::size_t i = 0; i < nv; ++i) {
      T* gw_row = g.w.data() + i * nh;
      for (std::size_t j = 0; j < nh; ++j) gw_row[j] += v[i] * ph[j];
      g.a[i] += v[i];
    }
    for (std::size_t j = 0; j < nh; ++j) g.b[j] += ph[j];
  }
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < g.w.size(); ++i) g.w[i] *= inv_n;
  for (std::size_t i = 0; i < g.a.size(); ++i) g.a[i] *= inv_n;
  for (std::size_t j = 0; j < g.b.size(); ++j) g.b[j] *= inv_n;

  const double z = exact_partition(p);
  for (std::uint64_t mv = 0; mv < (1ull << nv); ++mv) {
    detail::state_from_mask(mv, v);
    const double pv = exact_unnormalized_marginal(v, p) / z;
    Tensor<T> ph = prob_h_given_v(v, p);
    for (std::size_t i = 0; i < nv; ++i) {
      if (v[i] == T{0}) continue;
      T* gw_row = g.w.data() + i * nh;
      for (std::size_t j = 0; j < nh; ++j)
        gw_row[j] -= static_cast<T>(pv * static_cast<double>(ph[j]));
      g.a[i] -= static_cast<T>(pv);
    }
    for (std::size_t j = 0; j < nh; ++j)
      g.b[j] -= static_cast<T>(pv * static_cast<double>(ph[j]));
  }
  return g;
}

}  // namespace hbdr

#endif  // HBDR_RBM_HPP
