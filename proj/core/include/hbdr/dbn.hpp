#ifndef HBDR_DBN_HPP
#define HBDR_DBN_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hbdr/network.hpp"
#include "hbdr/rbm.hpp"
#include "hbdr/rng.hpp"
#include "hbdr/training.hpp"

namespace hbdr {

// layer_sizes starts with the flattened image size, then one entry per
// RBM hidden layer. Supervised fine-tuning settings ride in a
// TrainConfig (defaults: lr 0.1, batch 50, 30 epochs).
struct DbnConfig {
  std::vector<std::size_t> layer_sizes = {1024, 100, 100};
  CdConfig pretrain;  // CD-1, lr 0.1, momentum 0.5, penalty 2e-4, batch 50
  std::size_t pretrain_epochs = 30;
  TrainConfig finetune;
  std::size_t n_classes = 10;
  Loss loss = Loss::cross_entropy;
};

// Greedy layer-wise pretraining: RBM 1 learns the pixels, each later
// RBM learns the previous layer's hidden probabilities of the data.
// Layer l's CD chains draw from master.substream(kGibbs).substream(l),
// and initialization from master.substream(kInit), so training layer l
// never perturbs layers below it and zero epochs returns the
// initialized, untrained stack.
template <typename T>
std::vector<RbmParams<T>> greedy_pretrain(const Tensor<T>& data,
                                          const DbnConfig& cfg, Rng master) {
  if (data.rank() != 2)
    throw std::invalid_argument("pretrain: data must be [n, visible]");
  if (cfg.layer_sizes.size() < 2 || cfg.layer_sizes[0] != data.dim(1))
    throw std::invalid_argument(
        "pretrain: layer_sizes[0] must equal the flattened image size " +
        std::to_string(data.dim(1)));
  cfg.pretrain.validate();

  std::vector<RbmParams<T>> stack =
      build_rbm_stack<T>(cfg.layer_sizes, master.substream(stream::kInit));
  const Rng gibbs_base = master.substream(stream::kGibbs);

  Tensor<T> rep = data;
  const std::size_t n = data.dim(0);
  for (std::size_t l = 0; l < stack.size(); ++l) {
    RbmParams<T>& rbm = stack[l];
    Rng chain = gibbs_base.substream(l);
    RbmGrads<T> velocity(rbm);
    const std::size_t nv = rbm.n_visible();
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
      for (std::size_t start = 0; start < n; start += cfg.pretrain.batch_size) {
        const std::size_t bn = std::min(cfg.pretrain.batch_size, n - start);
        Tensor<T> batch({bn, nv});
        std::copy(rep.data() + start * nv, rep.data() + (start + bn) * nv,
                  batch.data());
        cd_update(batch, rbm, cfg.pretrain, chain, velocity);
      }
    }
    if (l + 1 == stack.size()) break;
    // Mean-field upward pass: probabilities, not samples.
    Tensor<T> next({n, rbm.n_hidden()});
    Tensor<T> v({nv});
    for (std::size_t s = 0; s < n; ++s) {
      std::copy(rep.data() + s * nv, rep.data() + (s + 1) * nv, v.data());
      Tensor<T> ph = prob_h_given_v(v, rbm);
      std::copy(ph.data(), ph.data() + ph.size(),
                next.data() + s * rbm.n_hidden());
    }
    rep = std::move(next);
  }
  return stack;
}

template <typename T>
struct FinetuneResult {
  Mlp<T> net;
  TrainReport report;
};

// Unrolls the stack into a sigmoid MLP with a fan-in-initialized
// softmax head, then trains the whole network with supervised SGD.
// The head stream is derived from the seed alone, so resuming from a
// saved stack equals the one-shot pipeline.
template <typename T>
FinetuneResult<T> finetune(const std::vector<RbmParams<T>>& stack,
                           const LabeledDataset& ds, const TrainConfig& cfg,
                           std::size_t n_classes,
                           Loss loss = Loss::cross_entropy,
                           Mlp<T>* best_out = nullptr) {
  Rng head_rng = Rng(cfg.seed).substream(stream::kInit).substream(100);
  FinetuneResult<T> r;
  r.net = unroll_rbm_stack(stack, n_classes, head_rng, loss);
  r.report = train(r.net, ds, cfg, n_classes, best_out);
  return r;
}

}  // namespace hbdr

#endif  // HBDR_DBN_HPP
