#ifndef HBDR_TRAINING_HPP
#define HBDR_TRAINING_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hbdr/dataio.hpp"
#include "hbdr/filters.hpp"
#include "hbdr/network.hpp"
#include "hbdr/parallel.hpp"
#include "hbdr/rng.hpp"

namespace hbdr {

// Gradients are always reduced over this many fixed sample chunks, so
// results are byte-identical for any --threads value.
inline constexpr std::size_t kGradChunks = 8;

// Everything needed to assemble a network. DBN pretraining itself
// needs data and happens in `dbn`; build_network for the dbn variant
// returns the unrolled, randomly initialized (unpretrained) stack.
struct NetworkConfig {
  Variant variant = Variant::cnn_gaussian;
  CnnArch arch;
  Loss loss = Loss::cross_entropy;
  double keep_prob = 0.5;  // used by *-dropout variants only
  bool freeze_c1 = false;
  double gaussian_std = 0.1;
  GaborSpec gabor;
  std::vector<std::size_t> dbn_layers = {1024, 100, 100};
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 50;
  double lr = 0.1;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  bool verbose = false;  // per-epoch progress on stderr
};

struct Misclassified {
  std::size_t index;  // dataset index
  int label;
  int predicted;
};

struct Evaluation {
  double accuracy = 0.0;
  std::size_t n_classes = 0;
  std::vector<std::size_t> confusion;  // [n_classes^2], row true, col pred
  std::vector<Misclassified> misclassified;
  std::size_t total = 0;
};

struct EpochStat {
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  Evaluation final_eval;
  std::size_t best_epoch = 0;  // 1-based
  double best_accuracy = 0.0;
};

namespace detail {

template <typename T>
Tensor<T> sample_input(const Cnn<T>& net, const LabeledDataset& ds,
                       std::size_t i) {
  (void)net;
  return ds.image(i);
}

template <typename T>
Tensor<T> sample_input(const Mlp<T>& net, const LabeledDataset& ds,
                       std::size_t i) {
  (void)net;
  Tensor<T> img = ds.image(i);
  return img.reshaped({img.size()});
}

}  // namespace detail

// Inference over the given indices: accuracy, confusion matrix, and
// the misclassified list. Chunk-parallel; per-sample results land in a
// fixed-order buffer so the reduction is order-independent.
template <typename Model>
Evaluation evaluate(const Model& net, const LabeledDataset& ds,
                    const std::vector<std::size_t>& indices,
                    std::size_t n_classes, std::size_t threads = 1) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty split");
  std::vector<int> predicted(indices.size());
  parallel_chunks(kGradChunks, threads, [&](std::size_t c) {
    const std::size_t lo = chunk_begin(indices.size(), kGradChunks, c);
    const std::size_t hi = chunk_begin(indices.size(), kGradChunks, c + 1);
    for (std::size_t k = lo; k < hi; ++k) {
      Tensor<float> in = detail::sample_input(net, ds, indices[k]);
      Prediction<float> p = predict(net, in);
      predicted[k] = static_cast<int>(p.label);
    }
  });

  Evaluation ev;
  ev.n_classes = n_classes;
  ev.confusion.assign(n_classes * n_classes, 0);
  ev.total = indices.size();
  std::size_t correct = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int truth = ds.labels[indices[k]];
    const int pred = predicted[k];
    ev.confusion[static_cast<std::size_t>(truth) * n_classes +
                 static_cast<std::size_t>(pred)]++;
    if (truth == pred)
      ++correct;
    else
      ev.misclassified.push_back({indices[k], truth, pred});
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.total);
  return ev;
}

// Minibatch SGD with per-epoch Fisher-Yates shuffling and test
// evaluation after every epoch. Deterministic given cfg.seed: the
// shuffle stream is substream(kShuffle).substream(epoch), a sample's
// dropout stream is substream(kDropout).substream(epoch).substream(pos)
// where pos is its position in the shuffled epoch order, and gradients
// reduce over kGradChunks fixed chunks in chunk order.
//
// If best_out is non-null it receives a copy of the model as of its
// best test-accuracy epoch.
template <typename Model>
TrainReport train(Model& net, const LabeledDataset& ds,
                  const TrainConfig& cfg, std::size_t n_classes,
                  Model* best_out = nullptr) {
  if (!ds.split) throw std::invalid_argument("train: dataset has no split");
  const std::vector<std::size_t>& train_idx = ds.split->train;
  const std::vector<std::size_t>& test_idx = ds.split->test;
  if (train_idx.empty() || test_idx.empty())
    throw std::invalid_argument("train: empty split");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size 0");
  if (cfg.epochs == 0) throw std::invalid_argument("train: zero epochs");

  const Rng base(cfg.seed);
  const Rng shuffle_base = base.substream(stream::kShuffle);
  const Rng dropout_base = base.substream(stream::kDropout);

  std::vector<ParamRef<float>> params = param_refs(net);
  std::vector<GradSet<float>> chunk_grads(kGradChunks);
  for (GradSet<float>& g : chunk_grads) g = make_gradset(params);
  GradSet<float> total = make_gradset(params);

  TrainReport report;
  std::vector<std::size_t> order(train_idx);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle = shuffle_base.substream(epoch);
    std::copy(train_idx.begin(), train_idx.end(), order.begin());
    for (std::size_t i = order.size(); i-- > 1;) {
      const std::size_t j = shuffle.next_below(i + 1);
      std::swap(order[i], order[j]);
    }
    const Rng epoch_dropout = dropout_base.substream(epoch);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t batch_n =
          std::min(cfg.batch_size, order.size() - start);
      std::vector<double> chunk_loss(kGradChunks, 0.0);
      parallel_chunks(kGradChunks, cfg.threads, [&](std::size_t c) {
        GradSet<float>& grads = chunk_grads[c];
        grads.zero();
        const std::size_t lo = chunk_begin(batch_n, kGradChunks, c);
        const std::size_t hi = chunk_begin(batch_n, kGradChunks, c + 1);
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t pos = start + k;
          const std::size_t sample = order[pos];
          Rng drop = epoch_dropout.substream(pos);
          auto caches = make_caches(net);
          Tensor<float> in = detail::sample_input(net, ds, sample);
          Tensor<float> out =
              forward(net, in, Mode::training, &drop, &caches);
          const std::size_t label =
              static_cast<std::size_t>(ds.labels[sample]);
          chunk_loss[c] += loss_value(out, label, net.loss);
          Tensor<float> delta = loss_delta_pre(out, label, net.loss);
          backward(net, caches, delta, grads);
        }
      });
      total.zero();
      for (std::size_t c = 0; c < kGradChunks; ++c) {
        total.add(chunk_grads[c]);
        loss_sum += chunk_loss[c];
      }
      total.scale(1.0f / static_cast<float>(batch_n));
      sgd_step(params, total, static_cast<float>(cfg.lr));
    }

    Evaluation ev = evaluate(net, ds, test_idx, n_classes, cfg.threads);
    EpochStat stat;
    stat.train_loss = loss_sum / static_cast<double>(order.size());
    stat.test_accuracy = ev.accuracy;
    stat.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report.epochs.push_back(stat);
    if (ev.accuracy > report.best_accuracy || report.best_epoch == 0) {
      report.best_accuracy = ev.accuracy;
      report.best_epoch = epoch + 1;
      if (best_out) *best_out = net;
    }
    if (epoch + 1 == cfg.epochs) report.final_eval = std::move(ev);
    if (cfg.verbose)
      std::fprintf(stderr,
                   "epoch %zu/%zu  loss %.6f  test accuracy %.4f  (%.1fs)\n",
                   epoch + 1, cfg.epochs, stat.train_loss, stat.test_accuracy,
                   stat.seconds);
  }
  return report;
}

// ---- Network assembly ----

inline CnnArch arch_from(const NetworkConfig& cfg) {
  CnnArch a = cfg.arch;
  a.validate();
  return a;
}

template <typename T>
Cnn<T> build_cnn(const NetworkConfig& cfg, Rng init_rng) {
  if (!variant_is_cnn(cfg.variant))
    throw std::invalid_argument("build_cnn: not a CNN variant");
  Cnn<T> net(arch_from(cfg), cfg.loss);
  net.keep_prob = variant_has_dropout(cfg.variant) ? cfg.keep_prob : 1.0;
  net.freeze_c1 = cfg.freeze_c1;
  init_cnn(net, cfg.variant, init_rng, cfg.gaussian_std, cfg.gabor);
  return net;
}

template <typename T>
std::vector<RbmParams<T>> build_rbm_stack(
    const std::vector<std::size_t>& layer_sizes, Rng init_rng) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("dbn: need at least visible + one hidden");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw std::invalid_argument("dbn: layer sizes must be > 0");
  std::vector<RbmParams<T>> stack;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    Rng r = init_rng.substream(10 + l);
    stack.push_back(init_rbm<T>(layer_sizes[l], layer_sizes[l + 1], r));
  }
  return stack;
}

template <typename T>
Mlp<T> build_mlp(const NetworkConfig& cfg, Rng init_rng,
                 std::size_t n_classes) {
  std::vector<RbmParams<T>> stack =
      build_rbm_stack<T>(cfg.dbn_layers, init_rng);
  Rng head = init_rng.substream(100);
  return unroll_rbm_stack(stack, n_classes, head, cfg.loss);
}

// Constructed and initialized per the variant; DBN comes back as the
// unrolled (unpretrained) stack. Pretraining is a separate, data-
// dependent step.
using Network = std::variant<Cnn<float>, Mlp<float>>;

inline Network build_network(const NetworkConfig& cfg, Rng init_rng) {
  if (variant_is_cnn(cfg.variant)) return build_cnn<float>(cfg, init_rng);
  return build_mlp<float>(cfg, init_rng, cfg.arch.n_classes);
}

// ---- CSV / report output ----

inline void write_report_csv(const TrainReport& report,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "epoch,train_loss,test_accuracy\n";
  char line[96];
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.6f\n", e + 1,
                  report.epochs[e].train_loss,
                  report.epochs[e].test_accuracy);
    out << line;
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline void write_confusion_csv(const Evaluation& ev,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (std::size_t r = 0; r < ev.n_classes; ++r) {
    for (std::size_t c = 0; c < ev.n_classes; ++c) {
      if (c) out << ',';
      out << ev.confusion[r * ev.n_classes + c];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline void write_misclassified_csv(const Evaluation& ev,
                                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "index,true,predicted\n";
  for (const Misclassified& m : ev.misclassified)
    out << m.index << ',' << m.label << ',' << m.predicted << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace hbdr

#endif  // HBDR_TRAINING_HPP
