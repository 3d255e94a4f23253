// Command-line front end: train / eval / pretrain / export /
// export-filters. Every run is reproducible from (config, seed, data);
// the resolved config is echoed into the model file so eval and export
// can rebuild the exact split.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hbdr/config.hpp>
#include <hbdr/dataio.hpp>
#include <hbdr/dbn.hpp>
#include <hbdr/filters.hpp>
#include <hbdr/model_io.hpp>
#include <hbdr/network.hpp>
#include <hbdr/rng.hpp>
#include <hbdr/training.hpp>

namespace {

using namespace hbdr;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

// Flags shared by train and pretrain. Presence is tracked so that only
// flags the user actually passed override the config file.
struct CommonFlags {
  std::string config_path;
  std::optional<std::string> variant, loss, data, out;
  std::optional<std::size_t> epochs, batch_size, threads;
  std::optional<std::size_t> train_per_class, test_per_class;
  std::optional<std::size_t> pretrain_epochs;
  std::optional<double> lr, keep_prob, binarize;
  std::optional<std::uint64_t> seed;
  bool freeze_c1 = false;
  bool save_best = false;
  bool verbose = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path,
                  "key = value config file (flags override it)");
  cmd->add_option("--variant", f.variant,
                  "dbn | cnn | cnn-dropout | cnn-gaussian | cnn-gabor | "
                  "cnn-gaussian-dropout | cnn-gabor-dropout");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--seed", f.seed, "master seed for all randomness");
  cmd->add_option("--threads", f.threads, "worker threads (1 = serial)");
  cmd->add_option("--train-per-class", f.train_per_class,
                  "training samples drawn per class");
  cmd->add_option("--test-per-class", f.test_per_class,
                  "test samples kept per class (0 = all remaining)");
  cmd->add_option("--keep-prob", f.keep_prob,
                  "dropout keep probability (dropout variants)");
  cmd->add_flag("--freeze-c1", f.freeze_c1,
                "skip gradient updates for the first conv layer");
  cmd->add_option("--binarize", f.binarize,
                  "threshold pixels at this value (negative = off)");
  cmd->add_option("--loss", f.loss, "xent | mse");
  cmd->add_option("--data", f.data,
                  "dataset: class-directory root or idx:IMAGES,LABELS");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--pretrain-epochs", f.pretrain_epochs,
                  "epochs per RBM layer (dbn)");
  cmd->add_flag("--save-best", f.save_best,
                "also write the best test-accuracy epoch as best.hbdr");
  cmd->add_flag("--verbose", f.verbose, "per-epoch progress on stderr");
}

// Config file first, then flag overrides rendered back through the
// config parser so both paths share one validation story.
RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_config_file(f.config_path, cfg);

  std::string overrides;
  auto add = [&overrides](const char* key, const std::string& value) {
    overrides += key;
    overrides += " = ";
    overrides += value;
    overrides += "\n";
  };
  char buf[64];
  auto num = [&buf](std::size_t v) {
    std::snprintf(buf, sizeof buf, "%zu", v);
    return std::string(buf);
  };
  auto flt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  if (f.variant) add("variant", *f.variant);
  if (f.epochs) add("epochs", num(*f.epochs));
  if (f.batch_size) add("batch_size", num(*f.batch_size));
  if (f.lr) add("lr", flt(*f.lr));
  if (f.seed) {
    std::snprintf(buf, sizeof buf, "%" PRIu64, *f.seed);
    add("seed", buf);
  }
  if (f.threads) add("threads", num(*f.threads));
  if (f.train_per_class) add("train_per_class", num(*f.train_per_class));
  if (f.test_per_class) add("test_per_class", num(*f.test_per_class));
  if (f.keep_prob) add("keep_prob", flt(*f.keep_prob));
  if (f.freeze_c1) add("freeze_c1", "true");
  if (f.binarize) add("binarize", flt(*f.binarize));
  if (f.loss) add("loss", *f.loss);
  if (f.data) add("data", *f.data);
  if (f.out) add("out", *f.out);
  if (f.pretrain_epochs) add("pretrain_epochs", num(*f.pretrain_epochs));
  if (f.save_best) add("save_best", "true");

  cfg = parse_config(overrides, cfg);
  if (cfg.data.empty())
    if (const char* env = std::getenv("HBDR_DATA")) cfg.data = env;
  return cfg;
}

std::string acquisition_help() {
  return
      "no dataset found. Point --data (or the HBDR_DATA env var) at either\n"
      "  - a directory with one subdirectory per digit class (0..9) holding\n"
      "    32x32 grayscale PGM or PNG images, or\n"
      "  - an IDX pair: --data idx:IMAGES,LABELS (28x28 inputs are\n"
      "    zero-padded to 32x32).\n"
      "CMATERdb 3.1.1 (Bangla numerals) is not redistributed here; download\n"
      "it from its distribution page and unpack into per-class directories.\n"
      "A 6000-sample handwritten-digit subset ships in this repository:\n"
      "  --data idx:data/mnist6k/images-idx3-ubyte,data/mnist6k/labels-idx1-ubyte";
}

// Loads, optionally binarizes, and splits per the config.
LabeledDataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) fail(acquisition_help());
  LabeledDataset ds;
  std::string images, labels;
  if (parse_idx_spec(cfg.data, images, labels)) {
    ds = load_idx(images, labels);
  } else {
    if (!std::filesystem::exists(cfg.data))
      fail("data path '" + cfg.data + "' does not exist.\n" +
           acquisition_help());
    ds = load_dir(cfg.data);
  }
  if (cfg.binarize >= 0.0) binarize(ds, cfg.binarize);
  stratified_split(ds, cfg.train_per_class, cfg.seed, cfg.test_per_class);
  return ds;
}

// report.csv + confusion.csv + misclassified.csv + a mosaic of up to
// 100 misclassified test digits, 10 per row.
void write_artifacts(const TrainReport& report, const LabeledDataset& ds,
                     const std::string& out_dir) {
  write_report_csv(report, out_dir + "/report.csv");
  write_confusion_csv(report.final_eval, out_dir + "/confusion.csv");
  write_misclassified_csv(report.final_eval, out_dir + "/misclassified.csv");
  std::vector<Tensor<float>> tiles;
  for (const Misclassified& m : report.final_eval.misclassified) {
    if (tiles.size() == 100) break;
    tiles.push_back(ds.image(m.index));
  }
  if (!tiles.empty())
    export_grid(tiles, 10, out_dir + "/misclassified.pgm");
}

int cmd_train(const CommonFlags& flags, const std::string& stack_path) {
  RunConfig cfg = resolve_config(flags);
  const NetworkConfig nc = cfg.network();
  const std::string echo = render_config(cfg);
  LabeledDataset ds = load_dataset(cfg);
  std::filesystem::create_directories(cfg.out);

  TrainReport report;
  ModelFile final_model, best_model;
  if (nc.variant == Variant::dbn) {
    DbnConfig dc = cfg.dbn();
    dc.finetune.verbose = flags.verbose;
    std::vector<RbmParams<float>> stack;
    if (!stack_path.empty()) {
      stack = stack_from_model(load_model(stack_path));
    } else {
      Tensor<float> flat = flatten_images(ds, ds.split->train);
      stack = greedy_pretrain(flat, dc, Rng(cfg.seed));
    }
    Mlp<float> best;
    FinetuneResult<float> r =
        finetune(stack, ds, dc.finetune, dc.n_classes, dc.loss,
                 cfg.save_best ? &best : nullptr);
    report = std::move(r.report);
    final_model = to_model_file(r.net, echo);
    if (cfg.save_best) best_model = to_model_file(best, echo);
  } else {
    TrainConfig tc = cfg.train();
    tc.verbose = flags.verbose;
    Cnn<float> net =
        build_cnn<float>(nc, Rng(cfg.seed).substream(stream::kInit));
    Cnn<float> best;
    report = train(net, ds, tc, nc.arch.n_classes,
                   cfg.save_best ? &best : nullptr);
    final_model = to_model_file(net, echo);
    if (cfg.save_best) best_model = to_model_file(best, echo);
  }

  save_model(final_model, cfg.out + "/model.hbdr");
  if (cfg.save_best) save_model(best_model, cfg.out + "/best.hbdr");
  write_artifacts(report, ds, cfg.out);
  std::printf("final accuracy %.6f  best %.6f at epoch %zu  -> %s\n",
              report.final_eval.accuracy, report.best_accuracy,
              report.best_epoch, cfg.out.c_str());
  return 0;
}

int cmd_pretrain(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  DbnConfig dc = cfg.dbn();
  LabeledDataset ds = load_dataset(cfg);
  Tensor<float> flat = flatten_images(ds, ds.split->train);
  std::vector<RbmParams<float>> stack =
      greedy_pretrain(flat, dc, Rng(cfg.seed));
  std::filesystem::create_directories(cfg.out);
  const std::string path = cfg.out + "/stack.hbdr";
  save_model(to_model_file(stack, render_config(cfg)), path);
  std::printf("wrote %s (%zu rbm layers)\n", path.c_str(), stack.size());
  return 0;
}

int cmd_eval(const std::string& model_path,
             const std::optional<std::string>& data_override,
             const std::optional<std::size_t>& threads_override) {
  ModelFile m = load_model(model_path);
  RunConfig cfg = parse_config(m.config_text, RunConfig{});
  if (data_override) cfg.data = *data_override;
  const std::size_t threads = threads_override.value_or(cfg.threads);
  LabeledDataset ds = load_dataset(cfg);

  Evaluation ev;
  if (m.kind == ModelKind::cnn) {
    Cnn<float> net = cnn_from_model(m);
    ev = evaluate(net, ds, ds.split->test, net.arch.n_classes, threads);
  } else if (m.kind == ModelKind::dbn) {
    Mlp<float> net = mlp_from_model(m);
    ev = evaluate(net, ds, ds.split->test, net.n_classes(), threads);
  } else {
    fail("model '" + model_path +
         "' is an rbm stack with no classifier head; fine-tune it with "
         "`train --stack` first");
  }

  std::size_t correct = 0;
  for (std::size_t c = 0; c < ev.n_classes; ++c)
    correct += ev.confusion[c * ev.n_classes + c];
  std::printf("accuracy %.6f (%zu/%zu)\n", ev.accuracy, correct, ev.total);
  for (std::size_t c = 0; c < ev.n_classes; ++c) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < ev.n_classes; ++j)
      row += ev.confusion[c * ev.n_classes + j];
    const std::size_t hit = ev.confusion[c * ev.n_classes + c];
    const double recall =
        row ? static_cast<double>(hit) / static_cast<double>(row) : 0.0;
    std::printf("class %zu recall %.6f (%zu/%zu)\n", c, recall, hit, row);
  }
  return 0;
}

// One tile per filter / hidden unit, min-max scaled, plus a mosaic.
void write_tile_set(const std::vector<Tensor<float>>& tiles,
                    const std::string& out_dir, const std::string& stem,
                    std::size_t columns) {
  char name[64];
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    std::snprintf(name, sizeof name, "/%s_%03zu.pgm", stem.c_str(), i);
    export_pgm(tiles[i], out_dir + name, true);
  }
  export_grid(tiles, columns, out_dir + "/" + stem + "s.pgm", true);
}

std::vector<Tensor<float>> kernel_tiles(const Tensor<float>& kernels) {
  std::vector<Tensor<float>> tiles;
  const std::size_t oc = kernels.dim(0), kh = kernels.dim(2),
                    kw = kernels.dim(3);
  for (std::size_t o = 0; o < oc; ++o) {
    Tensor<float> t({kh, kw});
    for (std::size_t r = 0; r < kh; ++r)
      for (std::size_t c = 0; c < kw; ++c) t.at(r, c) = kernels.at(o, 0, r, c);
    tiles.push_back(std::move(t));
  }
  return tiles;
}

// Hidden-unit incoming weight vectors as square tiles. The dbn kind
// stores them as rows of h0.weights, a raw stack as columns of rbm0.w.
std::vector<Tensor<float>> weight_tiles(const ModelFile& m) {
  std::vector<Tensor<float>> tiles;
  if (m.kind == ModelKind::dbn) {
    Mlp<float> net = mlp_from_model(m);
    if (net.hidden.empty()) fail("model has no hidden layers");
    const Tensor<float>& w = net.hidden.front().weights;  // [n_h, n_v]
    const auto side = static_cast<std::size_t>(std::lround(
        std::sqrt(static_cast<double>(w.dim(1)))));
    if (side * side != w.dim(1))
      fail("layer-1 input dim " + std::to_string(w.dim(1)) +
           " is not a square image");
    for (std::size_t h = 0; h < w.dim(0); ++h) {
      Tensor<float> t({side, side});
      for (std::size_t i = 0; i < w.dim(1); ++i)
        t.at(i / side, i % side) = w.at(h, i);
      tiles.push_back(std::move(t));
    }
    return tiles;
  }
  std::vector<RbmParams<float>> stack = stack_from_model(m);
  const Tensor<float>& w = stack.front().w;  // [n_v, n_h]
  const auto side = static_cast<std::size_t>(std::lround(
      std::sqrt(static_cast<double>(w.dim(0)))));
  if (side * side != w.dim(0))
    fail("layer-1 visible dim " + std::to_string(w.dim(0)) +
         " is not a square image");
  for (std::size_t h = 0; h < w.dim(1); ++h) {
    Tensor<float> t({side, side});
    for (std::size_t i = 0; i < w.dim(0); ++i)
      t.at(i / side, i % side) = w.at(i, h);
    tiles.push_back(std::move(t));
  }
  return tiles;
}

int cmd_export(const std::string& model_path, const std::string& what,
               const std::string& out_dir,
               const std::optional<std::string>& data_override,
               const std::optional<std::size_t>& threads_override) {
  ModelFile m = load_model(model_path);
  std::filesystem::create_directories(out_dir);

  if (what == "filters") {
    if (m.kind != ModelKind::cnn)
      fail("filters export needs a cnn model; '" + model_path + "' is " +
           model_kind_name(m.kind));
    Cnn<float> net = cnn_from_model(m);
    write_tile_set(kernel_tiles(net.c1.kernels), out_dir, "filter", 8);
    return 0;
  }
  if (what == "weights") {
    if (m.kind == ModelKind::cnn)
      fail("weights export renders hidden-unit images and needs a dbn or "
           "rbm-stack model; use `export --what filters` for cnn kernels");
    write_tile_set(weight_tiles(m), out_dir, "weight", 10);
    return 0;
  }
  if (what == "misclassified") {
    RunConfig cfg = parse_config(m.config_text, RunConfig{});
    if (data_override) cfg.data = *data_override;
    const std::size_t threads = threads_override.value_or(cfg.threads);
    LabeledDataset ds = load_dataset(cfg);
    Evaluation ev;
    if (m.kind == ModelKind::cnn) {
      Cnn<float> net = cnn_from_model(m);
      ev = evaluate(net, ds, ds.split->test, net.arch.n_classes, threads);
    } else if (m.kind == ModelKind::dbn) {
      Mlp<float> net = mlp_from_model(m);
      ev = evaluate(net, ds, ds.split->test, net.n_classes(), threads);
    } else {
      fail("rbm stacks have no classifier; fine-tune first");
    }
    write_misclassified_csv(ev, out_dir + "/misclassified.csv");
    std::vector<Tensor<float>> tiles;
    for (const Misclassified& mc : ev.misclassified) {
      if (tiles.size() == 100) break;
      tiles.push_back(ds.image(mc.index));
    }
    if (!tiles.empty()) export_grid(tiles, 10, out_dir + "/misclassified.pgm");
    std::printf("%zu misclassified of %zu\n", ev.misclassified.size(),
                ev.total);
    return 0;
  }
  fail("unknown export kind '" + what + "' (filters|weights|misclassified)");
}

int cmd_export_filters(const std::string& bank, std::size_t count,
                       std::size_t size, double stddev,
                       std::uint64_t seed, std::size_t orientations,
                       const std::vector<double>& wavelengths,
                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  Tensor<float> filters;
  if (bank == "gabor") {
    GaborSpec spec;
    spec.size = size;
    spec.orientations = orientations;
    if (!wavelengths.empty()) spec.wavelengths = wavelengths;
    filters = gabor_bank<float>(count, size, spec, true);
  } else {
    Rng rng = Rng(seed).substream(stream::kInit);
    filters = gaussian_bank<float>(count, size, stddev, rng);
  }
  write_tile_set(kernel_tiles(filters), out_dir, bank.c_str(), 8);
  std::printf("wrote %zu %s filters to %s\n", count, bank.c_str(),
              out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"handwritten-digit recognizers: small CNNs and a "
               "pretrained deep belief net"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string stack_path, model_path, what;
  std::string export_out = ".", bank = "gabor", filters_out = ".";
  std::optional<std::string> eval_data;
  std::optional<std::size_t> eval_threads;
  std::size_t filter_count = 32, filter_size = 5, orientations = 8;
  double filter_std = 0.1;
  std::uint64_t filter_seed = 1;
  std::vector<double> wavelengths;

  CLI::App* train =
      app.add_subcommand("train", "train a variant; writes model.hbdr, "
                                  "report.csv, confusion.csv, "
                                  "misclassified.csv/.pgm");
  add_common_flags(train, flags);
  train->add_option("--stack", stack_path,
                    "resume dbn fine-tuning from a saved stack.hbdr");

  CLI::App* pretrain = app.add_subcommand(
      "pretrain", "greedy layer-wise RBM pretraining; writes stack.hbdr");
  add_common_flags(pretrain, flags);

  CLI::App* eval =
      app.add_subcommand("eval", "evaluate a model on its config's test "
                                 "split; prints accuracy and per-class "
                                 "recall");
  eval->add_option("--model", model_path, "model.hbdr path")->required();
  eval->add_option("--data", eval_data, "override the echoed data path");
  eval->add_option("--threads", eval_threads, "worker threads");

  CLI::App* exp = app.add_subcommand(
      "export", "render model internals as PGM images / CSV");
  exp->add_option("--model", model_path, "model path")->required();
  exp->add_option("--what", what, "filters | weights | misclassified")
      ->required();
  exp->add_option("--out", export_out, "output directory");
  exp->add_option("--data", eval_data,
                  "override the echoed data path (misclassified)");
  exp->add_option("--threads", eval_threads, "worker threads");

  CLI::App* expf = app.add_subcommand(
      "export-filters", "generate a fresh filter bank as PGM tiles");
  expf->add_option("--bank", bank, "gabor | gaussian")
      ->check(CLI::IsMember({"gabor", "gaussian"}));
  expf->add_option("--count", filter_count, "filters in the bank");
  expf->add_option("--size", filter_size, "kernel side length (odd)");
  expf->add_option("--std", filter_std, "gaussian standard deviation");
  expf->add_option("--seed", filter_seed, "gaussian bank seed");
  expf->add_option("--orientations", orientations, "gabor orientation count");
  expf->add_option("--wavelengths", wavelengths,
                   "gabor wavelengths in pixels");
  expf->add_option("--out", filters_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(flags, stack_path);
    if (pretrain->parsed()) return cmd_pretrain(flags);
    if (eval->parsed()) return cmd_eval(model_path, eval_data, eval_threads);
    if (exp->parsed())
      return cmd_export(model_path, what, export_out, eval_data,
                        eval_threads);
    if (expf->parsed())
      return cmd_export_filters(bank, filter_count, filter_size, filter_std,
                                filter_seed, orientations, wavelengths,
                                filters_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
