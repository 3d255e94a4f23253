#ifndef HBDR_CONFIG_HPP
#define HBDR_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hbdr/dbn.hpp"
#include "hbdr/network.hpp"
#include "hbdr/training.hpp"

namespace hbdr {

// Every knob a run accepts, as written in `key = value` config files
// and echoed (resolved) into model files. CLI flags override file
// values; the echo is the single source of truth for reproducing a
// run.
struct RunConfig {
  std::string variant = "cnn-gaussian";
  std::size_t epochs = 30;
  std::size_t batch_size = 50;
  double lr = 0.1;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 0;  // 0 = all remaining samples
  double keep_prob = 0.5;
  bool freeze_c1 = false;
  double binarize = -1.0;  // threshold in [0,1]; negative disables
  std::string loss = "xent";
  std::string data;
  std::string out = ".";
  bool save_best = false;

  std::size_t input_size = 32;
  std::size_t c1_maps = 32;
  std::size_t c1_kernel = 5;
  std::size_t s1_window = 2;
  std::size_t c2_maps = 64;
  std::size_t c2_kernel = 5;
  std::size_t s2_window = 2;
  std::size_t f1_units = 312;
  std::size_t n_classes = 10;

  double gaussian_std = 0.1;
  std::size_t gabor_orientations = 8;
  std::vector<double> gabor_wavelengths = {2, 3, 4, 5};
  double gabor_phase = 0.0;
  double gabor_aspect = 0.5;

  std::vector<std::size_t> dbn_layers = {1024, 100, 100};
  std::size_t pretrain_epochs = 30;
  std::size_t rbm_k = 1;
  double rbm_lr = 0.1;
  double rbm_momentum = 0.5;
  double rbm_penalty = 2e-4;
  std::size_t rbm_batch_size = 50;

  NetworkConfig network() const;
  TrainConfig train() const;
  DbnConfig dbn() const;
};

// Parses `key = value` lines ('#' comment lines and blanks allowed)
// on top of `base`. Unknown keys, malformed lines, and unparsable
// values throw std::runtime_error citing the 1-based line number.
RunConfig parse_config(const std::string& text, RunConfig base = {});

// Reads and parses a config file; errors carry the path.
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Canonical text form listing every key; parse_config(render_config(c))
// reproduces c exactly.
std::string render_config(const RunConfig& cfg);

}  // namespace hbdr

#endif  // HBDR_CONFIG_HPP
