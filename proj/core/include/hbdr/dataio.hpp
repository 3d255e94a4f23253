#ifndef HBDR_DATAIO_HPP
#define HBDR_DATAIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbdr/tensor.hpp"

namespace hbdr {

inline constexpr std::size_t kImageSize = 32;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Digit images normalized to [0,1], one class label per image, plus an
// optional train/test index split.
struct LabeledDataset {
  Tensor<float> images;  // [N, 1, H, W]; the loaders produce 32x32
  std::vector<int> labels;
  std::string provenance;
  std::optional<Split> split;

  std::size_t size() const { return labels.size(); }

  // Copy of sample i as a [1, H, W] tensor.
  Tensor<float> image(std::size_t i) const;
};

// Loads a class-subdirectory tree: root/<digit>/<name>.(pgm|png),
// digits 0..9. Images must already be 32x32 grayscale; RGB PNGs are
// converted with luma weights 0.299/0.587/0.114. Sample order is the
// sorted path order (class ascending, then filename).
LabeledDataset load_dir(const std::string& root);

// Loads IDX-format images + labels (big-endian, magic 0x00000803 /
// 0x00000801). 28x28 images are zero-padded to 32x32 with a 2-pixel
// border; 32x32 pass through.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

// Parses "idx:images,labels" into the two paths; returns false when
// `spec` has no "idx:" prefix.
bool parse_idx_spec(const std::string& spec, std::string& images_path,
                    std::string& labels_path);

// Seed-deterministic stratified split: exactly per_class_train training
// samples from every class; the remainder (capped at per_class_test
// per class when nonzero) becomes the test set. Train indices are
// shuffled across classes; test indices are ascending.
void stratified_split(LabeledDataset& ds, std::size_t per_class_train,
                      std::uint64_t seed, std::size_t per_class_test = 0);

// Thresholds pixels in place: value >= threshold -> 1, else 0.
void binarize(LabeledDataset& ds, double threshold);

// Rows of flattened images [indices.size(), H*W] in index order.
Tensor<float> flatten_images(const LabeledDataset& ds,
                             const std::vector<std::size_t>& indices);

// Writes a [H,W] or [1,H,W] tensor as binary 8-bit PGM (P5). Values
// are expected in [0,1]; quantization is round-half-up
// (byte = floor(255*v + 0.5), clamped). With minmax_scale the tensor
// is first affinely mapped so min -> 0 and max -> 1 (constant tensors
// map to mid-gray).
void export_pgm(const Tensor<float>& image, const std::string& path,
                bool minmax_scale = false);

// Tiles same-sized images into a mosaic with 1-pixel white separators
// and writes it as PGM. Each tile is min-max scaled individually when
// requested.
void export_grid(const std::vector<Tensor<float>>& tiles,
                 std::size_t columns, const std::string& path,
                 bool minmax_scale = false);

}  // namespace hbdr

#endif  // HBDR_DATAIO_HPP
