#include "hbdr/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "hbdr/rng.hpp"

namespace fs = std::filesystem;

namespace hbdr {
namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return e;
}

// ---- PGM (P2/P5) ----

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return 0;
  do {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  } while (c != EOF && !std::isspace(c));
  return 1;
}

std::size_t pgm_uint(std::istream& in, const std::string& path,
                     const char* what) {
  std::string tok;
  if (!pgm_next_token(in, tok)) fail(path + ": truncated PGM header");
  try {
    const long long v = std::stoll(tok);
    if (v < 0) throw std::out_of_range("negative");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(path + ": bad PGM " + what + " '" + tok + "'");
  }
}

Tensor<float> load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open");
  std::string magic;
  if (!pgm_next_token(in, magic) || (magic != "P5" && magic != "P2"))
    fail(path + ": not a PGM file (magic '" + magic + "')");
  const std::size_t w = pgm_uint(in, path, "width");
  const std::size_t h = pgm_uint(in, path, "height");
  const std::size_t maxval = pgm_uint(in, path, "maxval");
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
    fail(path + ": bad PGM dimensions or maxval");
  Tensor<float> img({1, h, w});
  const float scale = 1.0f / static_cast<float>(maxval);
  if (magic == "P2") {
    for (std::size_t i = 0; i < h * w; ++i)
      img[i] = scale * static_cast<float>(pgm_uint(in, path, "pixel"));
    return img;
  }
  // P5: exactly one whitespace byte after maxval, then raw samples.
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(h * w * bpp);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(path + ": truncated PGM pixel data");
  for (std::size_t i = 0; i < h * w; ++i) {
    const unsigned v = bpp == 1 ? raw[i]
                                : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
    img[i] = scale * static_cast<float>(v);
  }
  return img;
}

// ---- PNG via libpng ----

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

Tensor<float> load_png(const std::string& path) {
  PngReader r;
  r.fp = std::fopen(path.c_str(), "rb");
  if (!r.fp) fail(path + ": cannot open");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8))
    fail(path + ": not a PNG file");
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!r.png) fail(path + ": png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) fail(path + ": png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) fail(path + ": PNG decode error");
  png_init_io(r.png, r.fp);
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const png_byte color = png_get_color_type(r.png, r.info);
  const png_byte depth = png_get_bit_depth(r.png, r.info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS))
    png_set_tRNS_to_alpha(r.png);
  if (depth == 16) png_set_strip_16(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  const std::size_t channels = png_get_channels(r.png, r.info);
  if (channels != 1 && channels != 3)
    fail(path + ": unsupported PNG channel count " +
         std::to_string(channels));
  std::vector<unsigned char> row(w * channels);
  Tensor<float> img({1, static_cast<std::size_t>(h),
                     static_cast<std::size_t>(w)});
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      double v;
      if (channels == 1) {
        v = row[x];
      } else {
        v = 0.299 * row[3 * x] + 0.587 * row[3 * x + 1] +
            0.114 * row[3 * x + 2];
      }
      img[y * w + x] = static_cast<float>(v / 255.0);
    }
  }
  png_read_end(r.png, nullptr);
  return img;
}

Tensor<float> load_image_file(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  fail(path + ": unreadable file (expected .pgm or .png)");
}

// ---- IDX ----

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) fail(path + ": truncated IDX header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Tensor<float> LabeledDataset::image(std::size_t i) const {
  if (i >= size()) throw std::invalid_argument("dataset: index out of range");
  const std::size_t h = images.dim(2), w = images.dim(3);
  Tensor<float> out({1, h, w});
  const std::size_t px = h * w;
  const float* src = images.data() + i * px;
  std::copy(src, src + px, out.data());
  return out;
}

LabeledDataset load_dir(const std::string& root) {
  if (!fs::is_directory(root)) fail(root + ": not a directory");
  std::map<int, std::vector<fs::path>> classes;
  for (const fs::directory_entry& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;  // stray files at the root are ignored
    const std::string name = e.path().filename().string();
    if (name.size() != 1 || name[0] < '0' || name[0] > '9')
      fail(e.path().string() + ": unknown class directory (expected 0..9)");
    std::vector<fs::path>& files = classes[name[0] - '0'];
    for (const fs::directory_entry& f : fs::directory_iterator(e.path())) {
      if (!f.is_regular_file())
        fail(f.path().string() + ": not a regular file");
      files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (classes.empty()) fail(root + ": no classes found");

  std::size_t total = 0;
  for (const auto& [label, files] : classes) total += files.size();
  if (total == 0) fail(root + ": no images found");

  LabeledDataset ds;
  ds.images = Tensor<float>({total, 1, kImageSize, kImageSize});
  ds.labels.reserve(total);
  ds.provenance = root + " (dir)";
  const std::size_t px = kImageSize * kImageSize;
  std::size_t n = 0;
  for (const auto& [label, files] : classes) {
    for (const fs::path& p : files) {
      Tensor<float> img = load_image_file(p.string());
      if (img.dim(1) != kImageSize || img.dim(2) != kImageSize)
        fail(p.string() + ": expected 32x32, got " +
             std::to_string(img.dim(2)) + "x" + std::to_string(img.dim(1)));
      std::copy(img.data(), img.data() + px, ds.images.data() + n * px);
      ds.labels.push_back(label);
      ++n;
    }
  }
  return ds;
}

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) fail(images_path + ": cannot open");
  if (read_be32(imgs, images_path) != 0x00000803u)
    fail(images_path + ": bad IDX image magic");
  const std::size_t n = read_be32(imgs, images_path);
  const std::size_t rows = read_be32(imgs, images_path);
  const std::size_t cols = read_be32(imgs, images_path);
  const bool pad = rows == 28 && cols == 28;
  if (!pad && !(rows == kImageSize && cols == kImageSize))
    fail(images_path + ": unsupported image size " + std::to_string(rows) +
         "x" + std::to_string(cols) + " (expected 28x28 or 32x32)");

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) fail(labels_path + ": cannot open");
  if (read_be32(lbls, labels_path) != 0x00000801u)
    fail(labels_path + ": bad IDX label magic");
  const std::size_t n_labels = read_be32(lbls, labels_path);
  if (n_labels != n)
    fail(labels_path + ": label count " + std::to_string(n_labels) +
         " does not match image count " + std::to_string(n));
  if (n == 0) fail(images_path + ": empty IDX file");

  LabeledDataset ds;
  ds.images = Tensor<float>({n, 1, kImageSize, kImageSize});
  ds.labels.resize(n);
  ds.provenance = images_path + "," + labels_path + " (idx)";

  std::vector<unsigned char> buf(rows * cols);
  const std::size_t px = kImageSize * kImageSize;
  for (std::size_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(imgs.gcount()) != buf.size())
      fail(images_path + ": truncated at image " + std::to_string(i));
    float* dst = ds.images.data() + i * px;
    if (pad) {
      for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x)
          dst[(y + 2) * kImageSize + (x + 2)] =
              static_cast<float>(buf[y * cols + x]) / 255.0f;
    } else {
      for (std::size_t k = 0; k < px; ++k)
        dst[k] = static_cast<float>(buf[k]) / 255.0f;
    }
  }
  std::vector<unsigned char> lbuf(n);
  lbls.read(reinterpret_cast<char*>(lbuf.data()),
            static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(lbls.gcount()) != n)
    fail(labels_path + ": truncated label data");
  for (std::size_t i = 0; i < n; ++i) {
    if (lbuf[i] > 9)
      fail(labels_path + ": label " + std::to_string(int(lbuf[i])) +
           " out of range at index " + std::to_string(i));
    ds.labels[i] = lbuf[i];
  }
  return ds;
}

bool parse_idx_spec(const std::string& spec, std::string& images_path,
                    std::string& labels_path) {
  if (spec.rfind("idx:", 0) != 0) return false;
  const std::string rest = spec.substr(4);
  const std::size_t comma = rest.find(',');
  if (comma == std::string::npos)
    fail("--data idx spec needs two paths: idx:<images>,<labels>");
  images_path = rest.substr(0, comma);
  labels_path = rest.substr(comma + 1);
  if (images_path.empty() || labels_path.empty())
    fail("--data idx spec needs two paths: idx:<images>,<labels>");
  return true;
}

void stratified_split(LabeledDataset& ds, std::size_t per_class_train,
                      std::uint64_t seed, std::size_t per_class_test) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng = Rng(seed).substream(stream::kSplit);
  Split split;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < per_class_train)
      fail("insufficient samples for class " + std::to_string(label) +
           ": have " + std::to_string(idx.size()) + ", need " +
           std::to_string(per_class_train));
    for (std::size_t i = idx.size(); i-- > 1;) {
      const std::size_t j = rng.next_below(i + 1);
      std::swap(idx[i], idx[j]);
    }
    split.train.insert(split.train.end(), idx.begin(),
                       idx.begin() + per_class_train);
    std::size_t n_test = idx.size() - per_class_train;
    if (per_class_test > 0) n_test = std::min(n_test, per_class_test);
    split.test.insert(split.test.end(), idx.begin() + per_class_train,
                      idx.begin() + per_class_train + n_test);
  }
  // Mix classes so sequential minibatches are class-balanced.
  for (std::size_t i = split.train.size(); i-- > 1;) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(split.train[i], split.train[j]);
  }
  std::sort(split.test.begin(), split.test.end());
  ds.split = std::move(split);
}

void binarize(LabeledDataset& ds, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("binarize: threshold must be in [0, 1]");
  const float t = static_cast<float>(threshold);
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    ds.images[i] = ds.images[i] >= t ? 1.0f : 0.0f;
}

Tensor<float> flatten_images(const LabeledDataset& ds,
                             const std::vector<std::size_t>& indices) {
  const std::size_t px = ds.images.dim(2) * ds.images.dim(3);
  if (indices.empty()) throw std::invalid_argument("flatten: empty index set");
  Tensor<float> out({indices.size(), px});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= ds.size())
      throw std::invalid_argument("flatten: index out of range");
    const float* src = ds.images.data() + indices[r] * px;
    std::copy(src, src + px, out.data() + r * px);
  }
  return out;
}

namespace {

unsigned char quantize(float v) {
  const float b = std::floor(255.0f * v + 0.5f);
  return static_cast<unsigned char>(std::clamp(b, 0.0f, 255.0f));
}

// Accepts [H,W] or [1,H,W]; returns (H, W, data pointer offset 0).
const Tensor<float>& check_tile(const Tensor<float>& t, std::size_t& h,
                                std::size_t& w) {
  if (t.rank() == 2) {
    h = t.dim(0);
    w = t.dim(1);
  } else if (t.rank() == 3 && t.dim(0) == 1) {
    h = t.dim(1);
    w = t.dim(2);
  } else {
    throw std::invalid_argument("export: image must be [H,W] or [1,H,W]");
  }
  return t;
}

std::vector<float> minmax_scaled(const float* data, std::size_t n) {
  float lo = data[0], hi = data[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, data[i]);
    hi = std::max(hi, data[i]);
  }
  std::vector<float> out(n);
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (std::size_t i = 0; i < n; ++i) out[i] = (data[i] - lo) * inv;
  } else {
    std::fill(out.begin(), out.end(), 0.5f);
  }
  return out;
}

void write_pgm_bytes(const std::vector<unsigned char>& bytes, std::size_t h,
                     std::size_t w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path + ": cannot open for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(path + ": write failed");
}

}  // namespace

void export_pgm(const Tensor<float>& image, const std::string& path,
                bool minmax_scale) {
  std::size_t h = 0, w = 0;
  check_tile(image, h, w);
  std::vector<unsigned char> bytes(h * w);
  if (minmax_scale) {
    const std::vector<float> v = minmax_scaled(image.data(), h * w);
    for (std::size_t i = 0; i < h * w; ++i) bytes[i] = quantize(v[i]);
  } else {
    for (std::size_t i = 0; i < h * w; ++i) bytes[i] = quantize(image[i]);
  }
  write_pgm_bytes(bytes, h, w, path);
}

void export_grid(const std::vector<Tensor<float>>& tiles,
                 std::size_t columns, const std::string& path,
                 bool minmax_scale) {
  if (tiles.empty()) throw std::invalid_argument("export_grid: no tiles");
  if (columns == 0) throw std::invalid_argument("export_grid: zero columns");
  std::size_t th = 0, tw = 0;
  check_tile(tiles[0], th, tw);
  for (const Tensor<float>& t : tiles) {
    std::size_t h = 0, w = 0;
    check_tile(t, h, w);
    if (h != th || w != tw)
      throw std::invalid_argument("export_grid: tiles differ in size");
  }
  const std::size_t cols = std::min(columns, tiles.size());
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  const std::size_t gw = cols * tw + (cols - 1);
  const std::size_t gh = rows * th + (rows - 1);
  std::vector<unsigned char> bytes(gw * gh, 255);  // white separators
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const std::size_t r = t / cols, c = t % cols;
    const std::size_t oy = r * (th + 1), ox = c * (tw + 1);
    std::vector<float> v(tiles[t].data(), tiles[t].data() + th * tw);
    if (minmax_scale) v = minmax_scaled(v.data(), v.size());
    for (std::size_t y = 0; y < th; ++y)
      for (std::size_t x = 0; x < tw; ++x)
        bytes[(oy + y) * gw + ox + x] = quantize(v[y * tw + x]);
  }
  write_pgm_bytes(bytes, gh, gw, path);
}

}  // namespace hbdr
