#include <doctest.h>

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <hbdr/dataio.hpp>
#include <hbdr/rng.hpp>
#include <hbdr/tensor.hpp>

using namespace hbdr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hbdr_dataio_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& rel) const {
    const fs::path p = path / rel;
    fs::create_directories(p.parent_path());
    return p.string();
  }
};

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx_pair(const std::string& images_path,
                    const std::string& labels_path, std::size_t n,
                    std::size_t side,
                    const std::vector<unsigned char>& pixels,
                    const std::vector<unsigned char>& labels) {
  std::ofstream imgs(images_path, std::ios::binary);
  write_be32(imgs, 0x00000803u);
  write_be32(imgs, static_cast<std::uint32_t>(n));
  write_be32(imgs, static_cast<std::uint32_t>(side));
  write_be32(imgs, static_cast<std::uint32_t>(side));
  imgs.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
  std::ofstream lbls(labels_path, std::ios::binary);
  write_be32(lbls, 0x00000801u);
  write_be32(lbls, static_cast<std::uint32_t>(labels.size()));
  lbls.write(reinterpret_cast<const char*>(labels.data()),
             static_cast<std::streamsize>(labels.size()));
}

struct PgmRaw {
  std::size_t w = 0, h = 0;
  std::vector<unsigned char> bytes;
};

PgmRaw read_pgm_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  in >> magic;
  REQUIRE(magic == "P5");
  PgmRaw r;
  std::size_t maxval = 0;
  in >> r.w >> r.h >> maxval;
  REQUIRE(maxval == 255);
  in.get();  // single whitespace after maxval
  r.bytes.resize(r.w * r.h);
  in.read(reinterpret_cast<char*>(r.bytes.data()),
          static_cast<std::streamsize>(r.bytes.size()));
  REQUIRE(static_cast<std::size_t>(in.gcount()) == r.bytes.size());
  return r;
}

void write_test_png(const std::string& path, std::size_t side, bool rgb,
                    const std::vector<unsigned char>& samples) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(side),
               static_cast<png_uint_32>(side), 8,
               rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = side * (rgb ? 3 : 1);
  for (std::size_t y = 0; y < side; ++y)
    png_write_row(png, const_cast<png_bytep>(samples.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

LabeledDataset synthetic_dataset(std::size_t per_class) {
  LabeledDataset ds;
  const std::size_t n = per_class * 10;
  ds.images = Tensor<float>({n, 1, kImageSize, kImageSize});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i / per_class);
    ds.labels[i] = label;
    ds.images[i * kImageSize * kImageSize] =
        static_cast<float>(i) / static_cast<float>(n);
  }
  return ds;
}

}  // namespace

TEST_SUITE_BEGIN("dataio");

TEST_CASE("pgm export and directory load round-trip within quantization") {
  TempDir tmp;
  Rng rng(12);
  Tensor<float> img({1, kImageSize, kImageSize});
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<float>(rng.next_double());
  export_pgm(img, tmp.file("5/sample.pgm"));

  LabeledDataset ds = load_dir(tmp.path.string());
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 5);
  float worst = 0;
  for (std::size_t i = 0; i < img.size(); ++i)
    worst = std::max(worst, std::abs(ds.images[i] - img[i]));
  CHECK(worst <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("constant mid-gray quantizes to byte 128") {
  TempDir tmp;
  Tensor<float> img({4, 4});
  img.fill(0.5f);
  const std::string path = tmp.file("gray.pgm");
  export_pgm(img, path);
  PgmRaw raw = read_pgm_raw(path);
  CHECK(raw.w == 4);
  CHECK(raw.h == 4);
  for (unsigned char b : raw.bytes) CHECK(int(b) == 128);
}

TEST_CASE("min-max scaling maps extremes to 0 and 255") {
  TempDir tmp;
  Tensor<float> img({2, 2});
  img[0] = -1.0f; img[1] = 0.0f; img[2] = 1.0f; img[3] = 3.0f;
  const std::string path = tmp.file("scaled.pgm");
  export_pgm(img, path, true);
  PgmRaw raw = read_pgm_raw(path);
  CHECK(int(raw.bytes[0]) == 0);
  CHECK(int(raw.bytes[1]) == 64);   // 0.25 * 255 + 0.5
  CHECK(int(raw.bytes[2]) == 128);
  CHECK(int(raw.bytes[3]) == 255);

  // constant tiles land mid-gray instead of dividing by zero
  Tensor<float> flat({2, 2});
  flat.fill(7.0f);
  const std::string path2 = tmp.file("flat.pgm");
  export_pgm(flat, path2, true);
  PgmRaw raw2 = read_pgm_raw(path2);
  for (unsigned char b : raw2.bytes) CHECK(int(b) == 128);
}

TEST_CASE("grid export: 100 tiles in 10 columns with white separators") {
  TempDir tmp;
  std::vector<Tensor<float>> tiles;
  for (int t = 0; t < 100; ++t) {
    Tensor<float> tile({5, 5});
    tile.fill(static_cast<float>(t) / 99.0f * 0.9f);  // keep below white
    tiles.push_back(std::move(tile));
  }
  const std::string path = tmp.file("grid.pgm");
  export_grid(tiles, 10, path);
  PgmRaw raw = read_pgm_raw(path);
  CHECK(raw.w == 59);  // 10*5 + 9 separators
  CHECK(raw.h == 59);
  // vertical separator column and horizontal separator row are white
  for (std::size_t y = 0; y < raw.h; ++y) CHECK(int(raw.bytes[y * 59 + 5]) == 255);
  for (std::size_t x = 0; x < raw.w; ++x) CHECK(int(raw.bytes[5 * 59 + x]) == 255);
  // tile (0,0) keeps its own value, tile (9,9) its own
  CHECK(int(raw.bytes[0]) == 0);
  const std::size_t last = 54 * 59 + 54;  // top-left pixel of tile 99
  CHECK(int(raw.bytes[last]) == int(std::floor(0.9f * 255.0f + 0.5f)));

  CHECK_THROWS(export_grid({}, 10, tmp.file("none.pgm")));
  CHECK_THROWS(export_grid(tiles, 0, tmp.file("zero.pgm")));
  std::vector<Tensor<float>> ragged = {Tensor<float>({2, 2}),
                                       Tensor<float>({3, 3})};
  CHECK_THROWS(export_grid(ragged, 2, tmp.file("ragged.pgm")));
}

TEST_CASE("idx load: 28x28 images are centered into a 32x32 frame") {
  TempDir tmp;
  const std::size_t n = 4;
  std::vector<unsigned char> pixels(n * 28 * 28, 0);
  for (std::size_t i = 0; i < n; ++i) pixels[i * 28 * 28] = 255;  // corner
  const std::string ip = tmp.file("imgs"), lp = tmp.file("lbls");
  write_idx_pair(ip, lp, n, 28, pixels, {0, 1, 2, 3});

  LabeledDataset ds = load_idx(ip, lp);
  REQUIRE(ds.size() == 4);
  CHECK(ds.labels[0] == 0);
  CHECK(ds.labels[3] == 3);
  Tensor<float> first = ds.image(0);
  CHECK(first.at(0, 2, 2) == 1.0f);  // (0,0) landed at the 2-pixel pad
  CHECK(first.at(0, 0, 0) == 0.0f);
  float border = 0;
  for (std::size_t k = 0; k < kImageSize; ++k) {
    border += first.at(0, 0, k) + first.at(0, kImageSize - 1, k);
    border += first.at(0, k, 0) + first.at(0, k, kImageSize - 1);
  }
  CHECK(border == 0.0f);
}

TEST_CASE("idx load: 32x32 images pass through untouched") {
  TempDir tmp;
  std::vector<unsigned char> pixels(2 * 32 * 32, 7);
  const std::string ip = tmp.file("imgs32"), lp = tmp.file("lbls32");
  write_idx_pair(ip, lp, 2, 32, pixels, {9, 0});
  LabeledDataset ds = load_idx(ip, lp);
  REQUIRE(ds.size() == 2);
  CHECK(ds.images[0] == doctest::Approx(7.0f / 255.0f));
  CHECK(ds.labels[0] == 9);
}

TEST_CASE("idx load rejects malformed input") {
  TempDir tmp;
  const std::string ip = tmp.file("i"), lp = tmp.file("l");

  // wrong image magic
  {
    std::ofstream imgs(ip, std::ios::binary);
    write_be32(imgs, 0x00000802u);
    write_be32(imgs, 1); write_be32(imgs, 28); write_be32(imgs, 28);
  }
  { std::ofstream lbls(lp, std::ios::binary); write_be32(lbls, 0x00000801u);
    write_be32(lbls, 1); lbls.put(0); }
  CHECK_THROWS_WITH_AS(load_idx(ip, lp),
                       doctest::Contains("bad IDX image magic"),
                       std::runtime_error);

  // truncated pixel data
  write_idx_pair(ip, lp, 2, 28, std::vector<unsigned char>(28 * 28, 0),
                 {0, 1});
  CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("truncated"),
                       std::runtime_error);

  // count mismatch between the two files
  write_idx_pair(ip, lp, 1, 28, std::vector<unsigned char>(28 * 28, 0),
                 {0, 1, 2});
  CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("label count"),
                       std::runtime_error);

  // out-of-range label
  write_idx_pair(ip, lp, 1, 28, std::vector<unsigned char>(28 * 28, 0), {10});
  CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("out of range"),
                       std::runtime_error);

  // unsupported geometry
  write_idx_pair(ip, lp, 1, 16, std::vector<unsigned char>(16 * 16, 0), {1});
  CHECK_THROWS_WITH_AS(load_idx(ip, lp),
                       doctest::Contains("unsupported image size"),
                       std::runtime_error);

  CHECK_THROWS(load_idx(tmp.file("missing-a"), tmp.file("missing-b")));
}

TEST_CASE("idx spec parsing") {
  std::string a, b;
  CHECK(parse_idx_spec("idx:train.img,train.lbl", a, b));
  CHECK(a == "train.img");
  CHECK(b == "train.lbl");
  CHECK(!parse_idx_spec("/data/digits", a, b));
  CHECK(!parse_idx_spec("", a, b));
  CHECK_THROWS(parse_idx_spec("idx:only-one-path", a, b));
  CHECK_THROWS(parse_idx_spec("idx:,missing", a, b));
  CHECK_THROWS(parse_idx_spec("idx:missing,", a, b));
}

TEST_CASE("png images load with luma conversion for rgb") {
  TempDir tmp;
  // gray PNG: constant 100
  write_test_png(tmp.file("3/gray.png"), kImageSize, false,
                 std::vector<unsigned char>(kImageSize * kImageSize, 100));
  // rgb PNG: constant (200, 100, 50) -> luma .299*200+.587*100+.114*50
  std::vector<unsigned char> rgb(kImageSize * kImageSize * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = 200; rgb[i + 1] = 100; rgb[i + 2] = 50;
  }
  write_test_png(tmp.file("7/color.png"), kImageSize, true, rgb);

  LabeledDataset ds = load_dir(tmp.path.string());
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.labels[1] == 7);
  CHECK(ds.images[0] == doctest::Approx(100.0f / 255.0f));
  const double luma = (0.299 * 200 + 0.587 * 100 + 0.114 * 50) / 255.0;
  const std::size_t px = kImageSize * kImageSize;
  CHECK(ds.images[px] == doctest::Approx(luma).epsilon(1e-6));
}

TEST_CASE("directory loader orders by class then filename") {
  TempDir tmp;
  Tensor<float> img({1, kImageSize, kImageSize});
  img.fill(0.25f);
  export_pgm(img, tmp.file("1/b.pgm"));
  export_pgm(img, tmp.file("1/a.pgm"));
  export_pgm(img, tmp.file("0/z.pgm"));
  LabeledDataset ds = load_dir(tmp.path.string());
  REQUIRE(ds.size() == 3);
  CHECK(ds.labels == std::vector<int>{0, 1, 1});
  CHECK(ds.provenance.find("(dir)") != std::string::npos);
}

TEST_CASE("directory loader failure modes") {
  TempDir empty;
  CHECK_THROWS_WITH_AS(load_dir(empty.path.string()),
                       doctest::Contains("no classes found"),
                       std::runtime_error);

  CHECK_THROWS(load_dir((empty.path / "does-not-exist").string()));

  TempDir bad_class;
  fs::create_directories(bad_class.path / "x");
  CHECK_THROWS_WITH_AS(load_dir(bad_class.path.string()),
                       doctest::Contains("unknown class directory"),
                       std::runtime_error);

  TempDir wrong_size;
  Tensor<float> small({8, 8});
  small.fill(0.5f);
  const std::string small_path = wrong_size.file("2/small.pgm");
  export_pgm(small, small_path);
  CHECK_THROWS_WITH_AS(load_dir(wrong_size.path.string()),
                       doctest::Contains(small_path.c_str()),
                       std::runtime_error);

  TempDir bad_ext;
  std::ofstream(bad_ext.file("4/readme.txt")) << "not an image";
  CHECK_THROWS_WITH_AS(load_dir(bad_ext.path.string()),
                       doctest::Contains("unreadable file"),
                       std::runtime_error);
}

TEST_CASE("ascii pgm (P2) decodes like binary") {
  TempDir tmp;
  std::ofstream out(tmp.file("6/ascii.pgm"));
  out << "P2\n# a comment line\n" << kImageSize << " " << kImageSize
      << "\n255\n";
  for (std::size_t i = 0; i < kImageSize * kImageSize; ++i)
    out << (i % 256) << "\n";
  out.close();
  LabeledDataset ds = load_dir(tmp.path.string());
  REQUIRE(ds.size() == 1);
  CHECK(ds.images[0] == 0.0f);
  CHECK(ds.images[37] == doctest::Approx(37.0f / 255.0f));
}

TEST_CASE("stratified split: exact counts, disjointness, determinism") {
  LabeledDataset ds = synthetic_dataset(20);
  stratified_split(ds, 12, 99);
  REQUIRE(ds.split.has_value());
  CHECK(ds.split->train.size() == 120);
  CHECK(ds.split->test.size() == 80);

  std::set<std::size_t> seen;
  std::vector<std::size_t> train_count(10, 0), test_count(10, 0);
  for (std::size_t i : ds.split->train) {
    CHECK(seen.insert(i).second);
    ++train_count[ds.labels[i]];
  }
  for (std::size_t i : ds.split->test) {
    CHECK(seen.insert(i).second);
    ++test_count[ds.labels[i]];
  }
  for (int c = 0; c < 10; ++c) {
    CHECK(train_count[c] == 12);
    CHECK(test_count[c] == 8);
  }

  // train indices are mixed across classes, test ascending
  bool unsorted = false;
  for (std::size_t i = 0; i + 1 < ds.split->train.size(); ++i)
    unsorted = unsorted ||
               ds.labels[ds.split->train[i]] > ds.labels[ds.split->train[i + 1]];
  CHECK(unsorted);
  CHECK(std::is_sorted(ds.split->test.begin(), ds.split->test.end()));

  LabeledDataset ds2 = synthetic_dataset(20);
  stratified_split(ds2, 12, 99);
  CHECK(ds2.split->train == ds.split->train);
  CHECK(ds2.split->test == ds.split->test);

  LabeledDataset ds3 = synthetic_dataset(20);
  stratified_split(ds3, 12, 100);
  CHECK(ds3.split->train != ds.split->train);
}

TEST_CASE("stratified split: test cap and insufficient data error") {
  LabeledDataset ds = synthetic_dataset(20);
  stratified_split(ds, 12, 7, 3);
  CHECK(ds.split->test.size() == 30);

  LabeledDataset tiny = synthetic_dataset(4);
  CHECK_THROWS_WITH_AS(stratified_split(tiny, 5, 7),
                       doctest::Contains("insufficient samples"),
                       std::runtime_error);
}

TEST_CASE("binarize thresholds in place") {
  LabeledDataset ds = synthetic_dataset(2);
  ds.images[0] = 0.49f;
  ds.images[1] = 0.5f;
  ds.images[2] = 0.51f;
  binarize(ds, 0.5);
  CHECK(ds.images[0] == 0.0f);
  CHECK(ds.images[1] == 1.0f);  // >= threshold
  CHECK(ds.images[2] == 1.0f);
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    CHECK((ds.images[i] == 0.0f || ds.images[i] == 1.0f));
  CHECK_THROWS(binarize(ds, -0.1));
  CHECK_THROWS(binarize(ds, 1.5));
}

TEST_CASE("flatten_images follows the index order") {
  LabeledDataset ds = synthetic_dataset(2);
  Tensor<float> flat = flatten_images(ds, {3, 1});
  REQUIRE(flat.dim(0) == 2);
  REQUIRE(flat.dim(1) == kImageSize * kImageSize);
  CHECK(flat.at(0, 0) == ds.images[3 * kImageSize * kImageSize]);
  CHECK(flat.at(1, 0) == ds.images[1 * kImageSize * kImageSize]);
  CHECK_THROWS(flatten_images(ds, {}));
  CHECK_THROWS(flatten_images(ds, {99}));
}

TEST_CASE("dataset image accessor bounds") {
  LabeledDataset ds = synthetic_dataset(1);
  CHECK_NOTHROW(ds.image(9));
  CHECK_THROWS(ds.image(10));
}

TEST_SUITE_END();
