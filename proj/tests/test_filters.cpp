#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <hbdr/filters.hpp>
#include <hbdr/rng.hpp>
#include <hbdr/tensor.hpp>

using namespace hbdr;

namespace {

// Independent closed-form evaluation of one real Gabor filter on the
// centered grid, written from the formula rather than the bank builder,
// so the two can cross-check each other.
std::vector<double> reference_gabor(double theta, double lambda, double psi,
                                    double gamma, std::size_t size) {
  const double sigma = 0.56 * lambda;
  const auto half = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> out;
  out.reserve(size * size);
  for (std::ptrdiff_t y = -half; y <= half; ++y) {
    for (std::ptrdiff_t x = -half; x <= half; ++x) {
      const double xr = x * std::cos(theta) + y * std::sin(theta);
      const double yr = -x * std::sin(theta) + y * std::cos(theta);
      out.push_back(
          std::exp(-(xr * xr + gamma * gamma * yr * yr) /
                   (2.0 * sigma * sigma)) *
          std::cos(2.0 * std::numbers::pi * xr / lambda + psi));
    }
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("filters");

TEST_CASE("gabor bank shape and orientation-major ordering") {
  GaborSpec spec;
  TensorD bank = gabor_bank<double>(32, 5, spec, false);
  REQUIRE(bank.rank() == 4);
  CHECK(bank.dim(0) == 32);
  CHECK(bank.dim(1) == 1);
  CHECK(bank.dim(2) == 5);
  CHECK(bank.dim(3) == 5);

  // filter index t * n_lambda + l holds theta_t = t*pi/8, lambda_l
  for (std::size_t t : {std::size_t{0}, std::size_t{3}, std::size_t{7}}) {
    for (std::size_t l = 0; l < spec.wavelengths.size(); ++l) {
      const double theta = std::numbers::pi * static_cast<double>(t) / 8.0;
      std::vector<double> want = reference_gabor(
          theta, spec.wavelengths[l], spec.phase, spec.aspect, 5);
      const double* got = bank.data() + (t * 4 + l) * 25;
      for (std::size_t i = 0; i < 25; ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gabor at theta=0 is symmetric in both axes") {
  GaborSpec spec;
  TensorD bank = gabor_bank<double>(32, 5, spec, false);
  for (std::size_t l = 0; l < 4; ++l) {  // the four theta=0 filters
    const double* f = bank.data() + l * 25;
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(f[r * 5 + c] == doctest::Approx(f[(4 - r) * 5 + c]).epsilon(1e-12));
        CHECK(f[r * 5 + c] == doctest::Approx(f[r * 5 + (4 - c)]).epsilon(1e-12));
      }
  }
}

TEST_CASE("zero-phase gabor is invariant under theta -> theta + pi") {
  for (double theta : {0.0, 0.4, std::numbers::pi / 3, 2.1}) {
    for (double lambda : {2.0, 3.5, 5.0}) {
      std::vector<double> a = reference_gabor(theta, lambda, 0.0, 0.5, 7);
      std::vector<double> b =
          reference_gabor(theta + std::numbers::pi, lambda, 0.0, 0.5, 7);
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::fabs(a[i] - b[i]) <= 1e-9);
    }
  }
}

TEST_CASE("normalized gabor filters have zero mean and unit energy") {
  TensorD bank = gabor_bank<double>(32, 5, GaborSpec{}, true);
  for (std::size_t f = 0; f < 32; ++f) {
    const double* v = bank.data() + f * 25;
    double mean = 0.0, norm_sq = 0.0;
    for (std::size_t i = 0; i < 25; ++i) {
      mean += v[i];
      norm_sq += v[i] * v[i];
    }
    mean /= 25.0;
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(std::sqrt(norm_sq) - 1.0) <= 1e-9);
  }
}

TEST_CASE("gabor bank validation errors") {
  GaborSpec spec;
  CHECK_THROWS(gabor_bank<double>(31, 5, spec, false));  // 31 != 8*4
  CHECK_THROWS(gabor_bank<double>(32, 4, spec, false));  // even size
  GaborSpec tight = spec;
  tight.wavelengths = {1.5};
  CHECK_THROWS(gabor_bank<double>(8, 5, tight, false));  // below Nyquist
  GaborSpec empty = spec;
  empty.orientations = 0;
  CHECK_THROWS(gabor_bank<double>(0, 5, empty, false));
}

TEST_CASE("gaussian bank statistics and determinism") {
  Rng rng(11);
  TensorD bank = gaussian_bank<double>(32, 5, 0.1, rng);
  REQUIRE(bank.size() == 32 * 25);
  double mean = 0.0;
  for (std::size_t i = 0; i < bank.size(); ++i) mean += bank[i];
  mean /= static_cast<double>(bank.size());
  double var = 0.0;
  for (std::size_t i = 0; i < bank.size(); ++i)
    var += (bank[i] - mean) * (bank[i] - mean);
  var /= static_cast<double>(bank.size() - 1);
  const double sd = std::sqrt(var);
  CHECK(std::fabs(mean) <= 0.012);  // se = 0.1/sqrt(800) ~ 0.0035
  CHECK(sd >= 0.09);
  CHECK(sd <= 0.11);

  Rng r1(42), r2(42), r3(43);
  TensorD a = gaussian_bank<double>(8, 3, 0.1, r1);
  TensorD b = gaussian_bank<double>(8, 3, 0.1, r2);
  TensorD c = gaussian_bank<double>(8, 3, 0.1, r3);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && a[i] == b[i];
    any_diff = any_diff || a[i] != c[i];
  }
  CHECK(all_equal);
  CHECK(any_diff);

  CHECK_THROWS(gaussian_bank<double>(8, 3, 0.0, r1));
  CHECK_THROWS(gaussian_bank<double>(8, 3, -0.1, r1));
}

TEST_SUITE_END();
