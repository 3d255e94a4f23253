#ifndef HBDR_FILTERS_HPP
#define HBDR_FILTERS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hbdr/rng.hpp"
#include "hbdr/tensor.hpp"

namespace hbdr {

// Gabor bank parameterization. The bank enumerates orientations times
// wavelengths; sigma is tied to the wavelength through the usual
// half-octave bandwidth ratio sigma = 0.56 * lambda.
struct GaborSpec {
  std::size_t size = 5;
  std::size_t orientations = 8;
  std::vector<double> wavelengths = {2.0, 3.0, 4.0, 5.0};
  double phase = 0.0;
  double aspect = 0.5;

  static double sigma_for(double lambda) { return 0.56 * lambda; }

  void validate() const {
    if (size % 2 == 0 || size == 0)
      throw std::invalid_argument("gabor: size must be odd");
    if (orientations == 0)
      throw std::invalid_argument("gabor: need at least one orientation");
    if (wavelengths.empty())
      throw std::invalid_argument("gabor: need at least one wavelength");
    for (double l : wavelengths)
      if (l < 2.0)
        throw std::invalid_argument(
            "gabor: wavelength below 2 pixels per cycle");
  }
};

// Real Gabor filter sampled on the centered integer grid:
//   g(x,y) = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x'/lambda + psi)
//   x' =  x cos(theta) + y sin(theta)
//   y' = -x sin(theta) + y cos(theta)
// Bank order is orientation-major: filter index = t * |lambdas| + l for
// theta_t = t*pi/orientations and wavelength l. When normalize is set,
// each filter is mean-subtracted then L2-normalized.
template <typename T = float>
Tensor<T> gabor_bank(std::size_t count, std::size_t size, const GaborSpec& spec,
                     bool normalize) {
  GaborSpec s = spec;
  s.size = size;
  s.validate();
  if (count != s.orientations * s.wavelengths.size())
    throw std::invalid_argument(
        "gabor_bank: count does not factor as orientations x wavelengths");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(size / 2);
  Tensor<T> bank({count, 1, size, size});
  std::size_t f = 0;
  for (std::size_t t = 0; t < s.orientations; ++t) {
    const double theta =
        std::numbers::pi * static_cast<double>(t) / s.orientations;
    const double ct = std::cos(theta), st = std::sin(theta);
    for (double lambda : s.wavelengths) {
      const double sigma = GaborSpec::sigma_for(lambda);
      std::vector<double> vals(size * size);
      double sum = 0.0;
      std::size_t i = 0;
      for (std::ptrdiff_t y = -half; y <= half; ++y) {
        for (std::ptrdiff_t x = -half; x <= half; ++x, ++i) {
          const double xr = x * ct + y * st;
          const double yr = -x * st + y * ct;
          const double envelope = std::exp(
              -(xr * xr + s.aspect * s.aspect * yr * yr) / (2 * sigma * sigma));
          const double carrier =
              std::cos(2.0 * std::numbers::pi * xr / lambda + s.phase);
          vals[i] = envelope * carrier;
          sum += vals[i];
        }
      }
      if (normalize) {
        const double mean = sum / vals.size();
        double norm_sq = 0.0;
        for (double& v : vals) {
          v -= mean;
          norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > 0.0)
          for (double& v : vals) v /= norm;
      }
      T* dst = bank.data() + f * size * size;
      for (std::size_t j = 0; j < vals.size(); ++j)
        dst[j] = static_cast<T>(vals[j]);
      ++f;
    }
  }
  return bank;
}

// I.i.d. zero-mean Gaussian filters, the random initialization the
// Gabor bank is compared against.
template <typename T = float>
Tensor<T> gaussian_bank(std::size_t count, std::size_t size, double stddev,
                        Rng& rng) {
  if (stddev <= 0.0)
    throw std::invalid_argument("gaussian_bank: std must be positive");
  return rand_normal<T>({count, 1, size, size}, 0.0, stddev, rng);
}

}  // namespace hbdr

#endif  // HBDR_FILTERS_HPP
