#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace emd::dsp {

// Iterative radix-2 FFT for power-of-two sizes. A plan is immutable after
// construction and may be shared between threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }

  // In-place unnormalized forward transform (e^{-i...}).
  void forward(std::span<std::complex<double>> data) const;
  // In-place unnormalized inverse transform (e^{+i...}); caller divides by n.
  void inverse(std::span<std::complex<double>> data) const;

  // Real input of length n -> n/2 + 1 bins.
  void rfft(std::span<const double> in, std::span<std::complex<double>> out) const;
  // n/2 + 1 bins -> real output of length n, normalized by 1/n. The imaginary
  // parts of the DC and Nyquist bins are ignored.
  void irfft(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  void transform(std::span<std::complex<double>> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddles_;
};

bool is_power_of_two(std::size_t n);

}  // namespace emd::dsp
