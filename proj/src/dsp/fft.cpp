#include "emd/dsp/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "emd/common/error.hpp"

namespace emd::dsp {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw ConfigError("FFT size must be a power of two, got " + std::to_string(n));
  }
  bitrev_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bitrev_[i] = r;
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(a), std::sin(a)};
  }
}

void FftPlan::transform(std::span<std::complex<double>> data, bool inverse) const {
  if (data.size() != n_) throw ConfigError("FFT buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const double wr = twiddles_[j * stride].real();
        const double wi = inverse ? -twiddles_[j * stride].imag() : twiddles_[j * stride].imag();
        const std::complex<double> u = data[start + j];
        const std::complex<double> x = data[start + j + half];
        // plain product; operator* goes through the NaN-aware __muldc3
        const std::complex<double> v{x.real() * wr - x.imag() * wi, x.real() * wi + x.imag() * wr};
        data[start + j] = u + v;
        data[start + j + half] = u - v;
      }
    }
  }
}

void FftPlan::forward(std::span<std::complex<double>> data) const { transform(data, false); }

void FftPlan::inverse(std::span<std::complex<double>> data) const { transform(data, true); }

void FftPlan::rfft(std::span<const double> in, std::span<std::complex<double>> out) const {
  if (in.size() != n_ || out.size() != n_ / 2 + 1) throw ConfigError("rfft buffer size mismatch");
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  forward(buf);
  for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = buf[k];
}

void FftPlan::irfft(std::span<const std::complex<double>> in, std::span<double> out) const {
  if (in.size() != n_ / 2 + 1 || out.size() != n_) throw ConfigError("irfft buffer size mismatch");
  std::vector<std::complex<double>> buf(n_);
  buf[0] = {in[0].real(), 0.0};
  if (n_ > 1) buf[n_ / 2] = {in[n_ / 2].real(), 0.0};
  for (std::size_t k = 1; k < n_ / 2; ++k) {
    buf[k] = in[k];
    buf[n_ - k] = std::conj(in[k]);
  }
  inverse(buf);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = buf[i].real() * scale;
}

}  // namespace emd::dsp
