#include "emd/dsp/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "emd/common/error.hpp"

namespace emd::dsp {

void validate(const Waveform& w) {
  if (w.sample_rate_hz <= 0) {
    throw ConfigError("waveform sample rate must be positive, got " +
                      std::to_string(w.sample_rate_hz));
  }
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    if (!std::isfinite(w.samples[i])) {
      throw NumericError("waveform sample " + std::to_string(i) + " is not finite");
    }
  }
}

double mean_power(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

double rms(std::span<const float> x) { return std::sqrt(mean_power(x)); }

float peak_abs(std::span<const float> x) {
  float p = 0.0f;
  for (float v : x) p = std::max(p, std::abs(v));
  return p;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

}  // namespace emd::dsp
