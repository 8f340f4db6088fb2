#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emd::dsp {

inline constexpr int kPipelineSampleRate = 16000;

// Mono audio. Samples are stored in single precision; every kernel that
// consumes them computes in double.
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = kPipelineSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Throws ConfigError for a non-positive rate and NumericError for NaN/Inf.
void validate(const Waveform& w);

double mean_power(std::span<const float> x);
double rms(std::span<const float> x);
float peak_abs(std::span<const float> x);

// Periodic Hann window of length n (matches torch.hann_window).
std::vector<double> hann_window(std::size_t n);

}  // namespace emd::dsp
