#pragma once

#include <cstddef>
#include <vector>

#include "emd/dsp/stft.hpp"
#include "emd/dsp/waveform.hpp"

namespace emd::dsp {

struct MelConfig {
  std::size_t n_mels = 100;
  double f_min_hz = 0.0;
  double f_max_hz = 8000.0;
  double log_floor = 1e-10;
  int sample_rate_hz = kPipelineSampleRate;

  void validate() const;
};

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + f/700)
double mel_to_hz(double mel);

// Triangular HTK filterbank, n_mels x (n_fft/2 + 1), row-major, unnormalized.
class MelFilterbank {
 public:
  MelFilterbank(const StftConfig& stft, const MelConfig& mel);

  std::size_t n_mels() const { return n_mels_; }
  std::size_t bins() const { return bins_; }
  const std::vector<double>& weights() const { return weights_; }
  double at(std::size_t m, std::size_t k) const { return weights_[m * bins_ + k]; }

  // power: frames x bins -> frames x n_mels.
  std::vector<double> apply(const std::vector<double>& power, std::size_t frames) const;

 private:
  std::size_t n_mels_;
  std::size_t bins_;
  std::vector<double> weights_;
  // nonzero bin range [first, last) of each filter
  std::vector<std::size_t> first_, last_;
};

// Real matrix frames x n_mels, frame-major.
struct LogMel {
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> data;

  double at(std::size_t t, std::size_t m) const { return data[t * n_mels + m]; }
};

// log(max(filterbank . |STFT|^2, log_floor))
LogMel log_mel(const Waveform& w, const StftConfig& stft_cfg, const MelConfig& mel_cfg);
LogMel log_mel(std::span<const double> x, const StftConfig& stft_cfg, const MelConfig& mel_cfg);

}  // namespace emd::dsp
