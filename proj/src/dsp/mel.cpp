#include "emd/dsp/mel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emd/common/error.hpp"

namespace emd::dsp {

void MelConfig::validate() const {
  if (n_mels == 0) throw ConfigError("mel: n_mels must be positive");
  if (sample_rate_hz <= 0) throw ConfigError("mel: sample rate must be positive");
  if (!(f_min_hz >= 0.0 && f_min_hz < f_max_hz && f_max_hz <= sample_rate_hz / 2.0)) {
    throw ConfigError("mel: require 0 <= f_min < f_max <= sample_rate/2, got f_min=" +
                      std::to_string(f_min_hz) + " f_max=" + std::to_string(f_max_hz));
  }
  if (!(log_floor > 0.0)) throw ConfigError("mel: log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const StftConfig& stft, const MelConfig& mel)
    : n_mels_(mel.n_mels), bins_(stft.bins()) {
  stft.validate();
  mel.validate();
  const double m_lo = hz_to_mel(mel.f_min_hz);
  const double m_hi = hz_to_mel(mel.f_max_hz);
  std::vector<double> edges(n_mels_ + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) /
                                    static_cast<double>(n_mels_ + 1));
  }
  weights_.assign(n_mels_ * bins_, 0.0);
  const double nyquist = mel.sample_rate_hz / 2.0;
  for (std::size_t k = 0; k < bins_; ++k) {
    const double f = nyquist * static_cast<double>(k) / static_cast<double>(bins_ - 1);
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const double down = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const double up = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      weights_[m * bins_ + k] = std::max(0.0, std::min(down, up));
    }
  }
  first_.assign(n_mels_, 0);
  last_.assign(n_mels_, 0);
  for (std::size_t m = 0; m < n_mels_; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < bins_; ++k) {
      const double w = weights_[m * bins_ + k];
      sum += w;
      if (w != 0.0) {
        if (last_[m] == 0) first_[m] = k;
        last_[m] = k + 1;
      }
    }
    if (!(sum > 0.0)) {
      throw ConfigError("mel: filter " + std::to_string(m) +
                        " covers no FFT bin; use fewer mels or a larger n_fft");
    }
  }
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& power,
                                         std::size_t frames) const {
  if (power.size() != frames * bins_) throw ConfigError("mel: power spectrogram size mismatch");
  std::vector<double> out(frames * n_mels_, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* p = power.data() + t * bins_;
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const double* w = weights_.data() + m * bins_;
      double acc = 0.0;
      for (std::size_t k = first_[m]; k < last_[m]; ++k) acc += w[k] * p[k];
      out[t * n_mels_ + m] = acc;
    }
  }
  return out;
}

LogMel log_mel(std::span<const double> x, const StftConfig& stft_cfg, const MelConfig& mel_cfg) {
  const MelFilterbank fb(stft_cfg, mel_cfg);
  const auto spec = stft(x, stft_cfg);
  LogMel out;
  out.frames = spec.frames;
  out.n_mels = mel_cfg.n_mels;
  out.data = fb.apply(power_spectrogram(spec), spec.frames);
  for (double& v : out.data) v = std::log(std::max(v, mel_cfg.log_floor));
  return out;
}

LogMel log_mel(const Waveform& w, const StftConfig& stft_cfg, const MelConfig& mel_cfg) {
  validate(w);
  if (w.sample_rate_hz != mel_cfg.sample_rate_hz) {
    throw ConfigError("log_mel: waveform rate " + std::to_string(w.sample_rate_hz) +
                      " Hz differs from mel config rate " +
                      std::to_string(mel_cfg.sample_rate_hz) + " Hz");
  }
  std::vector<double> x(w.samples.begin(), w.samples.end());
  return log_mel(x, stft_cfg, mel_cfg);
}

}  // namespace emd::dsp
