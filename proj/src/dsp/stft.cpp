#include "emd/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emd/common/error.hpp"
#include "emd/dsp/fft.hpp"

namespace emd::dsp {

void StftConfig::validate() const {
  if (!is_power_of_two(n_fft) || n_fft < 4) {
    throw ConfigError("STFT n_fft must be a power of two >= 4, got " + std::to_string(n_fft));
  }
  if (hop == 0 || hop > n_fft) {
    throw ConfigError("STFT hop must be in (0, n_fft], got hop=" + std::to_string(hop) +
                      " n_fft=" + std::to_string(n_fft));
  }
  // Constant overlap-add of the analysis window over one hop period.
  const auto w = analysis_window(*this);
  double lo = 1e300, hi = -1e300;
  for (std::size_t n = 0; n < hop; ++n) {
    double acc = 0.0;
    for (std::size_t m = n; m < n_fft; m += hop) acc += w[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  if (lo <= 0.0 || (hi - lo) > 1e-9 * hi) {
    throw ConfigError("STFT config violates constant overlap-add: n_fft=" + std::to_string(n_fft) +
                      " hop=" + std::to_string(hop));
  }
}

StftConfig StftConfig::make(std::size_t n_fft, std::size_t hop, bool center) {
  StftConfig cfg;
  cfg.n_fft = n_fft;
  cfg.hop = hop;
  cfg.center = center;
  cfg.validate();
  return cfg;
}

std::vector<double> analysis_window(const StftConfig& cfg) { return hann_window(cfg.n_fft); }

std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg) {
  if (cfg.center) return 1 + length / cfg.hop;
  if (length < cfg.n_fft) return 0;
  return 1 + (length - cfg.n_fft) / cfg.hop;
}

std::size_t istft_max_length(std::size_t frames, const StftConfig& cfg) {
  if (frames == 0) return 0;
  if (cfg.center) return frames * cfg.hop;
  return (frames - 1) * cfg.hop + cfg.n_fft;
}

std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * (static_cast<long long>(n) - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

ComplexSpectrogram stft(std::span<const double> x, const StftConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw ConfigError("stft: empty waveform");
  if (!cfg.center && x.size() < cfg.n_fft) {
    throw ConfigError("stft: waveform of " + std::to_string(x.size()) +
                      " samples is shorter than one frame (" + std::to_string(cfg.n_fft) + ")");
  }
  const std::size_t n = cfg.n_fft;
  const long long pad = cfg.center ? static_cast<long long>(n / 2) : 0;
  const auto window = analysis_window(cfg);
  const FftPlan plan(n);

  ComplexSpectrogram out;
  out.config = cfg;
  out.frames = stft_frame_count(x.size(), cfg);
  out.bins = cfg.bins();
  out.data.resize(out.frames * out.bins);

  std::vector<double> frame(n);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const long long start = static_cast<long long>(t * cfg.hop) - pad;
    for (std::size_t i = 0; i < n; ++i) {
      frame[i] = x[reflect_index(start + static_cast<long long>(i), x.size())] * window[i];
    }
    plan.rfft(frame, std::span(out.data).subspan(t * out.bins, out.bins));
  }
  return out;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  validate(w);
  std::vector<double> x(w.samples.begin(), w.samples.end());
  return stft(x, cfg);
}

std::vector<double> istft_samples(const ComplexSpectrogram& s, std::size_t length) {
  const StftConfig& cfg = s.config;
  cfg.validate();
  if (s.bins != cfg.bins()) throw ConfigError("istft: bin count does not match config");
  if (length > istft_max_length(s.frames, cfg)) {
    throw ConfigError("istft: requested length " + std::to_string(length) +
                      " exceeds synthesizable length " +
                      std::to_string(istft_max_length(s.frames, cfg)));
  }
  const std::size_t n = cfg.n_fft;
  const std::size_t pad = cfg.center ? n / 2 : 0;
  const std::size_t full = s.frames == 0 ? 0 : (s.frames - 1) * cfg.hop + n;
  const auto window = analysis_window(cfg);
  const FftPlan plan(n);

  std::vector<double> acc(full, 0.0), env(full, 0.0), frame(n);
  for (std::size_t t = 0; t < s.frames; ++t) {
    plan.irfft(std::span(s.data).subspan(t * s.bins, s.bins), frame);
    const std::size_t off = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[off + i] += frame[i] * window[i];
      env[off + i] += window[i] * window[i];
    }
  }
  std::vector<double> y(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t j = i + pad;
    if (j < full && env[j] > 1e-11) y[i] = acc[j] / env[j];
  }
  return y;
}

Waveform istft(const ComplexSpectrogram& s, std::size_t length, int sample_rate_hz) {
  const auto y = istft_samples(s, length);
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples.assign(y.begin(), y.end());
  return w;
}

std::vector<double> power_spectrogram(const ComplexSpectrogram& s) {
  std::vector<double> p(s.data.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(s.data[i]);
  return p;
}

}  // namespace emd::dsp
