#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "emd/dsp/waveform.hpp"

namespace emd::dsp {

enum class WindowKind { hann };

struct StftConfig {
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  WindowKind window = WindowKind::hann;
  bool center = true;

  std::size_t bins() const { return n_fft / 2 + 1; }

  // Throws ConfigError unless n_fft is a power of two, 0 < hop <= n_fft and
  // the window overlap-adds to a constant at this hop.
  void validate() const;

  // Validated construction.
  static StftConfig make(std::size_t n_fft, std::size_t hop, bool center = true);
};

// frames x bins complex matrix, frame-major.
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> data;
  StftConfig config;

  std::complex<double>& at(std::size_t t, std::size_t k) { return data[t * bins + k]; }
  const std::complex<double>& at(std::size_t t, std::size_t k) const { return data[t * bins + k]; }
};

std::vector<double> analysis_window(const StftConfig& cfg);

// Number of frames produced for a signal of `length` samples.
std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg);

// Longest signal that istft can rebuild from `frames` frames. With
// center=true this is frames * hop: the leading n_fft/2 padding is dropped
// and the tail is covered by the trailing partial windows.
std::size_t istft_max_length(std::size_t frames, const StftConfig& cfg);

// Mirror index into [0, n) with reflect (not edge-repeating) semantics;
// works for any offset, folding repeatedly when the pad exceeds n.
std::size_t reflect_index(long long i, std::size_t n);

ComplexSpectrogram stft(std::span<const double> x, const StftConfig& cfg);
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Overlap-add with squared-window normalization.
std::vector<double> istft_samples(const ComplexSpectrogram& s, std::size_t length);
Waveform istft(const ComplexSpectrogram& s, std::size_t length,
               int sample_rate_hz = kPipelineSampleRate);

// |X|^2, frames x bins.
std::vector<double> power_spectrogram(const ComplexSpectrogram& s);

}  // namespace emd::dsp
