#pragma once

#include <span>

#include "emd/dsp/waveform.hpp"

namespace emd::metrics {

inline constexpr double kSiSnrCapDb = 60.0;

// Classic short-time objective intelligibility. Both inputs are resampled to
// 10 kHz; silent frames (40 dB below the loudest clean frame) are removed.
// Throws ConfigError when fewer than 30 frames (384 ms) of non-silent signal
// remain or the lengths differ.
double stoi(const dsp::Waveform& clean, const dsp::Waveform& processed);

// Scale-invariant SNR of zero-mean signals, clamped to [-60, 60] dB. A zero
// reference throws ConfigError.
double si_snr(std::span<const float> ref, std::span<const float> est);
double si_snr(const dsp::Waveform& ref, const dsp::Waveform& est);

// Mean over frames of the RMS over bins of the dB magnitude difference
// (n_fft 1024, hop 256, magnitudes floored at 1e-8).
double lsd(const dsp::Waveform& ref, const dsp::Waveform& est);

// dot(a, b) / (|a| |b|); zero vectors throw ConfigError.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace emd::metrics
