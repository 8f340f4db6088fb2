#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "emd/dsp/waveform.hpp"

namespace emd::data {

using Rng = std::mt19937_64;

// Independent generator for sample `index` of stream `stream`. The state is a
// pure function of the three integers, so any assignment of samples to
// workers produces the same data.
Rng counter_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct MixConfig {
  double snr_low_db = -10.0;
  double snr_high_db = 25.0;
  double crop_seconds = 1.0;
  float peak_limit = 0.99f;

  void validate() const;
};

// Scaled pair with mixture = clean + gain * noise sample-wise. When the
// mixture peak exceeded the limit, clean, gain and mixture all carry the same
// normalization factor `scale`.
struct MixtureSample {
  dsp::Waveform clean;
  dsp::Waveform noise;  // the looped/cropped noise segment, unscaled
  dsp::Waveform mixture;
  double snr_db = 0.0;
  double gain = 0.0;
  double scale = 1.0;
};

// sqrt(P_clean / (P_noise * 10^(snr/10))) with P the mean square over the
// given samples. Zero-power noise throws; zero-power clean warns and
// returns 0.
double gain_for_snr(std::span<const float> clean, std::span<const float> noise, double snr_db);
double gain_for_snr(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db);

// 10 log10(P_clean / P_scaled_noise).
double realized_snr_db(std::span<const float> clean, std::span<const float> scaled_noise);

// Uniform draw on [low, high].
double sample_snr(Rng& rng, double low = -10.0, double high = 25.0);

// Loops `noise` to `length` samples starting at a random offset.
dsp::Waveform loop_crop(const dsp::Waveform& noise, std::size_t length, Rng& rng);

// Random `length`-sample crop; shorter inputs are tiled from a random offset.
dsp::Waveform random_crop(const dsp::Waveform& w, std::size_t length, Rng& rng);

// Mixes at exactly snr_db over the clean length, then peak-normalizes the
// pair when the mixture would exceed cfg.peak_limit.
MixtureSample mix(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db, Rng& rng,
                  const MixConfig& cfg = {});

}  // namespace emd::data
