#pragma once

#include <cstdint>
#include <filesystem>

#include "emd/data/manifest.hpp"
#include "emd/dsp/waveform.hpp"

namespace emd::data {

// Synthetic voiced "speech": a harmonic series on a 62.5 Hz-multiple
// fundamental with a clip-specific spectral envelope, a syllable-rate
// amplitude envelope and a faint noise floor. Peak 0.5.
dsp::Waveform toy_speech(std::size_t clip_index, std::uint64_t seed, double seconds = 1.0);

// Gaussian white noise with unit variance scaled to rms 0.1.
dsp::Waveform white_noise(std::uint64_t seed, double seconds);

struct ToyCorpusOptions {
  std::size_t clean_clips = 20;
  std::size_t noise_clips = 2;
  double clip_seconds = 1.0;
  double noise_seconds = 3.0;
  std::uint64_t seed = 0;
};

// Writes clean_XX.wav / noise_XX.wav and manifest.jsonl (all train split)
// into `dir` and returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusOptions& opt = {});

}  // namespace emd::data
