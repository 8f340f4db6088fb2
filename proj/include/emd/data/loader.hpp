#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "emd/data/manifest.hpp"
#include "emd/data/mixer.hpp"
#include "emd/dsp/waveform.hpp"

namespace emd::data {

// read_wav followed by resampling to 16 kHz.
dsp::Waveform load_audio(const std::filesystem::path& path);

// Deterministic on-the-fly mixing over in-memory clean and noise sets.
// Sample i belongs to epoch i / clean_count(); each epoch visits every clean
// clip once in a seeded order. Crops, noise choice, offsets and SNRs come from
// counter_rng(seed, ., i).
class MixingLoader {
 public:
  MixingLoader(std::vector<dsp::Waveform> clean, std::vector<dsp::Waveform> noise, MixConfig cfg,
               std::uint64_t seed);
  // Loads the clean and noise entries of one split.
  static MixingLoader from_manifest(const Manifest& m, Split split, MixConfig cfg, std::uint64_t seed);

  std::size_t clean_count() const { return clean_.size(); }
  const std::vector<dsp::Waveform>& clean() const { return clean_; }
  const std::vector<dsp::Waveform>& noise() const { return noise_; }
  const MixConfig& config() const { return cfg_; }
  std::size_t crop_length() const;

  std::size_t clean_index(std::uint64_t index) const;
  MixtureSample sample(std::uint64_t index) const;
  // Mixes clean clip `clean_idx` (whole, uncropped) with a seeded noise
  // segment; used to build fixed evaluation sets.
  MixtureSample sample_clip(std::size_t clean_idx, std::uint64_t index) const;

 private:
  std::vector<dsp::Waveform> clean_;
  std::vector<dsp::Waveform> noise_;
  MixConfig cfg_;
  std::uint64_t seed_;
};

}  // namespace emd::data
