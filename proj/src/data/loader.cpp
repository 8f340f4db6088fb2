#include "emd/data/loader.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emd/common/error.hpp"
#include "emd/dsp/resample.hpp"
#include "emd/dsp/wav.hpp"

namespace emd::data {
namespace {

constexpr std::uint64_t kEpochStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kClipStream = 3;

}  // namespace

dsp::Waveform load_audio(const std::filesystem::path& path) {
  return dsp::to_pipeline_rate(dsp::read_wav(path));
}

MixingLoader::MixingLoader(std::vector<dsp::Waveform> clean, std::vector<dsp::Waveform> noise,
                           MixConfig cfg, std::uint64_t seed)
    : clean_(std::move(clean)), noise_(std::move(noise)), cfg_(cfg), seed_(seed) {
  cfg_.validate();
  if (clean_.empty()) throw ConfigError("mixing needs at least one clean clip");
  if (noise_.empty()) throw ConfigError("mixing needs at least one noise clip");
  for (const auto& w : clean_) {
    if (w.empty()) throw ConfigError("clean clip is empty");
  }
  for (const auto& w : noise_) {
    if (dsp::mean_power(w.samples) <= 0.0) throw ConfigError("noise clip has zero power");
  }
}

MixingLoader MixingLoader::from_manifest(const Manifest& m, Split split, MixConfig cfg,
                                         std::uint64_t seed) {
  std::vector<dsp::Waveform> clean, noise;
  for (const auto& e : m.select(Role::clean, split)) clean.push_back(load_audio(e.path));
  for (const auto& e : m.select(Role::noise, split)) noise.push_back(load_audio(e.path));
  if (noise.empty() && split == Split::eval) {
    for (const auto& e : m.select(Role::noise, Split::train)) noise.push_back(load_audio(e.path));
  }
  if (clean.empty()) throw ConfigError("manifest has no clean " + to_string(split) + " entries");
  if (noise.empty()) throw ConfigError("manifest has no noise entries");
  return MixingLoader(std::move(clean), std::move(noise), cfg, seed);
}

std::size_t MixingLoader::crop_length() const {
  return static_cast<std::size_t>(std::llround(cfg_.crop_seconds * dsp::kPipelineSampleRate));
}

std::size_t MixingLoader::clean_index(std::uint64_t index) const {
  const std::size_t n = clean_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = counter_rng(seed_, kEpochStream, index / n);
  std::shuffle(order.begin(), order.end(), rng);
  return order[index % n];
}

MixtureSample MixingLoader::sample(std::uint64_t index) const {
  Rng rng = counter_rng(seed_, kSampleStream, index);
  const dsp::Waveform crop = random_crop(clean_[clean_index(index)], crop_length(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, noise_.size() - 1);
  const dsp::Waveform& noise = noise_[pick(rng)];
  const double snr = sample_snr(rng, cfg_.snr_low_db, cfg_.snr_high_db);
  return mix(crop, noise, snr, rng, cfg_);
}

MixtureSample MixingLoader::sample_clip(std::size_t clean_idx, std::uint64_t index) const {
  if (clean_idx >= clean_.size()) throw ConfigError("clean index out of range");
  Rng rng = counter_rng(seed_, kClipStream, index);
  std::uniform_int_distribution<std::size_t> pick(0, noise_.size() - 1);
  const dsp::Waveform& noise = noise_[pick(rng)];
  const double snr = sample_snr(rng, cfg_.snr_low_db, cfg_.snr_high_db);
  return mix(clean_[clean_idx], noise, snr, rng, cfg_);
}

}  // namespace emd::data
