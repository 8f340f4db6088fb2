#include "emd/data/mixer.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/common/log.hpp"

namespace emd::data {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng counter_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t c = splitmix64(b ^ splitmix64(index + 0x85157af5ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

void MixConfig::validate() const {
  if (!(snr_low_db < snr_high_db)) {
    throw ConfigError("SNR range requires low < high, got [" + std::to_string(snr_low_db) + ", " +
                      std::to_string(snr_high_db) + "]");
  }
  if (!(crop_seconds > 0.0)) throw ConfigError("crop_seconds must be positive");
  if (!(peak_limit > 0.0f)) throw ConfigError("peak_limit must be positive");
}

double gain_for_snr(std::span<const float> clean, std::span<const float> noise, double snr_db) {
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  const double pn = dsp::mean_power(noise);
  if (!(pn > 0.0)) throw ConfigError("noise segment has zero power; cannot reach a target SNR");
  const double pc = dsp::mean_power(clean);
  if (!(pc > 0.0)) {
    warn("clean segment has zero power; using noise gain 0");
    return 0.0;
  }
  return std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
}

double gain_for_snr(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db) {
  return gain_for_snr(std::span<const float>(clean.samples), std::span<const float>(noise.samples), snr_db);
}

double realized_snr_db(std::span<const float> clean, std::span<const float> scaled_noise) {
  return 10.0 * std::log10(dsp::mean_power(clean) / dsp::mean_power(scaled_noise));
}

double sample_snr(Rng& rng, double low, double high) {
  if (!(low < high)) throw ConfigError("sample_snr requires low < high");
  std::uniform_real_distribution<double> dist(low, high);
  double v = dist(rng);
  return std::min(std::max(v, low), high);
}

dsp::Waveform loop_crop(const dsp::Waveform& noise, std::size_t length, Rng& rng) {
  if (noise.empty()) throw ConfigError("noise waveform is empty");
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
  const std::size_t offset = pick(rng);
  dsp::Waveform out;
  out.sample_rate_hz = noise.sample_rate_hz;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[(offset + i) % noise.size()];
  return out;
}

dsp::Waveform random_crop(const dsp::Waveform& w, std::size_t length, Rng& rng) {
  if (w.empty()) throw ConfigError("cannot crop an empty waveform");
  if (w.size() < length) return loop_crop(w, length, rng);
  std::uniform_int_distribution<std::size_t> pick(0, w.size() - length);
  const std::size_t offset = pick(rng);
  dsp::Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

MixtureSample mix(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db, Rng& rng,
                  const MixConfig& cfg) {
  cfg.validate();
  if (clean.empty()) throw ConfigError("clean waveform is empty");
  if (clean.sample_rate_hz != noise.sample_rate_hz) {
    throw ConfigError("clean and noise sample rates differ (" + std::to_string(clean.sample_rate_hz) +
                      " vs " + std::to_string(noise.sample_rate_hz) + " Hz)");
  }
  MixtureSample s;
  s.snr_db = snr_db;
  s.clean = clean;
  s.noise = loop_crop(noise, clean.size(), rng);
  s.gain = gain_for_snr(s.clean, s.noise, snr_db);
  s.mixture.sample_rate_hz = clean.sample_rate_hz;
  s.mixture.samples.resize(clean.size());
  const float g = static_cast<float>(s.gain);
  for (std::size_t i = 0; i < clean.size(); ++i) s.mixture.samples[i] = s.clean.samples[i] + g * s.noise.samples[i];

  const float peak = dsp::peak_abs(s.mixture.samples);
  if (peak > cfg.peak_limit) {
    const float k = cfg.peak_limit / peak;
    s.scale = k;
    for (auto& v : s.clean.samples) v *= k;
    for (auto& v : s.mixture.samples) v *= k;
    // Rounding can leave the largest sample a hair above the limit.
    for (auto& v : s.mixture.samples) v = std::min(std::max(v, -cfg.peak_limit), cfg.peak_limit);
    s.gain *= k;
  }
  return s;
}

}  // namespace emd::data
