#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "emd/common/error.hpp"
#include "emd/data/loader.hpp"
#include "emd/data/manifest.hpp"
#include "emd/data/mixer.hpp"
#include "emd/data/toy.hpp"
#include "emd/dsp/wav.hpp"
#include "emd/metrics/metrics.hpp"
#include "helpers.hpp"

namespace emd::data {
namespace {

double power(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

// Realized SNR recomputed from the stored sample, in double.
double oracle_snr(const MixtureSample& s) {
  std::vector<float> scaled(s.noise.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = static_cast<float>(s.gain * s.noise.samples[i]);
  return 10.0 * std::log10(power(s.clean.samples) / power(scaled));
}

dsp::Waveform constant_power(std::size_t n, std::uint64_t seed) {
  auto w = testing::random_waveform(n, seed, 1.0);
  const double p = power(w.samples);
  for (auto& v : w.samples) v = static_cast<float>(v / std::sqrt(p) * 0.1);
  return w;
}

TEST(GainForSnr, EqualPowerOracles) {
  const auto a = constant_power(16000, 1), b = constant_power(16000, 2);
  EXPECT_NEAR(gain_for_snr(a, b, 0.0), 1.0, 1e-6);
  EXPECT_NEAR(gain_for_snr(a, b, 20.0), 0.1, 1e-7);
  EXPECT_NEAR(gain_for_snr(a, b, -10.0), std::sqrt(10.0), 1e-5);
  std::vector<float> scaled(b.size());
  const double g = gain_for_snr(a, b, 20.0);
  for (std::size_t i = 0; i < b.size(); ++i) scaled[i] = static_cast<float>(g * b.samples[i]);
  EXPECT_NEAR(realized_snr_db(a.samples, scaled), 20.0, 1e-4);
}

TEST(GainForSnr, PowerErrors) {
  const auto a = constant_power(100, 1);
  dsp::Waveform zero = a;
  std::fill(zero.samples.begin(), zero.samples.end(), 0.0f);
  EXPECT_THROW(gain_for_snr(a, zero, 0.0), ConfigError);
  EXPECT_EQ(gain_for_snr(zero, a, 0.0), 0.0);
}

TEST(Mix, ThousandMixesHitTheirSnr) {
  std::vector<dsp::Waveform> speech, noise;
  for (std::size_t i = 0; i < 4; ++i) speech.push_back(toy_speech(i, 3, 0.5));
  noise.push_back(white_noise(1, 2.0));
  auto hum = testing::sine(50.0, 1.3, 16000, 0.2);
  for (std::size_t i = 0; i < hum.size(); ++i) hum.samples[i] += 0.01f * static_cast<float>(i % 7);
  noise.push_back(hum);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng = counter_rng(42, 0, i);
    const double snr = sample_snr(rng);
    const auto s = mix(speech[i % 4], noise[i % 2], snr, rng);
    worst = std::max(worst, std::abs(oracle_snr(s) - snr));
    ASSERT_LE(dsp::peak_abs(s.mixture.samples), 0.99f);
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Mix, PairingIsExact) {
  const auto clean = toy_speech(0, 0, 0.5);
  Rng rng = counter_rng(1, 2, 3);
  const auto s = mix(clean, white_noise(9, 1.0), 10.0, rng);
  ASSERT_EQ(s.scale, 1.0);
  EXPECT_EQ(s.clean.samples, clean.samples);
  const float g = static_cast<float>(s.gain);
  for (std::size_t i = 0; i < s.mixture.size(); ++i) ASSERT_EQ(s.mixture.samples[i], clean.samples[i] + g * s.noise.samples[i]);
}

TEST(Mix, NormalizationScalesBothSides) {
  const auto clean = toy_speech(1, 0, 0.5);
  Rng rng = counter_rng(1, 2, 4);
  const auto s = mix(clean, white_noise(9, 1.0), -10.0, rng);
  ASSERT_LT(s.scale, 1.0);
  EXPECT_LE(dsp::peak_abs(s.mixture.samples), 0.99f);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ASSERT_NEAR(s.clean.samples[i], clean.samples[i] * s.scale, 1e-6);
    ASSERT_NEAR(s.mixture.samples[i], s.clean.samples[i] + s.gain * s.noise.samples[i], 1e-5);
  }
  EXPECT_NEAR(oracle_snr(s), -10.0, 0.01);
}

TEST(Mix, HighSnrMixtureIsAlmostClean) {
  const auto clean = toy_speech(2, 0);
  Rng rng = counter_rng(0, 0, 0);
  const auto s = mix(clean, white_noise(3, 1.0), 60.0, rng);
  EXPECT_GT(metrics::si_snr(s.clean, s.mixture), 55.0);
}

TEST(Mix, Deterministic) {
  const auto clean = toy_speech(3, 0);
  const auto noise = white_noise(4, 2.5);
  Rng r1 = counter_rng(7, 1, 9), r2 = counter_rng(7, 1, 9);
  const auto a = mix(clean, noise, 3.0, r1), b = mix(clean, noise, 3.0, r2);
  EXPECT_EQ(a.mixture.samples, b.mixture.samples);
  EXPECT_EQ(a.noise.samples, b.noise.samples);
  EXPECT_EQ(a.gain, b.gain);
}

TEST(Mix, RejectsRateMismatchAndEmpty) {
  Rng rng(0);
  EXPECT_THROW(mix(toy_speech(0, 0), testing::random_waveform(100, 1, 0.1, 8000), 0.0, rng), ConfigError);
  EXPECT_THROW(mix(dsp::Waveform{}, white_noise(0, 1.0), 0.0, rng), ConfigError);
}

TEST(SampleSnr, BoundsMeanAndReproducibility) {
  Rng rng = counter_rng(5, 0, 0);
  double lo = 1e9, hi = -1e9, sum = 0.0;
  std::vector<double> first;
  for (int i = 0; i < 10000; ++i) {
    const double v = sample_snr(rng);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    if (i < 10) first.push_back(v);
  }
  EXPECT_GE(lo, -10.0);
  EXPECT_LE(hi, 25.0);
  EXPECT_NEAR(sum / 10000.0, 7.5, 0.5);
  Rng again = counter_rng(5, 0, 0);
  for (double v : first) EXPECT_EQ(sample_snr(again), v);
}

TEST(MixConfig, Validation) {
  MixConfig c;
  EXPECT_EQ(c.snr_low_db, -10.0);
  EXPECT_EQ(c.snr_high_db, 25.0);
  c.snr_low_db = 30.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MixConfig{};
  c.crop_seconds = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Crops, LoopAndTile) {
  dsp::Waveform w;
  w.samples = {1, 2, 3};
  Rng rng(1);
  const auto looped = loop_crop(w, 8, rng);
  ASSERT_EQ(looped.size(), 8u);
  for (std::size_t i = 1; i < 8; ++i) {
    EXPECT_EQ(looped.samples[i], w.samples[(static_cast<std::size_t>(looped.samples[0]) - 1 + i) % 3]);
  }
  const auto tiled = random_crop(w, 5, rng);
  EXPECT_EQ(tiled.size(), 5u);
  auto long_w = testing::random_waveform(100, 2);
  const auto crop = random_crop(long_w, 10, rng);
  const auto it = std::search(long_w.samples.begin(), long_w.samples.end(), crop.samples.begin(), crop.samples.end());
  EXPECT_NE(it, long_w.samples.end());
}

TEST(CounterRng, PureFunctionOfItsKeys) {
  Rng a = counter_rng(1, 2, 3), b = counter_rng(1, 2, 3), c = counter_rng(1, 2, 4), d = counter_rng(1, 3, 3);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Manifest, RoundTripAndValidation) {
  testing::TempDir dir("manifest");
  Manifest m;
  m.entries.push_back({"a.wav", Role::clean, Split::train, "a.emb"});
  m.entries.push_back({"n.wav", Role::noise, Split::eval, ""});
  write_manifest(dir / "m.jsonl", m);
  const auto r = read_manifest(dir / "m.jsonl");
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(std::filesystem::path(r.entries[0].path), dir / "a.wav");
  EXPECT_EQ(std::filesystem::path(r.entries[0].emb), dir / "a.emb");
  EXPECT_EQ(r.entries[1].role, Role::noise);
  EXPECT_EQ(r.entries[1].split, Split::eval);
  EXPECT_EQ(r.select(Role::clean, Split::train).size(), 1u);
  EXPECT_TRUE(r.select(Role::clean, Split::eval).empty());

  m.entries.push_back({"a.wav", Role::noise, Split::train, ""});
  EXPECT_THROW(m.validate(), ConfigError);
  std::ofstream(dir / "bad.jsonl") << "{\"path\": \"x.wav\", \"role\": \"speech\"}\n";
  EXPECT_THROW(read_manifest(dir / "bad.jsonl"), ConfigError);
  EXPECT_THROW(read_manifest(dir / "missing.jsonl"), IoError);
}

TEST(MixingLoader, DeterministicEpochsAndCrops) {
  std::vector<dsp::Waveform> clean, noise{white_noise(1, 3.0)};
  for (std::size_t i = 0; i < 5; ++i) clean.push_back(toy_speech(i, 0, 1.5));
  MixConfig cfg;
  cfg.crop_seconds = 0.5;
  const MixingLoader a(clean, noise, cfg, 11), b(clean, noise, cfg, 11), c(clean, noise, cfg, 12);
  EXPECT_EQ(a.crop_length(), 8000u);
  std::vector<std::size_t> epoch;
  for (std::uint64_t i = 0; i < 5; ++i) epoch.push_back(a.clean_index(i));
  std::vector<std::size_t> sorted = epoch;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  bool differs = false;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto sa = a.sample(i), sb = b.sample(i);
    EXPECT_EQ(sa.mixture.samples, sb.mixture.samples);
    EXPECT_EQ(sa.clean.size(), 8000u);
    EXPECT_GE(sa.snr_db, -10.0);
    EXPECT_LE(sa.snr_db, 25.0);
    differs = differs || c.sample(i).mixture.samples != sa.mixture.samples;
  }
  EXPECT_TRUE(differs);
  // order of requests does not matter
  EXPECT_EQ(a.sample(7).mixture.samples, MixingLoader(clean, noise, cfg, 11).sample(7).mixture.samples);
  EXPECT_EQ(a.sample_clip(2, 0).clean.size(), clean[2].size());
  EXPECT_THROW(MixingLoader({}, noise, cfg, 0), ConfigError);
  EXPECT_THROW(MixingLoader(clean, {}, cfg, 0), ConfigError);
}

TEST(ToyCorpus, WritesManifestAndClips) {
  testing::TempDir dir("toy");
  ToyCorpusOptions opt;
  opt.clean_clips = 3;
  opt.noise_clips = 1;
  const auto path = write_toy_corpus(dir.path(), opt);
  const auto m = read_manifest(path);
  EXPECT_EQ(m.select(Role::clean, Split::train).size(), 3u);
  EXPECT_EQ(m.select(Role::noise, Split::train).size(), 1u);
  const auto w = load_audio(m.entries.front().path);
  EXPECT_EQ(w.sample_rate_hz, 16000);
  EXPECT_EQ(w.size(), 16000u);
  EXPECT_NEAR(dsp::peak_abs(w.samples), 0.5f, 1e-3);
  const auto loader = MixingLoader::from_manifest(m, Split::train, MixConfig{}, 0);
  EXPECT_EQ(loader.clean_count(), 3u);
}

TEST(ToySpeech, HarmonicAndReproducible) {
  const auto a = toy_speech(4, 1), b = toy_speech(4, 1), c = toy_speech(5, 1);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_NEAR(dsp::peak_abs(a.samples), 0.5f, 1e-6);
  const auto n = white_noise(0, 2.0);
  EXPECT_EQ(n.size(), 32000u);
  EXPECT_NEAR(std::sqrt(power(n.samples)), 0.1, 0.005);
}

TEST(LoadAudio, ResamplesTo16k) {
  testing::TempDir dir("load");
  dsp::write_wav(dir / "a.wav", testing::sine(440.0, 0.5, 48000, 0.3));
  const auto w = load_audio(dir / "a.wav");
  EXPECT_EQ(w.sample_rate_hz, 16000);
  EXPECT_EQ(w.size(), 8000u);
}

}  // namespace
}  // namespace emd::data
