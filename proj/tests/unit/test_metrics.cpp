#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "emd/common/error.hpp"
#include "emd/data/mixer.hpp"
#include "emd/data/toy.hpp"
#include "emd/metrics/metrics.hpp"
#include "helpers.hpp"

namespace emd::metrics {
namespace {

// 125 Hz harmonic series with a 4 Hz envelope, 2 s at 16 kHz.
dsp::Waveform harmonic() {
  dsp::Waveform w;
  w.samples.resize(32000);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    double x = 0.0;
    for (int k = 1; k <= 32; ++k) x += std::sin(2.0 * std::numbers::pi * 125.0 * k * t + 0.1 * k * k) / k;
    x *= 0.1 * (0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * 4.0 * t));
    w.samples[i] = static_cast<float>(x);
  }
  return w;
}

// glibc-style LCG, uniform on [-0.5, 0.5).
std::vector<double> lcg_noise(std::size_t n) {
  std::vector<double> out(n);
  std::uint64_t s = 1;
  for (auto& v : out) {
    s = (1103515245ull * s + 12345ull) % (1ull << 31);
    v = static_cast<double>(s) / static_cast<double>(1ull << 31) - 0.5;
  }
  return out;
}

dsp::Waveform plus_noise(const dsp::Waveform& x, double amp) {
  const auto n = lcg_noise(x.size());
  dsp::Waveform y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] = static_cast<float>(x.samples[i] + amp * n[i]);
  return y;
}

dsp::Waveform at_snr(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db) {
  const double g = data::gain_for_snr(clean, noise, snr_db);
  dsp::Waveform y = clean;
  for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += static_cast<float>(g * noise.samples[i]);
  return y;
}

struct StoiReference {
  double noise_amp;
  double expected;
};

class StoiOracle : public ::testing::TestWithParam<StoiReference> {};

// Values from pystoi 0.4.1 (classic STOI) on the same signals.
TEST_P(StoiOracle, MatchesReferenceImplementation) {
  const auto x = harmonic();
  EXPECT_NEAR(stoi(x, plus_noise(x, GetParam().noise_amp)), GetParam().expected, 5e-3);
}

INSTANTIATE_TEST_SUITE_P(Pystoi, StoiOracle,
                         ::testing::Values(StoiReference{0.4, 0.3431117401666586},
                                           StoiReference{0.1, 0.8215603660710441},
                                           StoiReference{0.02, 0.9932661044587088}));

TEST(Stoi, SelfIsOne) {
  EXPECT_NEAR(stoi(harmonic(), harmonic()), 1.0, 1e-6);
  const auto s = data::toy_speech(0, 0, 2.0);
  EXPECT_NEAR(stoi(s, s), 1.0, 1e-6);
}

TEST(Stoi, DecreasesAcrossSnrGrid) {
  for (std::size_t clip = 0; clip < 3; ++clip) {
    const auto clean = data::toy_speech(clip, 0, 2.0);
    const auto noise = data::white_noise(clip + 10, 2.0);
    double prev = 2.0;
    for (double snr : {20.0, 10.0, 0.0, -10.0}) {
      const double v = stoi(clean, at_snr(clean, noise, snr));
      EXPECT_LT(v, prev) << "clip " << clip << " at " << snr << " dB";
      prev = v;
    }
  }
}

TEST(Stoi, IndependentNoiseScoresLow) {
  const auto clean = data::toy_speech(1, 0, 2.0);
  EXPECT_LT(stoi(clean, data::white_noise(3, 2.0)), 0.4);
}

TEST(Stoi, GainInvariant) {
  const auto clean = data::toy_speech(2, 0, 2.0);
  const auto noisy = at_snr(clean, data::white_noise(4, 2.0), 5.0);
  const double ref = stoi(clean, noisy);
  for (double g : {0.1, 1.0, 10.0}) {
    dsp::Waveform a = clean, b = noisy;
    for (auto& v : a.samples) v *= static_cast<float>(g);
    for (auto& v : b.samples) v *= static_cast<float>(g);
    EXPECT_NEAR(stoi(a, noisy), ref, 1e-4) << g;
    EXPECT_NEAR(stoi(clean, b), ref, 1e-4) << g;
  }
}

TEST(Stoi, Errors) {
  const auto a = data::toy_speech(0, 0, 1.0);
  const auto b = data::toy_speech(0, 0, 0.9);
  EXPECT_THROW(stoi(a, b), ConfigError);
  const auto s = data::toy_speech(0, 0, 0.2);
  try {
    stoi(s, s);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("384"), std::string::npos) << e.what();
  }
}

TEST(SiSnr, ScaleAndSignInvariance) {
  const auto x = data::toy_speech(3, 0);
  dsp::Waveform half = x, neg = x;
  for (auto& v : half.samples) v *= 0.5f;
  for (auto& v : neg.samples) v = -v;
  EXPECT_EQ(si_snr(x, half), kSiSnrCapDb);
  EXPECT_EQ(si_snr(x, neg), kSiSnrCapDb);
  const auto noisy = at_snr(x, data::white_noise(1, 1.0), 3.0);
  dsp::Waveform scaled = noisy;
  for (auto& v : scaled.samples) v *= 4.0f;  // power of two keeps the scaling exact
  EXPECT_EQ(si_snr(x, scaled), si_snr(x, noisy));
}

TEST(SiSnr, EqualPowerNoiseIsZeroDb) {
  // orthogonal equal-power pair: sine and cosine of the same bin
  const std::size_t n = 16000;
  dsp::Waveform x, y;
  x.samples.resize(n);
  y.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = 2.0 * std::numbers::pi * 100.0 * static_cast<double>(i) / 16000.0;
    x.samples[i] = static_cast<float>(std::sin(ph));
    y.samples[i] = static_cast<float>(std::sin(ph) + std::cos(ph));
  }
  EXPECT_NEAR(si_snr(x, y), 0.0, 0.1);
  const auto noisy = at_snr(data::toy_speech(0, 0), data::white_noise(2, 1.0), 0.0);
  EXPECT_NEAR(si_snr(data::toy_speech(0, 0), noisy), 0.0, 0.1);
}

TEST(SiSnr, Errors) {
  dsp::Waveform zero;
  zero.samples.assign(100, 0.0f);
  const auto x = testing::random_waveform(100, 1);
  EXPECT_THROW(si_snr(zero, x), ConfigError);
  EXPECT_THROW(si_snr(x, testing::random_waveform(99, 1)), ConfigError);
  EXPECT_EQ(si_snr(x, zero), -kSiSnrCapDb);
}

TEST(Lsd, ClosedForms) {
  const auto x = data::toy_speech(4, 0);
  dsp::Waveform twice = x;
  for (auto& v : twice.samples) v *= 2.0f;
  EXPECT_EQ(lsd(x, x), 0.0);
  EXPECT_NEAR(lsd(x, twice), 20.0 * std::log10(2.0), 1e-3);
  const auto y = at_snr(x, data::white_noise(5, 1.0), 0.0);
  EXPECT_NEAR(lsd(x, y), lsd(y, x), 1e-9);
  EXPECT_GT(lsd(x, y), 0.0);
}

TEST(Cosine, Triple) {
  const std::vector<float> a{1.0f, 2.0f, -3.0f}, neg{-1.0f, -2.0f, 3.0f};
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity(a, neg), -1.0, 1e-12);
  EXPECT_EQ(cosine_similarity(std::vector<float>{1, 0, 0}, std::vector<float>{0, 1, 0}), 0.0);
  EXPECT_THROW(cosine_similarity(a, std::vector<float>{0, 0, 0}), ConfigError);
  EXPECT_THROW(cosine_similarity(a, std::vector<float>{1, 2}), ConfigError);
}

TEST(Metrics, Deterministic) {
  const auto x = data::toy_speech(5, 0, 2.0);
  const auto y = at_snr(x, data::white_noise(6, 2.0), 2.0);
  EXPECT_EQ(stoi(x, y), stoi(x, y));
  EXPECT_EQ(lsd(x, y), lsd(x, y));
  EXPECT_EQ(si_snr(x, y), si_snr(x, y));
}

}  // namespace
}  // namespace emd::metrics
