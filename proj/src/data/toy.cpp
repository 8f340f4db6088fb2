#include "emd/data/toy.hpp"

#include <cmath>
#include <numbers>

#include "emd/data/mixer.hpp"
#include "emd/dsp/wav.hpp"

namespace emd::data {
namespace {

constexpr std::uint64_t kSpeechStream = 11;
constexpr std::uint64_t kNoiseStream = 12;

}  // namespace

dsp::Waveform toy_speech(std::size_t clip_index, std::uint64_t seed, double seconds) {
  constexpr double kPi = std::numbers::pi;
  const int sr = dsp::kPipelineSampleRate;
  Rng rng = counter_rng(seed, kSpeechStream, clip_index);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const double f0 = 62.5 * static_cast<double>(2 + clip_index % 3);
  const double f1 = 300.0 + 600.0 * u(rng);
  const double f2 = 900.0 + 1600.0 * u(rng);
  const double rate = 2.5 + 2.0 * u(rng);
  const double theta = kPi * u(rng);
  const auto harmonics = static_cast<std::size_t>(4000.0 / f0);

  std::vector<double> amp(harmonics + 1), phase(harmonics + 1);
  for (std::size_t h = 1; h <= harmonics; ++h) {
    const double f = f0 * static_cast<double>(h);
    const double env = std::exp(-std::pow((f - f1) / 150.0, 2)) +
                       0.7 * std::exp(-std::pow((f - f2) / 250.0, 2)) + 0.05;
    amp[h] = env / std::sqrt(static_cast<double>(h));
    phase[h] = kPi * static_cast<double>(h * h) / static_cast<double>(harmonics);
  }

  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  std::normal_distribution<double> floor_noise(0.0, 1e-3);
  std::vector<double> x(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double v = 0.0;
    for (std::size_t h = 1; h <= harmonics; ++h) {
      v += amp[h] * std::cos(2.0 * kPi * f0 * static_cast<double>(h) * t + phase[h]);
    }
    const double s = std::sin(kPi * rate * t + theta);
    x[i] = (0.15 + 0.85 * s * s) * v + floor_noise(rng);
    peak = std::max(peak, std::abs(x[i]));
  }
  dsp::Waveform w;
  w.sample_rate_hz = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(0.5 * x[i] / peak);
  return w;
}

dsp::Waveform white_noise(std::uint64_t seed, double seconds) {
  Rng rng = counter_rng(seed, kNoiseStream, 0);
  std::normal_distribution<double> dist(0.0, 0.1);
  dsp::Waveform w;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * dsp::kPipelineSampleRate)));
  for (auto& v : w.samples) v = static_cast<float>(dist(rng));
  return w;
}

std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusOptions& opt) {
  std::filesystem::create_directories(dir);
  Manifest m;
  auto name = [](const char* stem, std::size_t i) {
    std::string s = std::to_string(i);
    if (s.size() < 2) s = "0" + s;
    return std::string(stem) + "_" + s + ".wav";
  };
  for (std::size_t i = 0; i < opt.clean_clips; ++i) {
    const std::string file = name("clean", i);
    dsp::write_wav(dir / file, toy_speech(i, opt.seed, opt.clip_seconds));
    m.entries.push_back({file, Role::clean, Split::train, ""});
  }
  for (std::size_t i = 0; i < opt.noise_clips; ++i) {
    const std::string file = name("noise", i);
    dsp::write_wav(dir / file, white_noise(opt.seed * 1000 + i, opt.noise_seconds));
    m.entries.push_back({file, Role::noise, Split::train, ""});
  }
  const auto path = dir / "manifest.jsonl";
  write_manifest(path, m);
  return path;
}

}  // namespace emd::data
