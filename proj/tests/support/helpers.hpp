#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "emd/dsp/waveform.hpp"

namespace emd::testing {

inline std::vector<double> random_signal(std::size_t n, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

inline dsp::Waveform random_waveform(std::size_t n, std::uint64_t seed, double scale = 0.5,
                                     int rate = dsp::kPipelineSampleRate) {
  dsp::Waveform w;
  w.sample_rate_hz = rate;
  for (double v : random_signal(n, seed, scale)) w.samples.push_back(static_cast<float>(v));
  return w;
}

inline dsp::Waveform sine(double freq, double seconds, int rate, double amp = 0.5, double phase = 0.0) {
  dsp::Waveform w;
  w.sample_rate_hz = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate + phase));
  }
  return w;
}

inline std::vector<double> to_double(const dsp::Waveform& w) { return {w.samples.begin(), w.samples.end()}; }

// Direct O(n^2) DFT, used as an oracle.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n));
    }
    out[k] = acc;
  }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("emd_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace emd::testing
