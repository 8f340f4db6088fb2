#include "emd/dsp/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <string>
#include <vector>

#include "emd/common/error.hpp"

namespace emd::dsp {
namespace {

constexpr double kKaiserBeta = 14.769656459379492;
constexpr double kRolloff = 0.9475937167399596;
constexpr int kZeroCrossings = 64;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double half_width) {
  const double r = x / half_width;
  if (std::abs(r) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

}  // namespace

Waveform resample(const Waveform& w, int target_hz) {
  if (target_hz <= 0) throw ConfigError("resample: target rate must be positive");
  validate(w);
  if (w.sample_rate_hz == target_hz) return w;

  const long long source = w.sample_rate_hz;
  const long long g = std::gcd(source, static_cast<long long>(target_hz));
  const long long up = target_hz / g;
  const long long down = source / g;
  const long long n_in = static_cast<long long>(w.samples.size());
  const long long n_out = (2 * n_in * up + down) / (2 * down);

  // Cutoff relative to the input Nyquist frequency.
  const double scale = std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const double half_width = kZeroCrossings / scale;  // in input samples
  const long long half_taps = static_cast<long long>(std::ceil(half_width));
  const long long taps = 2 * half_taps;

  // table[p][j]: weight of input sample n0 - half_taps + 1 + j for phase p.
  std::vector<double> table(static_cast<std::size_t>(up * taps));
  for (long long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    for (long long j = 0; j < taps; ++j) {
      const double d = static_cast<double>(j - half_taps + 1) - frac;
      table[static_cast<std::size_t>(p * taps + j)] =
          scale * sinc(scale * d) * kaiser(d, half_width);
    }
  }

  Waveform out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long long m = 0; m < n_out; ++m) {
    const long long pos = m * down;
    const long long n0 = pos / up;
    const long long phase = pos % up;
    const double* h = table.data() + phase * taps;
    double acc = 0.0;
    const long long first = n0 - half_taps + 1;
    const long long j_lo = std::max(0LL, -first);
    const long long j_hi = std::min(taps, n_in - first);
    for (long long j = j_lo; j < j_hi; ++j) {
      acc += h[j] * static_cast<double>(w.samples[static_cast<std::size_t>(first + j)]);
    }
    out.samples[static_cast<std::size_t>(m)] = static_cast<float>(acc);
  }
  return out;
}

Waveform to_pipeline_rate(const Waveform& w) { return resample(w, kPipelineSampleRate); }

}  // namespace emd::dsp
