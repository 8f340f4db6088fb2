#include "emd/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "emd/common/error.hpp"
#include "emd/dsp/fft.hpp"
#include "emd/dsp/resample.hpp"
#include "emd/dsp/stft.hpp"

namespace emd::metrics {
namespace {

constexpr int kStoiRate = 10000;
constexpr std::size_t kFrameLen = 256;
constexpr std::size_t kFftLen = 512;
constexpr std::size_t kHop = 128;
constexpr std::size_t kBands = 15;
constexpr double kMinFreq = 150.0;
constexpr std::size_t kSegment = 30;
constexpr double kBeta = -15.0;
constexpr double kDynRange = 40.0;
constexpr double kEps = 2.220446049250313e-16;

// Symmetric Hann without the zero end points (MATLAB hanning(N)).
std::vector<double> stoi_window() {
  std::vector<double> w(kFrameLen);
  for (std::size_t i = 0; i < kFrameLen; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                static_cast<double>(kFrameLen + 1));
  }
  return w;
}

std::vector<double> to_double(const dsp::Waveform& w) { return {w.samples.begin(), w.samples.end()}; }

// Frame starts 0, hop, ... strictly below len - frame_len.
std::size_t frame_count(std::size_t len) {
  if (len <= kFrameLen) return 0;
  return (len - kFrameLen - 1) / kHop + 1;
}

void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = stoi_window();
  const std::size_t n = frame_count(x.size());
  std::vector<double> energy(n);
  for (std::size_t f = 0; f < n; ++f) {
    double e = 0.0;
    for (std::size_t i = 0; i < kFrameLen; ++i) {
      const double v = w[i] * x[f * kHop + i];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + kEps);
  }
  const double top = n > 0 ? *std::max_element(energy.begin(), energy.end()) : 0.0;
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < n; ++f) {
    if (top - kDynRange - energy[f] < 0.0) keep.push_back(f);
  }
  const std::size_t out_len = keep.empty() ? 0 : (keep.size() - 1) * kHop + kFrameLen;
  std::vector<double> xo(out_len, 0.0), yo(out_len, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const std::size_t src = keep[k] * kHop;
    for (std::size_t i = 0; i < kFrameLen; ++i) {
      xo[k * kHop + i] += w[i] * x[src + i];
      yo[k * kHop + i] += w[i] * y[src + i];
    }
  }
  x = std::move(xo);
  y = std::move(yo);
}

// |STFT|^2 as frames x (kFftLen / 2 + 1).
std::vector<double> power_frames(const std::vector<double>& x, std::size_t& frames) {
  static const dsp::FftPlan plan(kFftLen);
  const auto w = stoi_window();
  frames = frame_count(x.size());
  const std::size_t bins = kFftLen / 2 + 1;
  std::vector<double> out(frames * bins);
  std::vector<double> buf(kFftLen);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < kFrameLen; ++i) buf[i] = w[i] * x[f * kHop + i];
    plan.rfft(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) out[f * bins + k] = std::norm(spec[k]);
  }
  return out;
}

// Band edges as FFT bin ranges [lo, hi).
std::vector<std::pair<std::size_t, std::size_t>> third_octave_bands() {
  const std::size_t bins = kFftLen / 2 + 1;
  auto nearest = [&](double hz) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kStoiRate / kFftLen;
      const double d = (f - hz) * (f - hz);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  for (std::size_t b = 0; b < kBands; ++b) {
    const double k = static_cast<double>(b);
    const double lo = kMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = kMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    bands.emplace_back(nearest(lo), nearest(hi));
  }
  return bands;
}

}  // namespace

double stoi(const dsp::Waveform& clean, const dsp::Waveform& processed) {
  if (clean.size() != processed.size()) {
    throw ConfigError("stoi: inputs have different lengths (" + std::to_string(clean.size()) +
                      " vs " + std::to_string(processed.size()) + ")");
  }
  if (clean.sample_rate_hz != processed.sample_rate_hz) throw ConfigError("stoi: sample rates differ");
  std::vector<double> x = to_double(dsp::resample(clean, kStoiRate));
  std::vector<double> y = to_double(dsp::resample(processed, kStoiRate));
  remove_silent_frames(x, y);

  std::size_t frames = 0, frames_y = 0;
  const auto px = power_frames(x, frames);
  const auto py = power_frames(y, frames_y);
  if (frames < kSegment) {
    throw ConfigError("stoi needs at least 384 ms of non-silent signal (30 frames at 10 kHz), got " +
                      std::to_string(frames) + " frames");
  }
  const std::size_t bins = kFftLen / 2 + 1;
  const auto bands = third_octave_bands();
  std::vector<double> xt(kBands * frames), yt(kBands * frames);
  for (std::size_t b = 0; b < kBands; ++b) {
    for (std::size_t f = 0; f < frames; ++f) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t k = bands[b].first; k < bands[b].second; ++k) {
        sx += px[f * bins + k];
        sy += py[f * bins + k];
      }
      xt[b * frames + f] = std::sqrt(sx);
      yt[b * frames + f] = std::sqrt(sy);
    }
  }

  const double clip = std::pow(10.0, -kBeta / 20.0);
  double total = 0.0;
  const std::size_t segments = frames - kSegment + 1;
  std::vector<double> xs(kSegment), ys(kSegment);
  for (std::size_t m = kSegment; m <= frames; ++m) {
    for (std::size_t b = 0; b < kBands; ++b) {
      double nx = 0.0, ny = 0.0;
      for (std::size_t n = 0; n < kSegment; ++n) {
        xs[n] = xt[b * frames + m - kSegment + n];
        ys[n] = yt[b * frames + m - kSegment + n];
        nx += xs[n] * xs[n];
        ny += ys[n] * ys[n];
      }
      const double norm_const = std::sqrt(nx) / (std::sqrt(ny) + kEps);
      double mx = 0.0, my = 0.0;
      for (std::size_t n = 0; n < kSegment; ++n) {
        ys[n] = std::min(ys[n] * norm_const, xs[n] * (1.0 + clip));
        mx += xs[n];
        my += ys[n];
      }
      mx /= kSegment;
      my /= kSegment;
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t n = 0; n < kSegment; ++n) {
        const double a = xs[n] - mx, c = ys[n] - my;
        sxx += a * a;
        syy += c * c;
        sxy += a * c;
      }
      total += sxy / ((std::sqrt(sxx) + kEps) * (std::sqrt(syy) + kEps));
    }
  }
  return total / static_cast<double>(segments * kBands);
}

double si_snr(std::span<const float> ref, std::span<const float> est) {
  if (ref.size() != est.size()) {
    throw ConfigError("si_snr: lengths differ (" + std::to_string(ref.size()) + " vs " +
                      std::to_string(est.size()) + ")");
  }
  if (ref.empty()) throw ConfigError("si_snr: empty input");
  const double n = static_cast<double>(ref.size());
  double mr = 0.0, me = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    mr += ref[i];
    me += est[i];
  }
  mr /= n;
  me /= n;
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double r = ref[i] - mr, e = est[i] - me;
    dot += r * e;
    rr += r * r;
  }
  if (!(rr > 0.0)) throw ConfigError("si_snr: reference signal is zero");
  const double alpha = dot / rr;
  double pt = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = alpha * (ref[i] - mr);
    const double d = (est[i] - me) - t;
    pt += t * t;
    pn += d * d;
  }
  if (!(pt > 0.0)) return -kSiSnrCapDb;  // nothing of the reference survives, including est = 0
  if (!(pn > 0.0)) return kSiSnrCapDb;
  return std::clamp(10.0 * std::log10(pt / pn), -kSiSnrCapDb, kSiSnrCapDb);
}

double si_snr(const dsp::Waveform& ref, const dsp::Waveform& est) {
  return si_snr(std::span<const float>(ref.samples), std::span<const float>(est.samples));
}

double lsd(const dsp::Waveform& ref, const dsp::Waveform& est) {
  if (ref.size() != est.size()) {
    throw ConfigError("lsd: lengths differ (" + std::to_string(ref.size()) + " vs " +
                      std::to_string(est.size()) + ")");
  }
  if (ref.empty()) throw ConfigError("lsd: empty input");
  const dsp::StftConfig cfg;
  const auto a = dsp::stft(ref, cfg);
  const auto b = dsp::stft(est, cfg);
  double total = 0.0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.bins; ++k) {
      const double la = 20.0 * std::log10(std::max(std::abs(a.at(t, k)), 1e-8));
      const double lb = 20.0 * std::log10(std::max(std::abs(b.at(t, k)), 1e-8));
      acc += (la - lb) * (la - lb);
    }
    total += std::sqrt(acc / static_cast<double>(a.bins));
  }
  return total / static_cast<double>(a.frames);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ConfigError("cosine_similarity: dims differ (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw ConfigError("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace emd::metrics
