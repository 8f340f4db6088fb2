#include <complex>

#include "emd/dsp/fft.hpp"
#include "emd/dsp/stft.hpp"
#include "ops_common.hpp"

namespace emd::nn {
namespace {

using detail::tape_of;

dsp::StftConfig make_config(const char* op, std::size_t n_fft, std::size_t hop, bool center) {
  dsp::StftConfig cfg;
  cfg.n_fft = n_fft;
  cfg.hop = hop;
  cfg.center = center;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    detail::arg_error(op, e.what());
  }
  return cfg;
}

}  // namespace

template <typename T>
Var<T> stft(const Var<T>& x, std::size_t n_fft, std::size_t hop, bool center) {
  Tape<T>& tape = tape_of("stft", x);
  detail::require_rank("stft", x, 1);
  const dsp::StftConfig cfg = make_config("stft", n_fft, hop, center);
  const std::size_t len = x.dim(0);
  if (len == 0) detail::arg_error("stft", "empty waveform");
  if (!center && len < n_fft) detail::arg_error("stft", "waveform shorter than one frame");
  const std::size_t frames = dsp::stft_frame_count(len, cfg), bins = cfg.bins();
  const long long pad = center ? static_cast<long long>(n_fft / 2) : 0;
  const auto window = dsp::analysis_window(cfg);
  const dsp::FftPlan plan(n_fft);

  const auto xv = x.value();
  std::vector<T> out(frames * 2 * bins);
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t * hop) - pad;
    for (std::size_t i = 0; i < n_fft; ++i) {
      frame[i] = static_cast<double>(xv[dsp::reflect_index(start + static_cast<long long>(i), len)]) *
                 window[i];
    }
    plan.rfft(frame, spec);
    for (std::size_t k = 0; k < bins; ++k) {
      out[t * 2 * bins + k] = static_cast<T>(spec[k].real());
      out[t * 2 * bins + bins + k] = static_cast<T>(spec[k].imag());
    }
  }
  const std::size_t ix = x.id();
  return tape.record(
      "stft", Shape{frames, 2 * bins}, std::move(out), x.requires_grad(),
      [=, window = std::move(window)](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad(self);
        auto& gx = tp.grad(ix);
        const dsp::FftPlan plan(n_fft);
        std::vector<std::complex<double>> z(n_fft);
        for (std::size_t t = 0; t < frames; ++t) {
          std::fill(z.begin(), z.end(), std::complex<double>(0.0, 0.0));
          for (std::size_t k = 0; k < bins; ++k) {
            z[k] = {static_cast<double>(g[t * 2 * bins + k]),
                    static_cast<double>(g[t * 2 * bins + bins + k])};
          }
          plan.inverse(z);
          const long long start = static_cast<long long>(t * hop) - pad;
          for (std::size_t i = 0; i < n_fft; ++i) {
            gx[dsp::reflect_index(start + static_cast<long long>(i), len)] +=
                static_cast<T>(window[i] * z[i].real());
          }
        }
      });
}

template <typename T>
Var<T> istft(const Var<T>& spec, std::size_t n_fft, std::size_t hop, std::size_t length,
             bool center) {
  Tape<T>& tape = tape_of("istft", spec);
  detail::require_rank("istft", spec, 2);
  const dsp::StftConfig cfg = make_config("istft", n_fft, hop, center);
  const std::size_t frames = spec.dim(0), bins = cfg.bins();
  if (frames == 0) detail::arg_error("istft", "spectrogram has no frames");
  if (spec.dim(1) != 2 * bins) {
    detail::shape_error("istft", spec.shape(), Shape{frames, 2 * bins});
  }
  if (length > dsp::istft_max_length(frames, cfg)) {
    detail::arg_error("istft", "requested length " + std::to_string(length) +
                                   " exceeds synthesizable length " +
                                   std::to_string(dsp::istft_max_length(frames, cfg)));
  }
  const std::size_t pad = center ? n_fft / 2 : 0;
  const std::size_t full = (frames - 1) * hop + n_fft;
  const auto window = dsp::analysis_window(cfg);
  const dsp::FftPlan plan(n_fft);

  const auto sv = spec.value();
  std::vector<double> acc(full, 0.0), env(full, 0.0), frame(n_fft);
  std::vector<std::complex<double>> half(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      half[k] = {static_cast<double>(sv[t * 2 * bins + k]),
                 static_cast<double>(sv[t * 2 * bins + bins + k])};
    }
    plan.irfft(half, frame);
    for (std::size_t i = 0; i < n_fft; ++i) {
      acc[t * hop + i] += frame[i] * window[i];
      env[t * hop + i] += window[i] * window[i];
    }
  }
  std::vector<double> inv_env(full, 0.0);
  for (std::size_t i = 0; i < full; ++i) inv_env[i] = env[i] > 1e-11 ? 1.0 / env[i] : 0.0;
  std::vector<T> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t j = i + pad;
    out[i] = j < full ? static_cast<T>(acc[j] * inv_env[j]) : T(0);
  }
  const std::size_t is = spec.id();
  return tape.record(
      "istft", Shape{length}, std::move(out), spec.requires_grad(),
      [=, window = std::move(window), inv_env = std::move(inv_env)](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad(self);
        auto& gs = tp.grad(is);
        const dsp::FftPlan plan(n_fft);
        std::vector<std::complex<double>> u(n_fft);
        const double inv_n = 1.0 / static_cast<double>(n_fft);
        for (std::size_t t = 0; t < frames; ++t) {
          for (std::size_t i = 0; i < n_fft; ++i) {
            const std::size_t j = t * hop + i;
            const double gi = (j >= pad && j - pad < length) ? static_cast<double>(g[j - pad]) : 0.0;
            u[i] = {gi * inv_env[j] * window[i], 0.0};
          }
          plan.forward(u);
          for (std::size_t k = 0; k < bins; ++k) {
            const bool edge = k == 0 || k == bins - 1;
            const double c = (edge ? 1.0 : 2.0) * inv_n;
            gs[t * 2 * bins + k] += static_cast<T>(c * u[k].real());
            if (!edge) gs[t * 2 * bins + bins + k] += static_cast<T>(c * u[k].imag());
          }
        }
      });
}

template Var<float> stft(const Var<float>&, std::size_t, std::size_t, bool);
template Var<double> stft(const Var<double>&, std::size_t, std::size_t, bool);
template Var<float> istft(const Var<float>&, std::size_t, std::size_t, std::size_t, bool);
template Var<double> istft(const Var<double>&, std::size_t, std::size_t, std::size_t, bool);

}  // namespace emd::nn
