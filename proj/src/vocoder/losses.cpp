#include "emd/vocoder/losses.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"

namespace emd::voc {
namespace {

template <typename T>
void check_pairing(const DiscriminatorOutput<T>& real, const DiscriminatorOutput<T>& fake,
                   const char* who) {
  if (real.logits.size() != fake.logits.size() || real.features.size() != fake.features.size()) {
    throw ConfigError(std::string(who) + ": real has " + std::to_string(real.logits.size()) +
                      " sub-discriminators, fake has " + std::to_string(fake.logits.size()));
  }
  if (real.logits.empty()) throw ConfigError(std::string(who) + ": no sub-discriminators");
}

template <typename T>
nn::Var<T> average(const std::vector<nn::Var<T>>& terms) {
  nn::Var<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
  return nn::scale(acc, T(1) / static_cast<T>(terms.size()));
}

}  // namespace

template <typename T>
nn::Var<T> discriminator_loss(const DiscriminatorOutput<T>& real, const DiscriminatorOutput<T>& fake,
                              GanLoss kind) {
  check_pairing(real, fake, "discriminator_loss");
  std::vector<nn::Var<T>> terms;
  for (std::size_t i = 0; i < real.logits.size(); ++i) {
    const auto& r = real.logits[i];
    const auto& f = fake.logits[i];
    if (kind == GanLoss::hinge) {
      terms.push_back(nn::add(nn::mean(nn::relu(nn::add_scalar(nn::neg(r), T(1)))),
                              nn::mean(nn::relu(nn::add_scalar(f, T(1))))));
    } else {
      terms.push_back(nn::add(nn::mean(nn::square(nn::add_scalar(nn::neg(r), T(1)))),
                              nn::mean(nn::square(f))));
    }
  }
  return average(terms);
}

template <typename T>
nn::Var<T> generator_loss(const DiscriminatorOutput<T>& fake, GanLoss kind) {
  if (fake.logits.empty()) throw ConfigError("generator_loss: no sub-discriminators");
  std::vector<nn::Var<T>> terms;
  for (const auto& f : fake.logits) {
    if (kind == GanLoss::hinge) {
      terms.push_back(nn::mean(nn::neg(f)));
    } else {
      terms.push_back(nn::mean(nn::square(nn::add_scalar(nn::neg(f), T(1)))));
    }
  }
  return average(terms);
}

template <typename T>
nn::Var<T> feature_matching_loss(const DiscriminatorOutput<T>& real,
                                 const DiscriminatorOutput<T>& fake) {
  check_pairing(real, fake, "feature_matching_loss");
  std::vector<nn::Var<T>> terms;
  for (std::size_t i = 0; i < real.features.size(); ++i) {
    if (real.features[i].size() != fake.features[i].size() || real.features[i].empty()) {
      throw ConfigError("feature_matching_loss: sub-discriminator " + std::to_string(i) +
                        " has " + std::to_string(real.features[i].size()) + " real and " +
                        std::to_string(fake.features[i].size()) + " fake feature maps");
    }
    for (std::size_t j = 0; j < real.features[i].size(); ++j) {
      terms.push_back(nn::l1(real.features[i][j], fake.features[i][j]));
    }
  }
  return average(terms);
}

template <typename T>
MelLoss<T>::MelLoss(const dsp::StftConfig& stft, const dsp::MelConfig& mel) : stft_(stft), mel_(mel) {
  stft_.validate();
  const dsp::MelFilterbank fb(stft_, mel_);
  fb_t_.resize(fb.bins() * fb.n_mels());
  for (std::size_t m = 0; m < fb.n_mels(); ++m) {
    for (std::size_t k = 0; k < fb.bins(); ++k) fb_t_[k * fb.n_mels() + m] = static_cast<T>(fb.at(m, k));
  }
}

template <typename T>
nn::Var<T> MelLoss<T>::log_mel(const nn::Var<T>& x) const {
  const nn::Var<T> spec = nn::stft(x, stft_.n_fft, stft_.hop, stft_.center);
  const std::size_t bins = stft_.bins();
  const nn::Var<T> power = nn::add(nn::square(nn::slice_cols(spec, 0, bins)),
                                   nn::square(nn::slice_cols(spec, bins, 2 * bins)));
  const nn::Var<T> fb = x.tape().constant({bins, mel_.n_mels}, fb_t_);
  return nn::log(nn::clamp_min(nn::matmul(power, fb), static_cast<T>(mel_.log_floor)));
}

template <typename T>
nn::Var<T> MelLoss<T>::operator()(const nn::Var<T>& ref, const nn::Var<T>& est) const {
  if (ref.shape().size() != 1 || est.shape().size() != 1) {
    throw ConfigError("mel loss expects 1-D waveforms, got " + nn::to_string(ref.shape()) +
                      " and " + nn::to_string(est.shape()));
  }
  return nn::l1(log_mel(ref), log_mel(fit_length(est, ref.size())));
}

template <typename T>
nn::Var<T> spectral_loss(const nn::Var<T>& ref, const nn::Var<T>& est, const dsp::StftConfig& stft) {
  const nn::Var<T> a = nn::stft(ref, stft.n_fft, stft.hop, stft.center);
  const nn::Var<T> b = nn::stft(fit_length(est, ref.size()), stft.n_fft, stft.hop, stft.center);
  double scale = 0.0;
  for (T v : a.value()) scale += std::abs(static_cast<double>(v));
  scale /= static_cast<double>(a.size());
  if (!(scale > 0.0)) scale = 1.0;
  return nn::scale(nn::l1(a, b), static_cast<T>(1.0 / scale));
}

template <typename T>
nn::Var<T> fit_length(const nn::Var<T>& x, std::size_t length) {
  const std::size_t n = x.size();
  if (n == length) return x;
  nn::Var<T> row = nn::reshape(x, {1, n});
  if (n > length) {
    row = nn::slice_cols(row, 0, length);
  } else {
    row = nn::concat_cols(row, x.tape().constant({1, length - n}, std::vector<T>(length - n, T(0))));
  }
  return nn::reshape(row, {length});
}

double mel_reconstruction_loss(const dsp::Waveform& ref, const dsp::Waveform& est) {
  if (ref.sample_rate_hz != est.sample_rate_hz) {
    throw ConfigError("mel_reconstruction_loss: sample rates differ");
  }
  dsp::Waveform fitted = est;
  fitted.samples.resize(ref.samples.size(), 0.0f);
  const dsp::StftConfig stft;
  const dsp::MelConfig mel;
  const dsp::LogMel a = dsp::log_mel(ref, stft, mel);
  const dsp::LogMel b = dsp::log_mel(fitted, stft, mel);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
  return acc / static_cast<double>(a.data.size());
}

#define EMD_INSTANTIATE(T)                                                                       \
  template nn::Var<T> discriminator_loss(const DiscriminatorOutput<T>&,                         \
                                         const DiscriminatorOutput<T>&, GanLoss);               \
  template nn::Var<T> generator_loss(const DiscriminatorOutput<T>&, GanLoss);                   \
  template nn::Var<T> feature_matching_loss(const DiscriminatorOutput<T>&,                      \
                                            const DiscriminatorOutput<T>&);                     \
  template class MelLoss<T>;                                                                     \
  template nn::Var<T> spectral_loss(const nn::Var<T>&, const nn::Var<T>&, const dsp::StftConfig&); \
  template nn::Var<T> fit_length(const nn::Var<T>&, std::size_t);

EMD_INSTANTIATE(float)
EMD_INSTANTIATE(double)
#undef EMD_INSTANTIATE

}  // namespace emd::voc
