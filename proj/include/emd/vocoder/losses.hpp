#pragma once

#include <vector>

#include "emd/dsp/mel.hpp"
#include "emd/dsp/waveform.hpp"
#include "emd/nn/tape.hpp"
#include "emd/vocoder/discriminators.hpp"

namespace emd::voc {

enum class GanLoss { hinge, least_squares };

// Discriminator loss averaged over sub-discriminators. Hinge:
//   mean(relu(1 - real)) + mean(relu(1 + fake)).
template <typename T>
nn::Var<T> discriminator_loss(const DiscriminatorOutput<T>& real, const DiscriminatorOutput<T>& fake,
                              GanLoss kind = GanLoss::hinge);

// Generator adversarial loss averaged over sub-discriminators. Hinge:
// mean(-fake).
template <typename T>
nn::Var<T> generator_loss(const DiscriminatorOutput<T>& fake, GanLoss kind = GanLoss::hinge);

// Mean over (sub-discriminator, layer) of the mean absolute difference.
// Throws ConfigError when the feature lists do not line up.
template <typename T>
nn::Var<T> feature_matching_loss(const DiscriminatorOutput<T>& real,
                                 const DiscriminatorOutput<T>& fake);

// Differentiable log-mel L1 distance.
template <typename T>
class MelLoss {
 public:
  explicit MelLoss(const dsp::StftConfig& stft = {}, const dsp::MelConfig& mel = {});
  // Both waveforms [L]; est is cropped or zero-padded to the length of ref.
  nn::Var<T> operator()(const nn::Var<T>& ref, const nn::Var<T>& est) const;
  // log(max(mel(|STFT x|^2), floor)), [frames, n_mels].
  nn::Var<T> log_mel(const nn::Var<T>& x) const;

 private:
  dsp::StftConfig stft_;
  dsp::MelConfig mel_;
  std::vector<T> fb_t_;  // bins x n_mels
};

// Complex STFT L1 distance, divided by the mean absolute value of the
// reference coefficients.
template <typename T>
nn::Var<T> spectral_loss(const nn::Var<T>& ref, const nn::Var<T>& est, const dsp::StftConfig& stft);

// Crops or zero-pads a 1-D node to `length` samples.
template <typename T>
nn::Var<T> fit_length(const nn::Var<T>& x, std::size_t length);

// L1 distance between log-mel matrices (n_mels 100) computed in double.
double mel_reconstruction_loss(const dsp::Waveform& ref, const dsp::Waveform& est);

}  // namespace emd::voc
