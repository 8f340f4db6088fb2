#pragma once

#include <cstdint>
#include <vector>

#include "emd/nn/ops.hpp"
#include "emd/nn/optim.hpp"
#include "emd/nn/tape.hpp"
#include "emd/vocoder/config.hpp"

namespace emd::voc {

// Logits and intermediate feature maps, one entry per sub-discriminator.
template <typename T>
struct DiscriminatorOutput {
  std::vector<nn::Var<T>> logits;
  std::vector<std::vector<nn::Var<T>>> features;
};

struct Conv2dLayer {
  std::size_t in = 0, out = 0, kh = 0, kw = 0;
  nn::Conv2dGeometry geom;
};

// Stack of 2-D convolutions with leaky ReLU between them and a linear
// post-convolution producing the logit map.
template <typename T>
class ConvStack {
 public:
  ConvStack(nn::ParameterStore<T>& store, const std::string& prefix,
            const std::vector<Conv2dLayer>& layers, double slope, nn::Rng& rng);
  // x [C, H, W]; features receive every post-activation map and the logits.
  nn::Var<T> forward(nn::Tape<T>& tape, nn::Var<T> x, std::vector<nn::Var<T>>& features) const;

 private:
  std::vector<Conv2dLayer> layers_;
  std::vector<nn::Parameter<T>*> weights_;
  std::vector<nn::Parameter<T>*> biases_;
  T slope_;
};

// One sub-discriminator per period over [1, ceil(L / p), p] views of the
// reflect-padded waveform.
template <typename T>
class MultiPeriodDiscriminator {
 public:
  MultiPeriodDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
  MultiPeriodDiscriminator(MultiPeriodDiscriminator&&) noexcept = default;

  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  std::size_t size() const { return stacks_.size(); }
  // x: waveform [L].
  DiscriminatorOutput<T> forward(nn::Tape<T>& tape, const nn::Var<T>& x) const;

 private:
  DiscriminatorConfig cfg_;
  nn::ParameterStore<T> params_;
  std::vector<ConvStack<T>> stacks_;
};

// One sub-discriminator per STFT resolution over the [1, bins, frames]
// magnitude spectrogram.
template <typename T>
class MultiResolutionDiscriminator {
 public:
  MultiResolutionDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
  MultiResolutionDiscriminator(MultiResolutionDiscriminator&&) noexcept = default;

  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  std::size_t size() const { return stacks_.size(); }
  DiscriminatorOutput<T> forward(nn::Tape<T>& tape, const nn::Var<T>& x) const;

 private:
  DiscriminatorConfig cfg_;
  nn::ParameterStore<T> params_;
  std::vector<ConvStack<T>> stacks_;
};

extern template class ConvStack<float>;
extern template class ConvStack<double>;
extern template class MultiPeriodDiscriminator<float>;
extern template class MultiPeriodDiscriminator<double>;
extern template class MultiResolutionDiscriminator<float>;
extern template class MultiResolutionDiscriminator<double>;

}  // namespace emd::voc
