#pragma once

#include <cstdint>
#include <vector>

#include "emd/dsp/waveform.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/nn/optim.hpp"
#include "emd/nn/tape.hpp"
#include "emd/vocoder/config.hpp"

namespace emd::voc {

// ConvNeXt backbone with an ISTFT head:
//   nearest upsampling -> conv(k) -> LN -> n_blocks x ConvNeXt -> LN ->
//   linear(n_fft + 2) -> (log-magnitude, phase) -> ISTFT.
template <typename T>
class Generator {
 public:
  Generator(const VocoderConfig& cfg, std::uint64_t seed);
  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;

  const VocoderConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  std::size_t count_params() const { return params_.count(); }

  // emb [frames_in, input_dim] -> waveform [output_frames * hop].
  nn::Var<T> forward(nn::Tape<T>& tape, const nn::Var<T>& emb);
  // Same as forward() but stops at the complex spectrum [frames, 2 * bins].
  nn::Var<T> spectrum(nn::Tape<T>& tape, const nn::Var<T>& emb);

 private:
  struct Block {
    nn::Parameter<T>* dw_w;
    nn::Parameter<T>* dw_b;
    nn::Parameter<T>* ln_g;
    nn::Parameter<T>* ln_b;
    nn::Parameter<T>* pw1_w;
    nn::Parameter<T>* pw1_b;
    nn::Parameter<T>* pw2_w;
    nn::Parameter<T>* pw2_b;
    nn::Parameter<T>* gamma;
  };

  VocoderConfig cfg_;
  std::uint64_t seed_;
  nn::ParameterStore<T> params_;
  nn::Parameter<T>* embed_w_;
  nn::Parameter<T>* embed_b_;
  nn::Parameter<T>* norm_g_;
  nn::Parameter<T>* norm_b_;
  std::vector<Block> blocks_;
  nn::Parameter<T>* final_g_;
  nn::Parameter<T>* final_b_;
  nn::Parameter<T>* head_w_;
  nn::Parameter<T>* head_b_;
};

extern template class Generator<float>;
extern template class Generator<double>;

// Parameter count from the configuration alone.
std::size_t generator_param_count(const VocoderConfig& cfg);

// Checks dim and frame rate against the generator configuration.
void check_embeddings(const VocoderConfig& cfg, const enc::EmbeddingSequence& emb);

// Waveform of output_frames(emb.frames) * hop samples at the configured rate.
dsp::Waveform synthesize(Generator<float>& gen, const enc::EmbeddingSequence& emb);

}  // namespace emd::voc
