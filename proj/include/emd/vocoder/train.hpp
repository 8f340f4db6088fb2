#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "emd/dsp/waveform.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/nn/optim.hpp"
#include "emd/vocoder/discriminators.hpp"
#include "emd/vocoder/generator.hpp"
#include "emd/vocoder/losses.hpp"

namespace emd::voc {

struct VocoderTrainConfig {
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double grad_clip = 10.0;
  double lambda_fm = 2.0;
  double lambda_mel = 45.0;
  // Weight of the complex STFT term; 0 disables it.
  double lambda_spec = 0.0;
  bool use_discriminators = true;
  GanLoss gan_loss = GanLoss::hinge;
  std::size_t batch_size = 1;
  std::size_t max_steps = 1000;
  std::size_t log_interval = 50;
  double crop_seconds = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static VocoderTrainConfig from_json(const nlohmann::json& j);
};

// Paired embeddings and the clean audio they were computed from.
struct VocoderExample {
  enc::EmbeddingSequence emb;
  dsp::Waveform audio;
};

struct VocoderLossReport {
  std::uint64_t step = 0;
  double adv_g = 0.0;
  double adv_d = 0.0;
  double feature_matching = 0.0;
  double mel_reconstruction = 0.0;
  double spectral = 0.0;
  double total_g = 0.0;

  nlohmann::json to_json() const;
};

using VocoderBatchSource =
    std::function<std::vector<VocoderExample>(std::uint64_t step, std::size_t batch_size)>;

class VocoderTrainer {
 public:
  VocoderTrainer(const VocoderConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                 const VocoderTrainConfig& train_cfg);

  Generator<float>& generator() { return gen_; }
  MultiPeriodDiscriminator<float>& mpd() { return mpd_; }
  MultiResolutionDiscriminator<float>& mrd() { return mrd_; }
  const VocoderTrainConfig& train_config() const { return cfg_; }
  const DiscriminatorConfig& discriminator_config() const { return disc_cfg_; }
  std::uint64_t steps() const { return steps_; }

  // One discriminator update on the generator's current output, then one
  // generator update. Without discriminators only the generator moves.
  VocoderLossReport train_step(const std::vector<VocoderExample>& batch);

  // Discriminator update against explicitly supplied fake audio; returns the
  // discriminator loss before the update.
  double discriminator_step(const std::vector<dsp::Waveform>& real,
                            const std::vector<dsp::Waveform>& fake);

  // Losses of the current generator without updating anything.
  VocoderLossReport evaluate(const std::vector<VocoderExample>& batch);

  // Runs max_steps train_step() calls; NaN aborts with the step number.
  std::vector<VocoderLossReport> train(const VocoderBatchSource& source,
                                       const std::function<void(const VocoderLossReport&)>& on_log = {});

  // <dir>/generator.ckpt, mpd.ckpt, mrd.ckpt.
  void save(const std::filesystem::path& dir) const;

 private:
  VocoderLossReport generator_pass(const std::vector<VocoderExample>& batch, bool update);
  double discriminator_pass(const std::vector<std::vector<float>>& real,
                            const std::vector<std::vector<float>>& fake);

  VocoderConfig gen_cfg_;
  DiscriminatorConfig disc_cfg_;
  VocoderTrainConfig cfg_;
  Generator<float> gen_;
  MultiPeriodDiscriminator<float> mpd_;
  MultiResolutionDiscriminator<float> mrd_;
  MelLoss<float> mel_loss_;
  std::vector<nn::Parameter<float>*> disc_params_;
  nn::AdamW<float> opt_g_;
  nn::AdamW<float> opt_d_;
  std::uint64_t steps_ = 0;
};

void save_generator(const std::filesystem::path& path, const Generator<float>& gen, std::uint64_t step);
Generator<float> load_generator(const std::filesystem::path& path);

}  // namespace emd::voc
