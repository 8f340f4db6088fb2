#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "emd/denoiser/model.hpp"
#include "emd/denoiser/train.hpp"
#include "emd/dsp/waveform.hpp"
#include "emd/encoders/lms.hpp"
#include "emd/vocoder/generator.hpp"
#include "emd/vocoder/train.hpp"

namespace emd::pipeline {

// One JSON document drives every subcommand. Relative paths are resolved
// against the directory of the config file.
struct PipelineConfig {
  std::string encoder_id = enc::kLmsId;
  std::uint64_t seed = 0;
  enc::LmsConfig lms;
  std::filesystem::path denoiser_checkpoint;
  std::filesystem::path vocoder_checkpoint;
  std::filesystem::path output_dir;
  std::filesystem::path manifest;         // clean/noise audio
  std::filesystem::path embedding_pairs;  // {noisy, clean} EMB1 pairs for external encoders
  double snr_low_db = -10.0;
  double snr_high_db = 25.0;
  double crop_seconds = 1.0;
  std::string denoiser_arch = "mlp2";
  den::DenoiseTrainConfig denoiser;
  voc::VocoderConfig vocoder;
  voc::DiscriminatorConfig discriminators;
  voc::VocoderTrainConfig vocoder_train;
  bool evaluate_enhance = true;
  std::size_t workers = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
};

// Writes <dir>/effective_config.json.
void echo_config(const PipelineConfig& cfg, const std::filesystem::path& dir);

// Loaded encoder -> denoiser -> vocoder chain.
class Enhancer {
 public:
  // Loads both checkpoints and checks that the dimensions chain. Throws
  // ConfigError naming the broken link.
  explicit Enhancer(const PipelineConfig& cfg);
  Enhancer(const PipelineConfig& cfg, den::DenoiserModel<float> denoiser, voc::Generator<float> vocoder);

  const enc::EncoderDescriptor& encoder() const { return encoder_; }
  den::DenoiserModel<float>& denoiser() { return denoiser_; }
  voc::Generator<float>& vocoder() { return vocoder_; }

  // Built-in encoder path: resample to 16 kHz, encode, denoise, synthesize,
  // then crop or pad to the input duration.
  dsp::Waveform enhance(const dsp::Waveform& noisy);
  // External encoder path: embeddings supplied by the caller.
  dsp::Waveform enhance_embeddings(const enc::EmbeddingSequence& emb, std::size_t length);
  enc::EmbeddingSequence encode(const dsp::Waveform& w) const;

 private:
  void check_chain() const;

  PipelineConfig cfg_;
  enc::EncoderDescriptor encoder_;
  den::DenoiserModel<float> denoiser_;
  voc::Generator<float> vocoder_;
};

// Dimension chain check shared by Enhancer and the CLI.
void check_chain(const enc::EncoderDescriptor& encoder, const den::DenoiserModel<float>& denoiser,
                 const voc::VocoderConfig& vocoder);

struct DenoiserRun {
  den::DenoiserModel<float> model;
  den::DenoiseTrainResult result;
  std::vector<den::EmbeddingPair> eval_set;
};

// Trains a denoiser from the manifest (built-in encoder) or from embedding
// pairs (external encoders). When out_dir is nonempty the checkpoint,
// loss trace and effective config are written there.
DenoiserRun train_denoiser(const PipelineConfig& cfg, den::Variant variant,
                           const std::filesystem::path& out_dir = {},
                           const std::function<void(const den::LossPoint&)>& on_log = {});

struct VocoderRun {
  voc::VocoderTrainer trainer;
  std::vector<voc::VocoderLossReport> trace;
};

VocoderRun train_vocoder(const PipelineConfig& cfg, const std::filesystem::path& out_dir = {},
                         const std::function<void(const voc::VocoderLossReport&)>& on_log = {});

// Loads the clean entries of the manifest with their embeddings.
std::vector<voc::VocoderExample> load_vocoder_examples(const PipelineConfig& cfg);

}  // namespace emd::pipeline
