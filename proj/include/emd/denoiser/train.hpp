#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "emd/denoiser/model.hpp"
#include "emd/encoders/embedding.hpp"

namespace emd::den {

struct DenoiseTrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;
  std::size_t max_steps = 2000;
  std::uint64_t seed = 0;
  double snr_low_db = -10.0;
  double snr_high_db = 25.0;
  std::size_t eval_interval = 100;
  double crop_seconds = 1.0;
  // Fit per-dimension statistics on the clean side of the evaluation set.
  bool normalize = false;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static DenoiseTrainConfig from_json(const nlohmann::json& j);
};

struct EmbeddingPair {
  enc::EmbeddingSequence noisy;
  enc::EmbeddingSequence clean;
};

// Produces the training batch for a step.
using BatchSource = std::function<std::vector<EmbeddingPair>(std::uint64_t step, std::size_t batch_size)>;

struct LossPoint {
  std::uint64_t step = 0;
  double train_loss = 0.0;  // mean over the batch of the step
  double eval_loss = 0.0;   // mean over the evaluation set, before the step's update
};

struct DenoiseTrainResult {
  std::vector<LossPoint> trace;
  double final_eval_loss = 0.0;
};

// Mean squared error between denoised and clean embeddings, averaged over
// pairs.
double evaluate_pairs(DenoiserModel<float>& model, const std::vector<EmbeddingPair>& pairs);

// Per-dimension mean and standard deviation over the clean sequences.
Normalization fit_normalization(const std::vector<EmbeddingPair>& pairs);

// Minimizes the mean over frames and dims of (denoise(noisy) - clean)^2.
// Embeddings enter the tape as constants so no encoder state is ever
// differentiated. The evaluation set is scored at step 0, every
// eval_interval steps and after the last step.
DenoiseTrainResult train_denoiser(DenoiserModel<float>& model, const DenoiseTrainConfig& cfg,
                                  const BatchSource& source,
                                  const std::vector<EmbeddingPair>& eval_set,
                                  const std::function<void(const LossPoint&)>& on_log = {});

}  // namespace emd::den
