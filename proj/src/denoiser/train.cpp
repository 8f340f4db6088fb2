#include "emd/denoiser/train.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"
#include "emd/nn/optim.hpp"

namespace emd::den {
namespace {

void check_pair(const DenoiserModel<float>& model, const EmbeddingPair& p) {
  if (p.noisy.frames != p.clean.frames || p.noisy.dim != p.clean.dim) {
    throw ConfigError("training pair shapes differ: noisy " + std::to_string(p.noisy.frames) +
                      "x" + std::to_string(p.noisy.dim) + ", clean " +
                      std::to_string(p.clean.frames) + "x" + std::to_string(p.clean.dim));
  }
  if (p.noisy.dim != model.input_dim()) {
    throw ConfigError("embedding dim " + std::to_string(p.noisy.dim) + " does not match " +
                      to_string(model.arch().variant) + " input dim " +
                      std::to_string(model.input_dim()));
  }
}

nn::Var<float> pair_loss(DenoiserModel<float>& model, nn::Tape<float>& tape, const EmbeddingPair& p) {
  const auto x = tape.constant({p.noisy.frames, p.noisy.dim}, p.noisy.data);
  const auto y = tape.constant({p.clean.frames, p.clean.dim}, p.clean.data);
  return nn::mse(model.forward(tape, x), y);
}

}  // namespace

void DenoiseTrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("denoiser lr must be positive");
  if (batch_size == 0) throw ConfigError("denoiser batch_size must be positive");
  if (!(snr_low_db < snr_high_db)) {
    throw ConfigError("snr range requires low < high, got [" + std::to_string(snr_low_db) + ", " +
                      std::to_string(snr_high_db) + "]");
  }
  if (eval_interval == 0) throw ConfigError("eval_interval must be positive");
  if (!(crop_seconds > 0.0)) throw ConfigError("crop_seconds must be positive");
}

nlohmann::json DenoiseTrainConfig::to_json() const {
  return {{"lr", lr},
          {"weight_decay", weight_decay},
          {"batch_size", batch_size},
          {"max_steps", max_steps},
          {"seed", seed},
          {"snr_range_db", {snr_low_db, snr_high_db}},
          {"eval_interval", eval_interval},
          {"crop_seconds", crop_seconds},
          {"normalize", normalize}};
}

DenoiseTrainConfig DenoiseTrainConfig::from_json(const nlohmann::json& j) {
  DenoiseTrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("snr_range_db")) {
      const auto& r = j.at("snr_range_db");
      if (!r.is_array() || r.size() != 2) throw ConfigError("snr_range_db must be [low, high]");
      c.snr_low_db = r[0].get<double>();
      c.snr_high_db = r[1].get<double>();
    }
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.crop_seconds = j.value("crop_seconds", c.crop_seconds);
    c.normalize = j.value("normalize", c.normalize);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("denoiser training config: ") + e.what());
  }
  c.validate();
  return c;
}

double evaluate_pairs(DenoiserModel<float>& model, const std::vector<EmbeddingPair>& pairs) {
  if (pairs.empty()) throw ConfigError("evaluation set is empty");
  double acc = 0.0;
  for (const auto& p : pairs) {
    check_pair(model, p);
    acc += enc::embedding_mse(denoise(model, p.noisy), p.clean);
  }
  return acc / static_cast<double>(pairs.size());
}

Normalization fit_normalization(const std::vector<EmbeddingPair>& pairs) {
  if (pairs.empty()) throw ConfigError("cannot fit normalization on an empty set");
  const std::size_t dim = pairs.front().clean.dim;
  std::vector<double> s(dim, 0.0), s2(dim, 0.0);
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (p.clean.dim != dim) throw ConfigError("normalization: inconsistent embedding dims");
    for (std::size_t t = 0; t < p.clean.frames; ++t) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = p.clean.at(t, d);
        s[d] += v;
        s2[d] += v * v;
      }
    }
    n += p.clean.frames;
  }
  if (n == 0) throw ConfigError("normalization: no frames");
  Normalization norm;
  norm.mean.resize(dim);
  norm.stddev.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const double mu = s[d] / n;
    const double var = std::max(s2[d] / n - mu * mu, 0.0);
    norm.mean[d] = static_cast<float>(mu);
    norm.stddev[d] = static_cast<float>(std::max(std::sqrt(var), 1e-3));
  }
  return norm;
}

DenoiseTrainResult train_denoiser(DenoiserModel<float>& model, const DenoiseTrainConfig& cfg,
                                  const BatchSource& source,
                                  const std::vector<EmbeddingPair>& eval_set,
                                  const std::function<void(const LossPoint&)>& on_log) {
  cfg.validate();
  if (!source) throw ConfigError("train_denoiser: no batch source");
  if (eval_set.empty()) throw ConfigError("train_denoiser: evaluation set is empty");
  for (const auto& p : eval_set) check_pair(model, p);
  if (cfg.normalize) model.set_normalization(fit_normalization(eval_set));

  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  nn::AdamW<float> opt(model.params().all(), opt_cfg);

  DenoiseTrainResult result;
  for (std::uint64_t step = 0; step <= cfg.max_steps; ++step) {
    const bool log_now = step % cfg.eval_interval == 0 || step == cfg.max_steps;
    LossPoint point;
    point.step = step;
    if (log_now) point.eval_loss = evaluate_pairs(model, eval_set);
    if (step == cfg.max_steps) {
      // Loss on one more batch, without an update.
      const std::vector<EmbeddingPair> batch = source(step, cfg.batch_size);
      double loss = 0.0;
      for (const auto& p : batch) {
        check_pair(model, p);
        nn::Tape<float> tape;
        loss += pair_loss(model, tape, p).item();
      }
      point.train_loss = batch.empty() ? point.eval_loss : loss / static_cast<double>(batch.size());
      result.final_eval_loss = point.eval_loss;
      result.trace.push_back(point);
      if (on_log) on_log(point);
      break;
    }

    const std::vector<EmbeddingPair> batch = source(step, cfg.batch_size);
    if (batch.empty()) throw ConfigError("batch source returned no pairs at step " + std::to_string(step));
    opt.zero_grad();
    double batch_loss = 0.0;
    for (const auto& p : batch) {
      check_pair(model, p);
      nn::Tape<float> tape;
      const auto loss = nn::scale(pair_loss(model, tape, p), 1.0f / static_cast<float>(batch.size()));
      tape.backward(loss);
      batch_loss += loss.item();
    }
    if (!std::isfinite(batch_loss)) {
      throw NumericError("denoiser loss is not finite at step " + std::to_string(step));
    }
    opt.step();
    if (log_now) {
      point.train_loss = batch_loss;
      result.trace.push_back(point);
      if (on_log) on_log(point);
    }
  }
  return result;
}

}  // namespace emd::den
