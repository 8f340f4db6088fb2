#include "emd/vocoder/generator.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/nn/ops.hpp"

namespace emd::voc {
namespace {

constexpr double kMaxMagnitude = 1e2;

}  // namespace

template <typename T>
Generator<T>::Generator(const VocoderConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  nn::Rng rng(seed);
  const std::size_t k = cfg_.kernel_size, h = cfg_.hidden_dim, m = cfg_.intermediate_dim;
  embed_w_ = &params_.add("embed.weight", {k, cfg_.input_dim, h});
  nn::init_xavier_uniform(*embed_w_, k * cfg_.input_dim, k * h, rng);
  embed_b_ = &params_.add("embed.bias", {h});
  norm_g_ = &params_.add("norm.gain", {h});
  nn::init_constant(*norm_g_, T(1));
  norm_b_ = &params_.add("norm.bias", {h});
  for (std::size_t i = 0; i < cfg_.n_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    Block b;
    b.dw_w = &params_.add(p + "dwconv.weight", {k, h});
    nn::init_xavier_uniform(*b.dw_w, k, k, rng);
    b.dw_b = &params_.add(p + "dwconv.bias", {h});
    b.ln_g = &params_.add(p + "norm.gain", {h});
    nn::init_constant(*b.ln_g, T(1));
    b.ln_b = &params_.add(p + "norm.bias", {h});
    b.pw1_w = &params_.add(p + "pwconv1.weight", {h, m});
    nn::init_xavier_uniform(*b.pw1_w, h, m, rng);
    b.pw1_b = &params_.add(p + "pwconv1.bias", {m});
    b.pw2_w = &params_.add(p + "pwconv2.weight", {m, h});
    nn::init_xavier_uniform(*b.pw2_w, m, h, rng);
    b.pw2_b = &params_.add(p + "pwconv2.bias", {h});
    b.gamma = &params_.add(p + "gamma", {h});
    nn::init_constant(*b.gamma, static_cast<T>(1.0 / static_cast<double>(cfg_.n_blocks)));
    blocks_.push_back(b);
  }
  final_g_ = &params_.add("final_norm.gain", {h});
  nn::init_constant(*final_g_, T(1));
  final_b_ = &params_.add("final_norm.bias", {h});
  head_w_ = &params_.add("head.weight", {h, cfg_.head_width()});
  nn::init_xavier_uniform(*head_w_, h, cfg_.head_width(), rng);
  head_b_ = &params_.add("head.bias", {cfg_.head_width()});
}

template <typename T>
nn::Var<T> Generator<T>::spectrum(nn::Tape<T>& tape, const nn::Var<T>& emb) {
  if (emb.shape().size() != 2 || emb.dim(1) != cfg_.input_dim || emb.dim(0) == 0) {
    throw ConfigError("vocoder expects [frames, " + std::to_string(cfg_.input_dim) +
                      "] embeddings, got " + nn::to_string(emb.shape()));
  }
  const std::size_t frames = cfg_.output_frames(emb.dim(0));
  nn::Var<T> x = frames == emb.dim(0) ? emb : nn::upsample_nearest(emb, frames);
  const std::size_t pad = cfg_.kernel_size / 2;
  x = nn::conv1d(x, tape.param(*embed_w_), tape.param(*embed_b_), 1, pad);
  x = nn::layer_norm(x, tape.param(*norm_g_), tape.param(*norm_b_));
  for (const auto& b : blocks_) {
    nn::Var<T> y = nn::depthwise_conv1d(x, tape.param(*b.dw_w), tape.param(*b.dw_b), pad);
    y = nn::layer_norm(y, tape.param(*b.ln_g), tape.param(*b.ln_b));
    y = nn::gelu(nn::linear(y, tape.param(*b.pw1_w), tape.param(*b.pw1_b)));
    y = nn::linear(y, tape.param(*b.pw2_w), tape.param(*b.pw2_b));
    x = nn::add(x, nn::mul_row(y, tape.param(*b.gamma)));
  }
  x = nn::layer_norm(x, tape.param(*final_g_), tape.param(*final_b_));
  const nn::Var<T> head = nn::linear(x, tape.param(*head_w_), tape.param(*head_b_));
  const std::size_t bins = cfg_.bins();
  const nn::Var<T> mag = nn::clamp_max(nn::exp(nn::slice_cols(head, 0, bins)), static_cast<T>(kMaxMagnitude));
  const nn::Var<T> phase = nn::slice_cols(head, bins, 2 * bins);
  return nn::concat_cols(nn::mul(mag, nn::cos(phase)), nn::mul(mag, nn::sin(phase)));
}

template <typename T>
nn::Var<T> Generator<T>::forward(nn::Tape<T>& tape, const nn::Var<T>& emb) {
  const nn::Var<T> spec = spectrum(tape, emb);
  return nn::istft(spec, cfg_.n_fft, cfg_.hop, spec.dim(0) * cfg_.hop, true);
}

template class Generator<float>;
template class Generator<double>;

std::size_t generator_param_count(const VocoderConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.kernel_size, h = cfg.hidden_dim, m = cfg.intermediate_dim;
  const std::size_t block = k * h + h + 2 * h + h * m + m + m * h + h + h;
  return k * cfg.input_dim * h + h + 2 * h + cfg.n_blocks * block + 2 * h +
         h * cfg.head_width() + cfg.head_width();
}

void check_embeddings(const VocoderConfig& cfg, const enc::EmbeddingSequence& emb) {
  if (emb.frames == 0) throw ConfigError("vocoder: embedding sequence has zero frames");
  if (emb.dim != cfg.input_dim) {
    throw ConfigError("vocoder expects dim " + std::to_string(cfg.input_dim) +
                      " embeddings but got dim " + std::to_string(emb.dim));
  }
  const double rel = std::abs(emb.frame_rate_hz - cfg.input_frame_rate_hz) / cfg.input_frame_rate_hz;
  if (rel > 1e-4) {
    throw ConfigError("vocoder was built for " + std::to_string(cfg.input_frame_rate_hz) +
                      " Hz embeddings but the sequence declares " +
                      std::to_string(emb.frame_rate_hz) + " Hz");
  }
}

dsp::Waveform synthesize(Generator<float>& gen, const enc::EmbeddingSequence& emb) {
  check_embeddings(gen.config(), emb);
  enc::validate(emb);
  nn::Tape<float> tape;
  const auto x = tape.constant({emb.frames, emb.dim}, emb.data);
  const auto y = gen.forward(tape, x);
  dsp::Waveform w;
  w.sample_rate_hz = gen.config().sample_rate_hz;
  w.samples.assign(y.value().begin(), y.value().end());
  return w;
}

}  // namespace emd::voc
