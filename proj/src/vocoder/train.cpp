#include "emd/vocoder/train.hpp"

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/nn/checkpoint.hpp"
#include "emd/nn/ops.hpp"

namespace emd::voc {
namespace {

nn::AdamWConfig adam_config(const VocoderTrainConfig& c) {
  nn::AdamWConfig a;
  a.lr = c.lr;
  a.beta1 = c.beta1;
  a.beta2 = c.beta2;
  return a;
}

std::vector<nn::Parameter<float>*> join(std::vector<nn::Parameter<float>*> a,
                                        const std::vector<nn::Parameter<float>*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " is not finite at vocoder step " + std::to_string(step));
  }
}

const char* gan_loss_name(GanLoss k) { return k == GanLoss::hinge ? "hinge" : "least_squares"; }

}  // namespace

void VocoderTrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("vocoder lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("vocoder betas must lie in [0, 1)");
  }
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (lambda_fm < 0.0 || lambda_mel < 0.0 || lambda_spec < 0.0) {
    throw ConfigError("vocoder loss weights must be nonnegative");
  }
  if (batch_size == 0) throw ConfigError("vocoder batch_size must be positive");
  if (log_interval == 0) throw ConfigError("log_interval must be positive");
  if (!(crop_seconds > 0.0)) throw ConfigError("crop_seconds must be positive");
}

nlohmann::json VocoderTrainConfig::to_json() const {
  return {{"lr", lr},
          {"betas", {beta1, beta2}},
          {"grad_clip", grad_clip},
          {"lambda_fm", lambda_fm},
          {"lambda_mel", lambda_mel},
          {"lambda_spec", lambda_spec},
          {"use_discriminators", use_discriminators},
          {"gan_loss", gan_loss_name(gan_loss)},
          {"batch_size", batch_size},
          {"max_steps", max_steps},
          {"log_interval", log_interval},
          {"crop_seconds", crop_seconds},
          {"seed", seed}};
}

VocoderTrainConfig VocoderTrainConfig::from_json(const nlohmann::json& j) {
  VocoderTrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    if (j.contains("betas")) {
      c.beta1 = j.at("betas").at(0).get<double>();
      c.beta2 = j.at("betas").at(1).get<double>();
    }
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.lambda_fm = j.value("lambda_fm", c.lambda_fm);
    c.lambda_mel = j.value("lambda_mel", c.lambda_mel);
    c.lambda_spec = j.value("lambda_spec", c.lambda_spec);
    c.use_discriminators = j.value("use_discriminators", c.use_discriminators);
    const std::string kind = j.value("gan_loss", std::string("hinge"));
    if (kind == "hinge") {
      c.gan_loss = GanLoss::hinge;
    } else if (kind == "least_squares") {
      c.gan_loss = GanLoss::least_squares;
    } else {
      throw ConfigError("gan_loss must be hinge or least_squares, got " + kind);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.log_interval = j.value("log_interval", c.log_interval);
    c.crop_seconds = j.value("crop_seconds", c.crop_seconds);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vocoder training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json VocoderLossReport::to_json() const {
  return {{"step", step},
          {"adv_g", adv_g},
          {"adv_d", adv_d},
          {"feature_matching", feature_matching},
          {"mel_reconstruction", mel_reconstruction},
          {"spectral", spectral},
          {"total_g", total_g}};
}

VocoderTrainer::VocoderTrainer(const VocoderConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                               const VocoderTrainConfig& train_cfg)
    : gen_cfg_(gen_cfg),
      disc_cfg_(disc_cfg),
      cfg_(train_cfg),
      gen_(gen_cfg, train_cfg.seed),
      mpd_(disc_cfg, train_cfg.seed + 1),
      mrd_(disc_cfg, train_cfg.seed + 2),
      mel_loss_(dsp::StftConfig{}, dsp::MelConfig{}),
      disc_params_(join(mpd_.params().all(), mrd_.params().all())),
      opt_g_(gen_.params().all(), adam_config(train_cfg)),
      opt_d_(disc_params_, adam_config(train_cfg)) {
  cfg_.validate();
}

double VocoderTrainer::discriminator_pass(const std::vector<std::vector<float>>& real,
                                          const std::vector<std::vector<float>>& fake) {
  if (real.size() != fake.size() || real.empty()) {
    throw ConfigError("discriminator step needs matching, nonempty real and fake batches");
  }
  opt_d_.zero_grad();
  double total = 0.0;
  const float inv = 1.0f / static_cast<float>(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].empty() || real[i].size() != fake[i].size()) {
      throw ConfigError("discriminator step: real and fake audio lengths differ");
    }
    nn::Tape<float> tape;
    const auto r = tape.constant({real[i].size()}, real[i]);
    const auto f = tape.constant({fake[i].size()}, fake[i]);
    const auto loss = nn::scale(nn::add(discriminator_loss(mpd_.forward(tape, r), mpd_.forward(tape, f), cfg_.gan_loss),
                                        discriminator_loss(mrd_.forward(tape, r), mrd_.forward(tape, f), cfg_.gan_loss)),
                                inv);
    tape.backward(loss);
    total += loss.item();
  }
  require_finite(total, "discriminator loss", steps_);
  nn::clip_grad_norm(disc_params_, cfg_.grad_clip);
  opt_d_.step();
  return total;
}

double VocoderTrainer::discriminator_step(const std::vector<dsp::Waveform>& real,
                                          const std::vector<dsp::Waveform>& fake) {
  std::vector<std::vector<float>> r, f;
  for (const auto& w : real) r.push_back(w.samples);
  for (const auto& w : fake) f.push_back(w.samples);
  return discriminator_pass(r, f);
}

VocoderLossReport VocoderTrainer::generator_pass(const std::vector<VocoderExample>& batch, bool update) {
  if (batch.empty()) throw ConfigError("vocoder batch is empty");
  VocoderLossReport rep;
  rep.step = steps_;
  if (update) opt_g_.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    check_embeddings(gen_cfg_, ex.emb);
    if (ex.audio.empty()) throw ConfigError("vocoder example has no audio");
    nn::Tape<float> tape;
    const auto emb = tape.constant({ex.emb.frames, ex.emb.dim}, ex.emb.data);
    const auto ref = tape.constant({ex.audio.size()}, ex.audio.samples);
    const auto est = fit_length(gen_.forward(tape, emb), ex.audio.size());

    const auto mel = mel_loss_(ref, est);
    nn::Var<float> total = nn::scale(mel, static_cast<float>(cfg_.lambda_mel));
    rep.mel_reconstruction += mel.item() * inv;
    if (cfg_.lambda_spec > 0.0) {
      const auto spec = spectral_loss(ref, est, gen_cfg_.stft());
      total = nn::add(total, nn::scale(spec, static_cast<float>(cfg_.lambda_spec)));
      rep.spectral += spec.item() * inv;
    }
    if (cfg_.use_discriminators) {
      const auto real_p = mpd_.forward(tape, ref);
      const auto fake_p = mpd_.forward(tape, est);
      const auto real_r = mrd_.forward(tape, ref);
      const auto fake_r = mrd_.forward(tape, est);
      const auto adv = nn::add(generator_loss(fake_p, cfg_.gan_loss), generator_loss(fake_r, cfg_.gan_loss));
      const auto fm = nn::add(feature_matching_loss(real_p, fake_p), feature_matching_loss(real_r, fake_r));
      total = nn::add(total, nn::add(adv, nn::scale(fm, static_cast<float>(cfg_.lambda_fm))));
      rep.adv_g += adv.item() * inv;
      rep.feature_matching += fm.item() * inv;
      if (!update) {
        rep.adv_d += (discriminator_loss(real_p, fake_p, cfg_.gan_loss).item() +
                      discriminator_loss(real_r, fake_r, cfg_.gan_loss).item()) * inv;
      }
    }
    rep.total_g += total.item() * inv;
    if (update) tape.backward(nn::scale(total, static_cast<float>(inv)));
  }
  require_finite(rep.total_g, "generator loss", steps_);
  if (update) {
    nn::clip_grad_norm(gen_.params().all(), cfg_.grad_clip);
    opt_g_.step();
  }
  return rep;
}

VocoderLossReport VocoderTrainer::train_step(const std::vector<VocoderExample>& batch) {
  if (batch.empty()) throw ConfigError("vocoder batch is empty");
  double d_loss = 0.0;
  if (cfg_.use_discriminators) {
    std::vector<std::vector<float>> real, fake;
    for (const auto& ex : batch) {
      check_embeddings(gen_cfg_, ex.emb);
      nn::Tape<float> tape;
      const auto emb = tape.constant({ex.emb.frames, ex.emb.dim}, ex.emb.data);
      const auto est = fit_length(gen_.forward(tape, emb), ex.audio.size());
      real.push_back(ex.audio.samples);
      fake.emplace_back(est.value().begin(), est.value().end());
    }
    d_loss = discriminator_pass(real, fake);
  }
  VocoderLossReport rep = generator_pass(batch, true);
  rep.adv_d = d_loss;
  ++steps_;
  return rep;
}

VocoderLossReport VocoderTrainer::evaluate(const std::vector<VocoderExample>& batch) {
  return generator_pass(batch, false);
}

std::vector<VocoderLossReport> VocoderTrainer::train(
    const VocoderBatchSource& source, const std::function<void(const VocoderLossReport&)>& on_log) {
  if (!source) throw ConfigError("train_vocoder: no batch source");
  std::vector<VocoderLossReport> trace;
  for (std::uint64_t s = 0; s < cfg_.max_steps; ++s) {
    const auto batch = source(s, cfg_.batch_size);
    VocoderLossReport rep = train_step(batch);
    if (s % cfg_.log_interval == 0 || s + 1 == cfg_.max_steps) {
      trace.push_back(rep);
      if (on_log) on_log(rep);
    }
  }
  return trace;
}

void VocoderTrainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_generator(dir / "generator.ckpt", gen_, steps_);
  const nlohmann::json dcfg = disc_cfg_.to_json();
  nn::write_checkpoint(dir / "mpd.ckpt", nn::make_checkpoint(mpd_.params(), "vocos_mpd", dcfg, cfg_.seed + 1, steps_));
  nn::write_checkpoint(dir / "mrd.ckpt", nn::make_checkpoint(mrd_.params(), "vocos_mrd", dcfg, cfg_.seed + 2, steps_));
}

void save_generator(const std::filesystem::path& path, const Generator<float>& gen, std::uint64_t step) {
  nn::write_checkpoint(path, nn::make_checkpoint(gen.params(), "vocos_g", gen.config().to_json(),
                                                 gen.seed(), step));
}

Generator<float> load_generator(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  if (ckpt.arch_id != "vocos_g") {
    throw FormatError(path.string() + " holds a " + ckpt.arch_id + " checkpoint, not vocos_g");
  }
  Generator<float> gen(VocoderConfig::from_json(ckpt.config), ckpt.seed);
  nn::load_parameters(ckpt, gen.params());
  return gen;
}

}  // namespace emd::voc
