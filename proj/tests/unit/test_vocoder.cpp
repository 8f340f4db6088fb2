#include <gtest/gtest.h>

#include <cmath>

#include "emd/common/error.hpp"
#include "emd/data/toy.hpp"
#include "emd/encoders/lms.hpp"
#include "emd/nn/gradcheck.hpp"
#include "emd/nn/ops.hpp"
#include "emd/vocoder/discriminators.hpp"
#include "emd/vocoder/generator.hpp"
#include "emd/vocoder/losses.hpp"
#include "emd/vocoder/train.hpp"
#include "helpers.hpp"

namespace emd::voc {
namespace {

constexpr std::size_t kWave = 2048;

nn::Parameter<double> wave_param(const std::string& name, std::uint64_t seed) {
  nn::Parameter<double> p(name, {kWave});
  p.value = testing::random_signal(kWave, seed, 0.3);
  return p;
}

enc::EmbeddingSequence lms_of(const dsp::Waveform& w) { return enc::lms_encode(w); }

std::string describe(const nn::GradCheckResult& r) {
  return r.worst_parameter + "[" + std::to_string(r.worst_index) + "] analytic " + std::to_string(r.analytic) +
         " numeric " + std::to_string(r.numeric);
}

TEST(VocoderConfig, HeadWidthAndFrames) {
  const auto c = VocoderConfig::desk(100, 62.5);
  EXPECT_EQ(c.head_width(), c.n_fft + 2);
  EXPECT_EQ(c.head_width(), 2 * c.bins());
  EXPECT_EQ(c.output_frames(63), 63u);
  const auto w = VocoderConfig::desk(768, 50.0);
  // 50 Hz embeddings drive 62.5 Hz STFT frames
  EXPECT_EQ(w.output_frames(50), 63u);
  EXPECT_EQ(VocoderConfig::from_json(w.to_json()).to_json(), w.to_json());
  auto bad = c;
  bad.hop = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Generator, ParamCountsMatchClosedForm) {
  const auto desk = VocoderConfig::desk(100, 62.5);
  EXPECT_EQ(Generator<float>(desk, 0).count_params(), generator_param_count(desk));
  const auto full = VocoderConfig::full(768, 50.0);
  const std::size_t n = generator_param_count(full);
  EXPECT_EQ(Generator<float>(full, 0).count_params(), n);
  EXPECT_GE(static_cast<double>(n), 0.8 * 19.4e6);
  EXPECT_LE(static_cast<double>(n), 1.2 * 19.4e6);
}

TEST(Generator, OutputLengthIsHopTimesFrames) {
  Generator<float> g(VocoderConfig::desk(100, 62.5), 1);
  for (std::size_t frames : {1u, 5u, 63u, 200u}) {
    enc::EmbeddingSequence e;
    e.frames = frames;
    e.dim = 100;
    e.frame_rate_hz = 62.5f;
    e.encoder_id = "lms";
    for (double v : testing::random_signal(frames * 100, frames, 2.0)) e.data.push_back(static_cast<float>(v) - 5.0f);
    const auto w = synthesize(g, e);
    EXPECT_EQ(w.size(), g.config().output_frames(frames) * 256);
    EXPECT_EQ(w.sample_rate_hz, 16000);
    for (float v : w.samples) ASSERT_TRUE(std::isfinite(v));
    if (frames == 63) {
      EXPECT_EQ(synthesize(g, e).samples, w.samples);
    }
  }
}

TEST(Generator, RejectsMismatchedEmbeddings) {
  const auto cfg = VocoderConfig::desk(100, 62.5);
  enc::EmbeddingSequence e;
  e.frames = 2;
  e.dim = 768;
  e.frame_rate_hz = 62.5f;
  e.data.assign(2 * 768, 0.0f);
  EXPECT_THROW(check_embeddings(cfg, e), ConfigError);
  e.dim = 100;
  e.frame_rate_hz = 50.0f;
  e.data.assign(200, 0.0f);
  EXPECT_THROW(check_embeddings(cfg, e), ConfigError);
}

TEST(Discriminators, OneOutputPerSubDiscriminator) {
  const auto cfg = DiscriminatorConfig::desk();
  MultiPeriodDiscriminator<float> mpd(cfg, 0);
  MultiResolutionDiscriminator<float> mrd(cfg, 0);
  std::vector<float> w(kWave);
  for (std::size_t i = 0; i < kWave; ++i) w[i] = 0.3f * std::sin(0.05f * static_cast<float>(i));
  nn::Tape<float> tape;
  const auto x = tape.constant({kWave}, w);
  const auto a = mpd.forward(tape, x), b = mpd.forward(tape, x);
  EXPECT_EQ(a.logits.size(), 5u);
  ASSERT_EQ(a.features.size(), 5u);
  for (std::size_t i = 0; i < a.logits.size(); ++i) {
    EXPECT_FALSE(a.features[i].empty());
    const auto la = a.logits[i].value(), lb = b.logits[i].value();
    EXPECT_TRUE(std::equal(la.begin(), la.end(), lb.begin(), lb.end()));
  }
  const auto r = mrd.forward(tape, x);
  EXPECT_EQ(r.logits.size(), 3u);
  for (const auto& f : r.features) EXPECT_FALSE(f.empty());
  EXPECT_THROW(mpd.forward(tape, tape.constant({0}, {})), ConfigError);
}

TEST(GanLosses, HingeDefinitions) {
  nn::Tape<double> tape;
  DiscriminatorOutput<double> real, fake;
  real.logits.push_back(tape.constant({3}, {5.0, 7.0, 2.0}));
  fake.logits.push_back(tape.constant({3}, {-4.0, -3.0, -9.0}));
  real.features.push_back({tape.constant({2}, {1.0, 2.0})});
  fake.features.push_back({tape.constant({2}, {1.0, 2.0})});
  EXPECT_EQ(discriminator_loss(real, fake).item(), 0.0);
  EXPECT_EQ(feature_matching_loss(real, fake).item(), 0.0);
  DiscriminatorOutput<double> zero;
  zero.logits.push_back(tape.constant({4}, std::vector<double>(4, 0.0)));
  EXPECT_EQ(generator_loss(zero).item(), 0.0);
  // one unit inside each margin
  DiscriminatorOutput<double> r2, f2;
  r2.logits.push_back(tape.constant({1}, {0.0}));
  f2.logits.push_back(tape.constant({1}, {0.0}));
  EXPECT_DOUBLE_EQ(discriminator_loss(r2, f2).item(), 2.0);
  EXPECT_DOUBLE_EQ(generator_loss(fake).item(), 16.0 / 3.0);
  fake.features.push_back({tape.constant({2}, {0.0, 0.0})});
  EXPECT_THROW(feature_matching_loss(real, fake), ConfigError);
}

TEST(MelReconstruction, Properties) {
  const auto a = data::toy_speech(0, 0), b = data::toy_speech(1, 0);
  dsp::Waveform silence = a;
  std::fill(silence.samples.begin(), silence.samples.end(), 0.0f);
  EXPECT_EQ(mel_reconstruction_loss(a, a), 0.0);
  EXPECT_GT(mel_reconstruction_loss(a, silence), 0.0);
  EXPECT_DOUBLE_EQ(mel_reconstruction_loss(a, b), mel_reconstruction_loss(b, a));
}

TEST(LossGrad, MelLoss) {
  auto ref = wave_param("ref", 1);
  auto est = wave_param("est", 2);
  const MelLoss<double> loss(dsp::StftConfig::make(512, 128), dsp::MelConfig{});
  const auto r = nn::grad_check(
      [&](nn::Tape<double>& t) { return loss(t.constant({kWave}, ref.value), t.param(est)); }, {&est}, 1e-6, 40);
  EXPECT_LT(r.max_rel_error, 1e-3) << describe(r);
}

TEST(LossGrad, SpectralLoss) {
  auto ref = wave_param("ref", 3);
  auto est = wave_param("est", 4);
  const auto r = nn::grad_check(
      [&](nn::Tape<double>& t) {
        return spectral_loss(t.constant({kWave}, ref.value), t.param(est), dsp::StftConfig::make(512, 128));
      },
      {&est}, 1e-6, 40);
  EXPECT_LT(r.max_rel_error, 1e-3) << describe(r);
}

TEST(LossGrad, MseOnWaveform) {
  auto ref = wave_param("ref", 5);
  auto est = wave_param("est", 6);
  const auto r = nn::grad_check(
      [&](nn::Tape<double>& t) { return nn::mse(t.param(est), t.constant({kWave}, ref.value)); }, {&est});
  EXPECT_LT(r.max_rel_error, 1e-4) << describe(r);
}

void expect_kink_free(const nn::GradCheckResult& r, const char* what) {
  EXPECT_LT(r.max_rel_error, 1e-3) << what << " " << describe(r);
  // most sampled coordinates must be scored, not skipped
  EXPECT_GE(r.coordinates, 3 * r.skipped) << what << ": " << r.skipped << " skipped, " << r.coordinates << " scored";
}

template <typename Disc>
void check_gan_grads(std::uint64_t seed) {
  Disc d(DiscriminatorConfig::desk(), seed);
  auto real = wave_param("real", seed + 10);
  auto fake = wave_param("fake", seed + 20);
  std::vector<nn::Parameter<double>*> disc_params = d.params().all();
  std::vector<nn::Parameter<double>*> all = disc_params;
  all.push_back(&fake);

  expect_kink_free(nn::grad_check_away_from_kinks(
                       [&](nn::Tape<double>& t) {
                         return discriminator_loss(d.forward(t, t.param(real)), d.forward(t, t.param(fake)));
                       },
                       disc_params, 1e-6, 4, seed),
                   "d_loss");
  expect_kink_free(nn::grad_check_away_from_kinks(
                       [&](nn::Tape<double>& t) { return generator_loss(d.forward(t, t.param(fake))); }, all,
                       1e-6, 4, seed),
                   "g_loss");
  expect_kink_free(nn::grad_check_away_from_kinks(
                       [&](nn::Tape<double>& t) {
                         return feature_matching_loss(d.forward(t, t.constant({kWave}, real.value)),
                                                      d.forward(t, t.param(fake)));
                       },
                       all, 1e-6, 4, seed),
                   "feature matching");
}

TEST(LossGrad, MultiPeriodGanLosses) { check_gan_grads<MultiPeriodDiscriminator<double>>(1); }
TEST(LossGrad, MultiResolutionGanLosses) { check_gan_grads<MultiResolutionDiscriminator<double>>(2); }

TEST(LossGrad, GeneratorEndToEnd) {
  VocoderConfig cfg = VocoderConfig::desk(100, 250.0);
  cfg.hidden_dim = 16;
  cfg.intermediate_dim = 32;
  cfg.n_blocks = 1;
  cfg.n_fft = 256;
  cfg.hop = 64;
  Generator<double> g(cfg, 3);
  const auto emb = testing::random_signal(4 * 100, 7, 1.0);
  const auto target = testing::random_signal(4 * 64, 8, 0.1);
  const auto r = nn::grad_check(
      [&](nn::Tape<double>& t) {
        const auto w = g.forward(t, t.constant({4, 100}, emb));
        return nn::mse(w, t.constant({4 * 64}, target));
      },
      g.params().all(), 1e-5, 3);
  EXPECT_LT(r.max_rel_error, 1e-4) << describe(r);
}

TEST(VocoderTrainConfig, DefaultsAndValidation) {
  VocoderTrainConfig c;
  EXPECT_EQ(c.lambda_fm, 2.0);
  EXPECT_EQ(c.lambda_mel, 45.0);
  EXPECT_EQ(c.lr, 2e-4);
  EXPECT_EQ(c.beta1, 0.8);
  EXPECT_EQ(c.beta2, 0.99);
  EXPECT_EQ(c.gan_loss, GanLoss::hinge);
  EXPECT_EQ(VocoderTrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(VocoderTrainConfig::from_json({{"lr", -1.0}}), ConfigError);
}

VocoderExample toy_example(std::size_t clip) {
  const auto clean = data::toy_speech(clip, 0);
  return {lms_of(clean), clean};
}

TEST(VocoderTrainer, RegressionOnlyLossDrops) {
  // short run of the single-clip overfit: discriminators off, lambda_fm 0
  VocoderTrainConfig tc;
  tc.use_discriminators = false;
  tc.lambda_fm = 0.0;
  tc.lambda_mel = 1.0;
  tc.lambda_spec = 0.2;
  tc.lr = 1e-3;
  tc.max_steps = 150;
  tc.log_interval = 50;
  VocoderTrainer trainer(VocoderConfig::desk(100, 62.5), DiscriminatorConfig::desk(), tc);
  const std::vector<VocoderExample> batch{toy_example(0)};
  const double initial = trainer.evaluate(batch).mel_reconstruction;
  trainer.train([&](std::uint64_t, std::size_t) { return batch; });
  const double after = trainer.evaluate(batch).mel_reconstruction;
  EXPECT_LT(after, 0.6 * initial) << initial << " -> " << after;
  EXPECT_EQ(trainer.steps(), 150u);
}

TEST(VocoderTrainer, DiscriminatorLearnsAgainstFrozenNoise) {
  VocoderTrainer trainer(VocoderConfig::desk(100, 62.5), DiscriminatorConfig::desk(), VocoderTrainConfig{});
  const auto gen_before = trainer.generator().params().all().front()->value;
  std::vector<dsp::Waveform> real{data::toy_speech(0, 0)}, fake{data::white_noise(5, 1.0)};
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(trainer.discriminator_step(real, fake));
  for (double l : losses) ASSERT_TRUE(std::isfinite(l));
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_EQ(trainer.generator().params().all().front()->value, gen_before);
}

TEST(VocoderTrainer, AdversarialStepsStayFinite) {
  VocoderTrainConfig tc;
  tc.max_steps = 6;
  tc.log_interval = 1;
  tc.crop_seconds = 0.5;
  VocoderTrainer trainer(VocoderConfig::desk(100, 62.5), DiscriminatorConfig::desk(), tc);
  const auto ex = toy_example(1);
  const auto trace = trainer.train([&](std::uint64_t, std::size_t) { return std::vector<VocoderExample>{ex}; });
  ASSERT_FALSE(trace.empty());
  for (const auto& r : trace) {
    for (double v : {r.adv_g, r.adv_d, r.feature_matching, r.mel_reconstruction, r.total_g}) {
      EXPECT_TRUE(std::isfinite(v));
    }
    EXPECT_GE(r.mel_reconstruction, 0.0);
    EXPECT_GE(r.feature_matching, 0.0);
  }
}

TEST(VocoderTrainer, SeededRunsAreBitIdentical) {
  VocoderTrainConfig tc;
  tc.max_steps = 3;
  tc.log_interval = 1;
  const auto ex = toy_example(2);
  auto run = [&] {
    VocoderTrainer t(VocoderConfig::desk(100, 62.5), DiscriminatorConfig::desk(), tc);
    return t.train([&](std::uint64_t, std::size_t) { return std::vector<VocoderExample>{ex}; });
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].to_json(), b[i].to_json());
}

TEST(VocoderCheckpoint, SaveLoadKeepsSynthesis) {
  testing::TempDir dir("voc");
  Generator<float> g(VocoderConfig::desk(100, 62.5), 4);
  save_generator(dir / "g.ckpt", g, 0);
  auto r = load_generator(dir / "g.ckpt");
  const auto e = lms_of(data::toy_speech(3, 0));
  EXPECT_EQ(synthesize(r, e).samples, synthesize(g, e).samples);

  VocoderTrainConfig tc;
  tc.max_steps = 1;
  VocoderTrainer t(VocoderConfig::desk(100, 62.5), DiscriminatorConfig::desk(), tc);
  t.save(dir / "trainer");
  for (const char* f : {"generator.ckpt", "mpd.ckpt", "mrd.ckpt"}) EXPECT_TRUE(std::filesystem::exists(dir / "trainer" / f));
}

}  // namespace
}  // namespace emd::voc
