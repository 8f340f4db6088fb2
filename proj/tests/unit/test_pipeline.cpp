#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "emd/common/error.hpp"
#include "emd/data/toy.hpp"
#include "emd/denoiser/model.hpp"
#include "emd/dsp/resample.hpp"
#include "emd/dsp/wav.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/pipeline/evaluate.hpp"
#include "emd/pipeline/pipeline.hpp"
#include "emd/vocoder/train.hpp"
#include "helpers.hpp"

namespace emd::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Untrained LMS-path checkpoints plus a config pointing at them.
struct Fixture {
  testing::TempDir dir{"pipeline"};
  fs::path config;

  explicit Fixture(std::size_t denoiser_dim = 100, std::size_t vocoder_dim = 100) {
    den::DenoiserModel<float> d(den::DenoiserArch::make(den::Variant::mlp2, denoiser_dim), 1);
    den::save_denoiser(dir / "den.ckpt", d, 0);
    voc::Generator<float> g(voc::VocoderConfig::desk(vocoder_dim, 62.5), 2);
    voc::save_generator(dir / "gen.ckpt", g, 0);
    config = dir / "cfg.json";
    std::ofstream(config) << json{{"encoder_id", "lms"},
                                  {"denoiser_checkpoint", "den.ckpt"},
                                  {"vocoder_checkpoint", "gen.ckpt"}}
                                 .dump();
  }
};

void write_pair_files(const fs::path& dir, std::size_t n, bool mismatched_last = false) {
  std::ofstream pairs(dir / "pairs.jsonl");
  for (std::size_t i = 0; i < n; ++i) {
    const auto clean = data::toy_speech(i, 0);
    dsp::write_wav(dir / ("c" + std::to_string(i) + ".wav"), clean);
    dsp::Waveform noisy = clean;
    if (mismatched_last && i + 1 == n) noisy.samples.resize(noisy.size() - 100);
    dsp::write_wav(dir / ("n" + std::to_string(i) + ".wav"), noisy);
    pairs << json{{"id", "p" + std::to_string(i)},
                  {"noisy", "n" + std::to_string(i) + ".wav"},
                  {"clean", "c" + std::to_string(i) + ".wav"}}
                 .dump()
          << '\n';
  }
}

TEST(PipelineConfig, DefaultsAndInheritance) {
  const auto c = PipelineConfig::from_json(json::object());
  EXPECT_EQ(c.encoder_id, "lms");
  EXPECT_EQ(c.snr_low_db, -10.0);
  EXPECT_EQ(c.snr_high_db, 25.0);
  EXPECT_EQ(c.vocoder.input_dim, 100u);
  EXPECT_EQ(c.vocoder.input_frame_rate_hz, 62.5);

  const auto d = PipelineConfig::from_json(
      {{"seed", 9}, {"data", {{"snr_range_db", {-5, 5}}, {"crop_seconds", 0.5}}}, {"denoiser", {{"lr", 1e-3}}}});
  EXPECT_EQ(d.denoiser.seed, 9u);
  EXPECT_EQ(d.denoiser.snr_low_db, -5.0);
  EXPECT_EQ(d.denoiser.snr_high_db, 5.0);
  EXPECT_EQ(d.denoiser.crop_seconds, 0.5);
  EXPECT_EQ(d.denoiser.lr, 1e-3);
  EXPECT_EQ(d.vocoder_train.seed, 9u);

  // external encoders fix the dim; their frame rate comes from the files
  const auto w = PipelineConfig::from_json(
      {{"encoder_id", "wavlm_base"}, {"vocoder", {{"model", {{"input_frame_rate_hz", 50.0}}}}}});
  EXPECT_EQ(w.vocoder.input_dim, 768u);
  EXPECT_EQ(w.vocoder.input_frame_rate_hz, 50.0);
}

TEST(PipelineConfig, ResolvesPathsAgainstConfigDir) {
  testing::TempDir dir("cfg");
  std::ofstream(dir / "c.json") << R"({"denoiser_checkpoint": "a/d.ckpt", "output_dir": "/abs/out"})";
  const auto c = PipelineConfig::load(dir / "c.json");
  EXPECT_EQ(c.denoiser_checkpoint, (dir / "a/d.ckpt").lexically_normal());
  EXPECT_EQ(c.output_dir, fs::path("/abs/out"));
  const auto back = PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(PipelineConfig, Errors) {
  EXPECT_THROW(PipelineConfig::from_json({{"encoder_id", "nope"}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"data", {{"snr_range_db", {5, -5}}}}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json({{"seed", "x"}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(json::array()), ConfigError);
  EXPECT_THROW(PipelineConfig::load("/nonexistent/cfg.json"), IoError);
}

TEST(Enhancer, ChainErrorsNameTheLink) {
  const auto cfg = PipelineConfig::from_json(json::object());
  try {
    Enhancer(cfg, den::DenoiserModel<float>(den::DenoiserArch::make(den::Variant::mlp2), 0),
             voc::Generator<float>(voc::VocoderConfig::desk(100, 62.5), 0));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder -> denoiser"), std::string::npos) << e.what();
  }
  try {
    Enhancer(cfg, den::DenoiserModel<float>(den::DenoiserArch::make(den::Variant::mlp2, 100), 0),
             voc::Generator<float>(voc::VocoderConfig::desk(768, 62.5), 0));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("denoiser -> vocoder"), std::string::npos) << e.what();
  }
  try {
    Enhancer(cfg, den::DenoiserModel<float>(den::DenoiserArch::make(den::Variant::mlp2, 100), 0),
             voc::Generator<float>(voc::VocoderConfig::desk(100, 50.0), 0));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("frame-rate"), std::string::npos) << e.what();
  }
}

TEST(Enhancer, MissingCheckpointsAreReported) {
  EXPECT_THROW(Enhancer(PipelineConfig::from_json(json::object())), ConfigError);
  EXPECT_THROW(Enhancer(PipelineConfig::from_json(
                   {{"denoiser_checkpoint", "/nonexistent/d.ckpt"}, {"vocoder_checkpoint", "/nonexistent/g.ckpt"}})),
               IoError);
}

TEST(Enhancer, OutputMatchesInputDurationAndIsDeterministic) {
  Fixture f;
  Enhancer e(PipelineConfig::load(f.config));
  for (std::size_t n : {16000u, 12345u, 700u}) {
    const auto in = testing::random_waveform(n, n, 0.2);
    const auto out = e.enhance(in);
    EXPECT_EQ(out.sample_rate_hz, 16000);
    EXPECT_EQ(out.size(), n);
    for (float v : out.samples) ASSERT_TRUE(std::isfinite(v));
    EXPECT_EQ(e.enhance(in).samples, out.samples);
  }
  const auto in48 = testing::random_waveform(48000, 3, 0.2, 48000);
  EXPECT_EQ(e.enhance(in48).size(), 16000u);
}

TEST(Enhancer, ExternalEncoderNeedsEmbeddings) {
  Fixture f(768, 768);
  std::ofstream(f.config) << json{{"encoder_id", "wavlm_base"},
                                  {"denoiser_checkpoint", "den.ckpt"},
                                  {"vocoder_checkpoint", "gen.ckpt"}}
                                 .dump();
  voc::save_generator(f.dir / "gen.ckpt", voc::Generator<float>(voc::VocoderConfig::desk(768, 50.0), 2), 0);
  Enhancer e(PipelineConfig::load(f.config));
  EXPECT_THROW(e.enhance(testing::random_waveform(16000, 1)), ConfigError);
  enc::EmbeddingSequence emb;
  emb.frames = 50;
  emb.dim = 768;
  emb.frame_rate_hz = 50.0f;
  emb.encoder_id = "wavlm_base";
  for (double v : testing::random_signal(50 * 768, 4, 1.0)) emb.data.push_back(static_cast<float>(v));
  EXPECT_EQ(e.enhance_embeddings(emb, 16000).size(), 16000u);
  emb.frame_rate_hz = 62.5f;
  EXPECT_THROW(e.enhance_embeddings(emb, 16000), ConfigError);
  emb.frame_rate_hz = 50.0f;
  emb.encoder_id = "whisper_small";
  EXPECT_THROW(e.enhance_embeddings(emb, 16000), ConfigError);
}

TEST(ParseMetrics, NamesAndErrors) {
  EXPECT_EQ(parse_metrics("stoi, sisnr,lsd").size(), 3u);
  EXPECT_EQ(parse_metrics("si_snr,si-snr").size(), 1u);
  EXPECT_TRUE(parse_metrics("embmse,speaker").count(Metric::speaker));
  EXPECT_THROW(parse_metrics("pesq"), ConfigError);
  EXPECT_THROW(parse_metrics(" , "), ConfigError);
}

TEST(Evaluate, IdenticalPairsScorePerfectly) {
  testing::TempDir dir("eval");
  write_pair_files(dir.path(), 4);
  const auto pairs = read_pairs(dir / "pairs.jsonl");
  const auto report = evaluate(pairs, parse_metrics("stoi,sisnr,lsd,embmse"), nullptr);
  ASSERT_EQ(report.pairs.size(), 4u);
  for (const auto& row : report.pairs) {
    EXPECT_NEAR(*row.stoi, 1.0, 1e-6);
    EXPECT_EQ(*row.si_snr_db, 60.0);
    EXPECT_EQ(*row.lsd_db, 0.0);
    EXPECT_EQ(*row.emb_mse, 0.0);
    EXPECT_FALSE(row.speaker_cosine);
  }
  EXPECT_EQ(report.pairs[2].id, "p2");
}

TEST(Evaluate, AggregatesAreRowMeans) {
  testing::TempDir dir("eval");
  {
    std::ofstream pairs(dir / "pairs.jsonl");
    for (std::size_t i = 0; i < 5; ++i) {
      const auto clean = data::toy_speech(i, 1);
      auto noisy = clean;
      const auto n = data::white_noise(i, 1.0);
      for (std::size_t k = 0; k < noisy.size(); ++k) noisy.samples[k] += 0.3f * static_cast<float>(i) * n.samples[k];
      dsp::write_wav(dir / ("c" + std::to_string(i) + ".wav"), clean);
      dsp::write_wav(dir / ("n" + std::to_string(i) + ".wav"), noisy);
      pairs << json{{"noisy", "n" + std::to_string(i) + ".wav"}, {"clean", "c" + std::to_string(i) + ".wav"}}.dump()
            << '\n';
    }
  }
  const auto report = evaluate(read_pairs(dir / "pairs.jsonl"), parse_metrics("stoi,sisnr,lsd"), nullptr);
  const json j = report.to_json();
  EXPECT_EQ(j.at("pairs").at(0).at("id"), "n0");
  for (const char* key : {"stoi", "si_snr_db", "lsd_db"}) {
    double acc = 0.0;
    for (const auto& row : j.at("pairs")) acc += row.at(key).get<double>();
    EXPECT_NEAR(j.at("aggregates").at(key).get<double>(), acc / 5.0, 1e-9) << key;
  }
  EXPECT_EQ(j.at("scored"), 5);
  EXPECT_EQ(j.at("skipped"), 0);
}

TEST(Evaluate, LengthMismatchIsSkippedAndCounted) {
  testing::TempDir dir("eval");
  write_pair_files(dir.path(), 3, true);
  const auto report = evaluate(read_pairs(dir / "pairs.jsonl"), parse_metrics("sisnr"), nullptr);
  EXPECT_EQ(report.pairs.size(), 2u);
  EXPECT_EQ(report.skipped, 1u);
  EXPECT_EQ(report.skipped_ids, std::vector<std::string>{"p2"});
}

TEST(Evaluate, EmptyOrMissingPairsFile) {
  testing::TempDir dir("eval");
  std::ofstream(dir / "empty.jsonl") << "\n";
  EXPECT_THROW(read_pairs(dir / "empty.jsonl"), ConfigError);
  EXPECT_THROW(read_pairs(dir / "missing.jsonl"), IoError);
  std::ofstream(dir / "bad.jsonl") << "{\"noisy\": \"a.wav\"}\n";
  EXPECT_THROW(read_pairs(dir / "bad.jsonl"), ConfigError);
}

TEST(Evaluate, WorkerCountDoesNotChangeReport) {
  Fixture f;
  write_pair_files(f.dir.path(), 5);
  const auto pairs = read_pairs(f.dir / "pairs.jsonl");
  Enhancer e1(PipelineConfig::load(f.config)), e3(PipelineConfig::load(f.config));
  const auto metrics = parse_metrics("stoi,sisnr,lsd,embmse");
  const auto a = evaluate(pairs, metrics, &e1, {}, 1).to_json();
  const auto b = evaluate(pairs, metrics, &e3, {}, 3).to_json();
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Evaluate, SpeakerCosineFromEmbeddingFiles) {
  testing::TempDir dir("eval");
  write_pair_files(dir.path(), 1);
  enc::EmbeddingSequence s;
  s.frames = 2;
  s.dim = 3;
  s.frame_rate_hz = 50.0f;
  s.encoder_id = "speaker";
  s.data = {1, 0, 0, 1, 0, 0};
  enc::write_embeddings(s, dir / "a.emb");
  s.data = {0, 1, 0, 0, 3, 0};
  enc::write_embeddings(s, dir / "b.emb");
  s.data = {2, 0, 0, 4, 0, 0};
  enc::write_embeddings(s, dir / "c.emb");
  std::ofstream(dir / "sp.jsonl") << R"({"noisy":"n0.wav","clean":"c0.wav","clean_speaker":"a.emb","processed_speaker":"b.emb"})"
                                  << "\n"
                                  << R"({"noisy":"n0.wav","clean":"c0.wav","clean_speaker":"a.emb","processed_speaker":"c.emb"})"
                                  << "\n";
  const auto report = evaluate(read_pairs(dir / "sp.jsonl"), parse_metrics("speaker"), nullptr);
  ASSERT_EQ(report.pairs.size(), 2u);
  EXPECT_NEAR(*report.pairs[0].speaker_cosine, 0.0, 1e-12);
  EXPECT_NEAR(*report.pairs[1].speaker_cosine, 1.0, 1e-12);
}

#ifdef EMD_CLI_PATH

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + EMD_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

TEST(Cli, CountParamsMatchesClosedForm) {
  testing::TempDir dir("cli");
  for (den::Variant v : den::all_variants()) {
    const auto r = cli("count-params --arch " + den::to_string(v), dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(std::stoull(r.out), den::closed_form_param_count(den::DenoiserArch::make(v))) << den::to_string(v);
  }
  const auto full = cli("count-params --arch vocoder-full", dir.path());
  EXPECT_EQ(std::stoull(full.out), voc::generator_param_count(voc::VocoderConfig::full(768, 50.0)));
  EXPECT_EQ(cli("count-params --arch vit4", dir.path()).code, 2);
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir("cli");
  EXPECT_EQ(cli("--bogus-flag", dir.path()).code, 2);
  EXPECT_EQ(cli("evaluate --pairs x.jsonl --report r.json --config /nonexistent/cfg.json", dir.path()).code, 4);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(cli("train-denoiser --config \"" + (dir / "broken.json").string() + "\"", dir.path()).code, 2);
  EXPECT_EQ(cli("evaluate --pairs \"" + (dir / "none.jsonl").string() + "\" --report \"" + (dir / "r.json").string() +
                    "\" --no-enhance",
                dir.path())
                .code,
            4);
}

TEST(Cli, EnhanceWithMismatchedCheckpointsWritesNothing) {
  Fixture f(768, 100);
  dsp::write_wav(f.dir / "in.wav", data::toy_speech(0, 0));
  const auto r = cli("enhance --config \"" + f.config.string() + "\" --input \"" + (f.dir / "in.wav").string() +
                         "\" --output \"" + (f.dir / "out/o.wav").string() + "\"",
                     f.dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("encoder -> denoiser"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(f.dir / "out"));
}

TEST(Cli, EnhanceThenEvaluateIsReproducible) {
  Fixture f;
  dsp::write_wav(f.dir / "in.wav", data::toy_speech(0, 0));
  const std::string cfg = " --config \"" + f.config.string() + "\"";
  for (const char* name : {"a.wav", "b.wav"}) {
    const auto r = cli("enhance" + cfg + " --input \"" + (f.dir / "in.wav").string() + "\" --output \"" +
                           (f.dir / "out" / name).string() + "\"",
                       f.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(f.dir / "out/a.wav"), slurp(f.dir / "out/b.wav"));
  EXPECT_TRUE(fs::exists(f.dir / "out/effective_config.json"));

  write_pair_files(f.dir.path(), 2);
  for (const char* name : {"r1.json", "r2.json"}) {
    const auto r = cli("evaluate" + cfg + " --pairs \"" + (f.dir / "pairs.jsonl").string() + "\" --report \"" +
                           (f.dir / name).string() + "\" --workers 2 --metrics stoi,sisnr,lsd,embmse",
                       f.dir.path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(f.dir / "r1.json"), slurp(f.dir / "r2.json"));
  const json rep = json::parse(slurp(f.dir / "r1.json"));
  EXPECT_EQ(rep.at("pairs").size(), 2u);
  EXPECT_TRUE(rep.at("aggregates").contains("stoi"));
}

TEST(Cli, MixMaterializesPairs) {
  testing::TempDir dir("cli");
  data::ToyCorpusOptions opt;
  opt.clean_clips = 3;
  opt.noise_clips = 1;
  const auto manifest = data::write_toy_corpus(dir / "corpus", opt);
  const auto r = cli("mix --manifest \"" + manifest.string() + "\" --out \"" + (dir / "mix").string() +
                         "\" --snr-min 0 --snr-max 5 --seed 3",
                     dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pairs = read_pairs(dir / "mix/pairs.jsonl");
  ASSERT_EQ(pairs.size(), 3u);
  std::ifstream is(dir / "mix/pairs.jsonl");
  std::string line;
  while (std::getline(is, line)) {
    const double snr = json::parse(line).at("snr_db").get<double>();
    EXPECT_GE(snr, 0.0);
    EXPECT_LE(snr, 5.0);
  }
  EXPECT_TRUE(fs::exists(pairs[0].noisy));
  const json eff = json::parse(slurp(dir / "mix/effective_config.json"));
  EXPECT_EQ(eff.at("seed"), 3);
  EXPECT_EQ(cli("mix --manifest \"" + manifest.string() + "\" --out \"" + (dir / "mix2").string() +
                    "\" --snr-min 10 --snr-max 0",
                dir.path())
                .code,
            2);
}

TEST(Cli, EmbImportValidates) {
  testing::TempDir dir("cli");
  fs::create_directories(dir / "embs");
  enc::EmbeddingSequence s;
  s.frames = 3;
  s.dim = 768;
  s.frame_rate_hz = 50.0f;
  s.encoder_id = "wavlm_base";
  s.data.assign(3 * 768, 0.25f);
  enc::write_embeddings(s, dir / "embs/good.emb");
  const auto ok = cli("emb import --in \"" + (dir / "embs").string() + "\" --encoder-id wavlm_base --dim 768 --out \"" +
                          (dir / "re").string() + "\"",
                      dir.path());
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("1 valid, 0 invalid"), std::string::npos) << ok.out;
  EXPECT_EQ(slurp(dir / "re/good.emb"), slurp(dir / "embs/good.emb"));

  const std::string bytes = slurp(dir / "embs/good.emb");
  std::ofstream(dir / "embs/trunc.emb", std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  const auto bad = cli("emb import --in \"" + (dir / "embs").string() + "\"", dir.path());
  EXPECT_EQ(bad.code, 4);
  EXPECT_NE(bad.err.find("truncated payload"), std::string::npos) << bad.err;
  EXPECT_NE(bad.out.find("1 valid, 1 invalid"), std::string::npos) << bad.out;
  EXPECT_EQ(cli("emb import --in \"" + (dir / "embs/good.emb").string() + "\" --dim 100", dir.path()).code, 2);
}

TEST(Cli, EmbExportRoundTrip) {
  testing::TempDir dir("cli");
  dsp::write_wav(dir / "a.wav", data::toy_speech(0, 0));
  ASSERT_EQ(cli("emb export --in \"" + (dir / "a.wav").string() + "\" --out \"" + (dir / "a.emb").string() + "\"",
                dir.path())
                .code,
            0);
  const auto e = enc::read_embeddings(dir / "a.emb");
  EXPECT_EQ(e.dim, 100u);
  EXPECT_EQ(e.frames, 63u);
  EXPECT_EQ(e.encoder_id, "lms");
}

TEST(Cli, NumericFailureExitsWithThree) {
  testing::TempDir dir("cli");
  data::ToyCorpusOptions opt;
  opt.clean_clips = 2;
  opt.noise_clips = 1;
  const auto manifest = data::write_toy_corpus(dir / "corpus", opt);
  const auto r = cli("train-denoiser --arch mlp2 --out \"" + (dir / "run").string() + "\" --set data.manifest=\"" +
                         manifest.string() + "\" --set denoiser.lr=1e30 --set denoiser.max_steps=20" +
                         " --set denoiser.batch_size=2 --set denoiser.eval_interval=1",
                     dir.path());
  EXPECT_EQ(r.code, 3) << r.out << r.err;
}

#endif

}  // namespace
}  // namespace emd::pipeline
