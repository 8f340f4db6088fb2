#include "emd/pipeline/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "emd/common/error.hpp"
#include "emd/data/loader.hpp"
#include "emd/data/manifest.hpp"
#include "emd/dsp/resample.hpp"

namespace emd::pipeline {
namespace {

constexpr std::uint64_t kDenoiserBatchStream = 31;
constexpr std::uint64_t kVocoderBatchStream = 32;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path fp(p);
  return (fp.is_absolute() || base.empty() ? fp : base / fp).lexically_normal();
}

enc::EncoderDescriptor descriptor_for(const PipelineConfig& cfg) {
  enc::EncoderDescriptor d = enc::EncoderRegistry::with_defaults().get(cfg.encoder_id);
  if (d.source == enc::EncoderSource::builtin_lms) {
    d.dim = cfg.lms.mel.n_mels;
    d.frame_rate_hz = cfg.lms.frame_rate_hz();
  }
  return d;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

struct PairFiles {
  std::filesystem::path noisy, clean;
};

std::vector<PairFiles> read_embedding_pairs(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open embedding pairs " + path.string());
  std::vector<PairFiles> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({resolve(path.parent_path(), j.at("noisy").get<std::string>()),
                     resolve(path.parent_path(), j.at("clean").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("embedding pairs file " + path.string() + " is empty");
  return out;
}

enc::EmbeddingSequence slice_frames(const enc::EmbeddingSequence& s, std::size_t begin, std::size_t count) {
  enc::EmbeddingSequence out = s;
  out.frames = count;
  out.data.assign(s.data.begin() + static_cast<std::ptrdiff_t>(begin * s.dim),
                  s.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * s.dim));
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  enc::EncoderRegistry::with_defaults().get(encoder_id);
  lms.stft.validate();
  lms.mel.validate();
  if (!(snr_low_db < snr_high_db)) throw ConfigError("data.snr_range_db requires low < high");
  if (!(crop_seconds > 0.0)) throw ConfigError("data.crop_seconds must be positive");
  den::parse_variant(denoiser_arch);
  denoiser.validate();
  vocoder.validate();
  discriminators.validate();
  vocoder_train.validate();
  if (workers == 0) throw ConfigError("evaluate.workers must be positive");
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json den_json = denoiser.to_json();
  den_json["arch"] = denoiser_arch;
  return {{"encoder_id", encoder_id},
          {"seed", seed},
          {"stft", {{"n_fft", lms.stft.n_fft}, {"hop", lms.stft.hop}, {"center", lms.stft.center}}},
          {"mel",
           {{"n_mels", lms.mel.n_mels},
            {"f_min_hz", lms.mel.f_min_hz},
            {"f_max_hz", lms.mel.f_max_hz},
            {"log_floor", lms.mel.log_floor}}},
          {"denoiser_checkpoint", denoiser_checkpoint.string()},
          {"vocoder_checkpoint", vocoder_checkpoint.string()},
          {"output_dir", output_dir.string()},
          {"data",
           {{"manifest", manifest.string()},
            {"embedding_pairs", embedding_pairs.string()},
            {"snr_range_db", {snr_low_db, snr_high_db}},
            {"crop_seconds", crop_seconds}}},
          {"denoiser", den_json},
          {"vocoder",
           {{"model", vocoder.to_json()},
            {"discriminators", discriminators.to_json()},
            {"train", vocoder_train.to_json()}}},
          {"evaluate", {{"enhance", evaluate_enhance}, {"workers", workers}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    c.encoder_id = j.value("encoder_id", c.encoder_id);
    c.seed = j.value("seed", c.seed);
    if (j.contains("stft")) {
      const auto& s = j.at("stft");
      c.lms.stft = dsp::StftConfig::make(s.value("n_fft", c.lms.stft.n_fft), s.value("hop", c.lms.stft.hop),
                                         s.value("center", c.lms.stft.center));
    }
    if (j.contains("mel")) {
      const auto& m = j.at("mel");
      c.lms.mel.n_mels = m.value("n_mels", c.lms.mel.n_mels);
      c.lms.mel.f_min_hz = m.value("f_min_hz", c.lms.mel.f_min_hz);
      c.lms.mel.f_max_hz = m.value("f_max_hz", c.lms.mel.f_max_hz);
      c.lms.mel.log_floor = m.value("log_floor", c.lms.mel.log_floor);
    }
    c.denoiser_checkpoint = resolve(base, j.value("denoiser_checkpoint", std::string()));
    c.vocoder_checkpoint = resolve(base, j.value("vocoder_checkpoint", std::string()));
    c.output_dir = resolve(base, j.value("output_dir", std::string()));
    if (j.contains("data")) {
      const auto& d = j.at("data");
      c.manifest = resolve(base, d.value("manifest", std::string()));
      c.embedding_pairs = resolve(base, d.value("embedding_pairs", std::string()));
      if (d.contains("snr_range_db")) {
        c.snr_low_db = d.at("snr_range_db").at(0).get<double>();
        c.snr_high_db = d.at("snr_range_db").at(1).get<double>();
      }
      c.crop_seconds = d.value("crop_seconds", c.crop_seconds);
    }
    nlohmann::json den = j.value("denoiser", nlohmann::json::object());
    c.denoiser_arch = den.value("arch", c.denoiser_arch);
    if (!den.contains("snr_range_db")) den["snr_range_db"] = {c.snr_low_db, c.snr_high_db};
    if (!den.contains("crop_seconds")) den["crop_seconds"] = c.crop_seconds;
    if (!den.contains("seed")) den["seed"] = c.seed;
    c.denoiser = den::DenoiseTrainConfig::from_json(den);
    const nlohmann::json voc = j.value("vocoder", nlohmann::json::object());
    c.vocoder = voc::VocoderConfig::from_json(voc.value("model", nlohmann::json::object()));
    c.discriminators = voc::DiscriminatorConfig::from_json(voc.value("discriminators", nlohmann::json::object()));
    nlohmann::json vt = voc.value("train", nlohmann::json::object());
    if (!vt.contains("seed")) vt["seed"] = c.seed;
    if (!vt.contains("crop_seconds")) vt["crop_seconds"] = c.crop_seconds;
    c.vocoder_train = voc::VocoderTrainConfig::from_json(vt);
    if (j.contains("evaluate")) {
      c.evaluate_enhance = j.at("evaluate").value("enhance", c.evaluate_enhance);
      c.workers = j.at("evaluate").value("workers", c.workers);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  // The vocoder always consumes the encoder's embeddings.
  const enc::EncoderDescriptor d = descriptor_for(c);
  if (d.dim != 0) c.vocoder.input_dim = d.dim;
  if (d.frame_rate_hz > 0.0f) c.vocoder.input_frame_rate_hz = d.frame_rate_hz;
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

void echo_config(const PipelineConfig& cfg, const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  write_json(dir / "effective_config.json", cfg.to_json());
}

void check_chain(const enc::EncoderDescriptor& encoder, const den::DenoiserModel<float>& denoiser,
                 const voc::VocoderConfig& vocoder) {
  if (encoder.dim != 0 && encoder.dim != denoiser.input_dim()) {
    throw ConfigError("dimension chain broken at encoder -> denoiser: encoder '" + encoder.encoder_id +
                      "' emits dim " + std::to_string(encoder.dim) + " but denoiser '" +
                      den::to_string(denoiser.arch().variant) + "' expects " +
                      std::to_string(denoiser.input_dim()));
  }
  if (denoiser.input_dim() != vocoder.input_dim) {
    throw ConfigError("dimension chain broken at denoiser -> vocoder: denoiser emits dim " +
                      std::to_string(denoiser.input_dim()) + " but the vocoder expects " +
                      std::to_string(vocoder.input_dim));
  }
  if (encoder.frame_rate_hz > 0.0f &&
      std::abs(encoder.frame_rate_hz - vocoder.input_frame_rate_hz) > 1e-4 * vocoder.input_frame_rate_hz) {
    throw ConfigError("frame-rate chain broken at encoder -> vocoder: encoder runs at " +
                      std::to_string(encoder.frame_rate_hz) + " Hz but the vocoder expects " +
                      std::to_string(vocoder.input_frame_rate_hz) + " Hz");
  }
}

Enhancer::Enhancer(const PipelineConfig& cfg)
    : Enhancer(cfg,
               cfg.denoiser_checkpoint.empty()
                   ? throw ConfigError("config has no denoiser_checkpoint")
                   : den::load_denoiser(cfg.denoiser_checkpoint),
               cfg.vocoder_checkpoint.empty() ? throw ConfigError("config has no vocoder_checkpoint")
                                              : voc::load_generator(cfg.vocoder_checkpoint)) {}

Enhancer::Enhancer(const PipelineConfig& cfg, den::DenoiserModel<float> denoiser,
                   voc::Generator<float> vocoder)
    : cfg_(cfg), encoder_(descriptor_for(cfg)), denoiser_(std::move(denoiser)), vocoder_(std::move(vocoder)) {
  check_chain();
}

void Enhancer::check_chain() const { pipeline::check_chain(encoder_, denoiser_, vocoder_.config()); }

enc::EmbeddingSequence Enhancer::encode(const dsp::Waveform& w) const {
  if (encoder_.source != enc::EncoderSource::builtin_lms) {
    throw ConfigError("encoder '" + encoder_.encoder_id +
                      "' is external; supply its embeddings as an EMB1 file");
  }
  return enc::lms_encode(dsp::to_pipeline_rate(w), cfg_.lms);
}

dsp::Waveform Enhancer::enhance_embeddings(const enc::EmbeddingSequence& emb, std::size_t length) {
  if (!emb.encoder_id.empty() && emb.encoder_id != encoder_.encoder_id) {
    throw ConfigError("embeddings come from encoder '" + emb.encoder_id + "' but the pipeline uses '" +
                      encoder_.encoder_id + "'");
  }
  dsp::Waveform out = voc::synthesize(vocoder_, den::denoise(denoiser_, emb));
  out.samples.resize(length, 0.0f);
  return out;
}

dsp::Waveform Enhancer::enhance(const dsp::Waveform& noisy) {
  const dsp::Waveform w = dsp::to_pipeline_rate(noisy);
  if (w.empty()) throw ConfigError("enhance: input is empty");
  return enhance_embeddings(encode(w), w.size());
}

DenoiserRun train_denoiser(const PipelineConfig& cfg, den::Variant variant,
                           const std::filesystem::path& out_dir,
                           const std::function<void(const den::LossPoint&)>& on_log) {
  const enc::EncoderDescriptor desc = descriptor_for(cfg);
  den::BatchSource source;
  std::vector<den::EmbeddingPair> eval_set;
  std::size_t dim = desc.dim;

  if (desc.source == enc::EncoderSource::builtin_lms) {
    if (cfg.manifest.empty()) throw ConfigError("denoiser training needs data.manifest");
    const data::Manifest m = data::read_manifest(cfg.manifest);
    data::MixConfig mix;
    mix.snr_low_db = cfg.denoiser.snr_low_db;
    mix.snr_high_db = cfg.denoiser.snr_high_db;
    mix.crop_seconds = cfg.denoiser.crop_seconds;
    auto loader = std::make_shared<data::MixingLoader>(
        data::MixingLoader::from_manifest(m, data::Split::train, mix, cfg.denoiser.seed));
    const enc::LmsConfig lms = cfg.lms;
    source = [loader, lms](std::uint64_t step, std::size_t batch) {
      std::vector<den::EmbeddingPair> out;
      for (std::size_t i = 0; i < batch; ++i) {
        const data::MixtureSample s = loader->sample(step * batch + i);
        out.push_back({enc::lms_encode(s.mixture, lms), enc::lms_encode(s.clean, lms)});
      }
      return out;
    };
    for (std::size_t c = 0; c < loader->clean_count(); ++c) {
      const data::MixtureSample s = loader->sample_clip(c, c);
      eval_set.push_back({enc::lms_encode(s.mixture, lms), enc::lms_encode(s.clean, lms)});
    }
  } else {
    if (cfg.embedding_pairs.empty()) {
      throw ConfigError("encoder '" + desc.encoder_id + "' is external; set data.embedding_pairs");
    }
    auto pairs = std::make_shared<std::vector<den::EmbeddingPair>>();
    for (const auto& f : read_embedding_pairs(cfg.embedding_pairs)) {
      den::EmbeddingPair p{enc::read_embeddings(f.noisy), enc::read_embeddings(f.clean)};
      if (p.noisy.frames != p.clean.frames || p.noisy.dim != p.clean.dim) {
        throw ConfigError("embedding pair " + f.noisy.string() + " / " + f.clean.string() + " shapes differ");
      }
      if (p.noisy.frames == 0) throw ConfigError("embedding pair " + f.noisy.string() + " has no frames");
      pairs->push_back(std::move(p));
    }
    dim = pairs->front().noisy.dim;
    for (const auto& p : *pairs) {
      if (p.noisy.dim != dim) throw ConfigError("embedding pairs mix dims " + std::to_string(dim) + " and " + std::to_string(p.noisy.dim));
    }
    eval_set = *pairs;
    const double crop_s = cfg.denoiser.crop_seconds;
    const std::uint64_t seed = cfg.denoiser.seed;
    source = [pairs, crop_s, seed](std::uint64_t step, std::size_t batch) {
      std::vector<den::EmbeddingPair> out;
      for (std::size_t i = 0; i < batch; ++i) {
        data::Rng rng = data::counter_rng(seed, kDenoiserBatchStream, step * batch + i);
        const auto& p = (*pairs)[std::uniform_int_distribution<std::size_t>(0, pairs->size() - 1)(rng)];
        const auto want = static_cast<std::size_t>(std::llround(crop_s * p.clean.frame_rate_hz));
        const std::size_t n = std::clamp<std::size_t>(want, 1, p.clean.frames);
        const std::size_t start = std::uniform_int_distribution<std::size_t>(0, p.clean.frames - n)(rng);
        out.push_back({slice_frames(p.noisy, start, n), slice_frames(p.clean, start, n)});
      }
      return out;
    };
  }

  const den::DenoiserArch arch = den::DenoiserArch::make(variant, dim);
  DenoiserRun run{den::DenoiserModel<float>(arch, cfg.denoiser.seed), {}, std::move(eval_set)};

  std::ofstream trace;
  if (!out_dir.empty()) {
    PipelineConfig echoed = cfg;
    echoed.denoiser_arch = den::to_string(variant);
    echo_config(echoed, out_dir);
    trace.open(out_dir / "loss_trace.jsonl");
    if (!trace) throw IoError("cannot write " + (out_dir / "loss_trace.jsonl").string());
  }
  run.result = den::train_denoiser(run.model, cfg.denoiser, source, run.eval_set, [&](const den::LossPoint& p) {
    if (trace.is_open()) {
      trace << nlohmann::json{{"step", p.step}, {"train_loss", p.train_loss}, {"eval_loss", p.eval_loss}}.dump()
            << '\n';
    }
    if (on_log) on_log(p);
  });
  if (!out_dir.empty()) den::save_denoiser(out_dir / "denoiser.ckpt", run.model, cfg.denoiser.max_steps);
  return run;
}

std::vector<voc::VocoderExample> load_vocoder_examples(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("vocoder training needs data.manifest");
  const enc::EncoderDescriptor desc = descriptor_for(cfg);
  const data::Manifest m = data::read_manifest(cfg.manifest);
  const auto entries = m.select(data::Role::clean, data::Split::train);
  if (entries.empty()) throw ConfigError("manifest " + cfg.manifest.string() + " has no clean training entries");
  std::vector<voc::VocoderExample> out;
  for (const auto& e : entries) {
    voc::VocoderExample ex;
    ex.audio = data::load_audio(e.path);
    if (desc.source == enc::EncoderSource::builtin_lms) {
      ex.emb = enc::lms_encode(ex.audio, cfg.lms);
    } else {
      if (e.emb.empty()) {
        throw ConfigError("clean entry " + e.path + " has no \"emb\" file for encoder '" + desc.encoder_id + "'");
      }
      ex.emb = enc::read_embeddings(e.emb);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

VocoderRun train_vocoder(const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                         const std::function<void(const voc::VocoderLossReport&)>& on_log) {
  const enc::EncoderDescriptor desc = descriptor_for(cfg);
  auto examples = std::make_shared<std::vector<voc::VocoderExample>>(load_vocoder_examples(cfg));
  voc::VocoderConfig vcfg = cfg.vocoder;
  vcfg.input_dim = examples->front().emb.dim;
  vcfg.input_frame_rate_hz = examples->front().emb.frame_rate_hz;
  for (const auto& ex : *examples) voc::check_embeddings(vcfg, ex.emb);

  const bool builtin = desc.source == enc::EncoderSource::builtin_lms;
  const enc::LmsConfig lms = cfg.lms;
  const double crop_s = cfg.vocoder_train.crop_seconds;
  const std::uint64_t seed = cfg.vocoder_train.seed;
  voc::VocoderBatchSource source = [=](std::uint64_t step, std::size_t batch) {
    std::vector<voc::VocoderExample> out;
    for (std::size_t i = 0; i < batch; ++i) {
      data::Rng rng = data::counter_rng(seed, kVocoderBatchStream, step * batch + i);
      const auto& ex = (*examples)[std::uniform_int_distribution<std::size_t>(0, examples->size() - 1)(rng)];
      if (builtin) {
        const auto len = static_cast<std::size_t>(std::llround(crop_s * ex.audio.sample_rate_hz));
        voc::VocoderExample c;
        c.audio = ex.audio.size() <= len ? ex.audio : data::random_crop(ex.audio, len, rng);
        c.emb = enc::lms_encode(c.audio, lms);
        out.push_back(std::move(c));
      } else {
        const double spf = ex.audio.sample_rate_hz / static_cast<double>(ex.emb.frame_rate_hz);
        const auto want = static_cast<std::size_t>(std::llround(crop_s * ex.emb.frame_rate_hz));
        const std::size_t n = std::clamp<std::size_t>(want, 1, ex.emb.frames);
        const std::size_t start = std::uniform_int_distribution<std::size_t>(0, ex.emb.frames - n)(rng);
        voc::VocoderExample c;
        c.emb = slice_frames(ex.emb, start, n);
        c.audio.sample_rate_hz = ex.audio.sample_rate_hz;
        const auto a0 = static_cast<std::size_t>(std::llround(start * spf));
        const auto alen = static_cast<std::size_t>(std::llround(n * spf));
        c.audio.samples.assign(alen, 0.0f);
        for (std::size_t k = 0; k < alen && a0 + k < ex.audio.size(); ++k) c.audio.samples[k] = ex.audio.samples[a0 + k];
        out.push_back(std::move(c));
      }
    }
    return out;
  };

  VocoderRun run{voc::VocoderTrainer(vcfg, cfg.discriminators, cfg.vocoder_train), {}};
  std::ofstream trace;
  if (!out_dir.empty()) {
    PipelineConfig echoed = cfg;
    echoed.vocoder = vcfg;
    echo_config(echoed, out_dir);
    trace.open(out_dir / "loss_trace.jsonl");
    if (!trace) throw IoError("cannot write " + (out_dir / "loss_trace.jsonl").string());
  }
  run.trace = run.trainer.train(source, [&](const voc::VocoderLossReport& r) {
    if (trace.is_open()) trace << r.to_json().dump() << '\n';
    if (on_log) on_log(r);
  });
  if (!out_dir.empty()) run.trainer.save(out_dir);
  return run;
}

}  // namespace emd::pipeline
