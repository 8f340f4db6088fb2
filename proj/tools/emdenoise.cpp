#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "emd/common/error.hpp"
#include "emd/data/loader.hpp"
#include "emd/data/manifest.hpp"
#include "emd/data/mixer.hpp"
#include "emd/denoiser/model.hpp"
#include "emd/dsp/wav.hpp"
#include "emd/encoders/embedding.hpp"
#include "emd/encoders/lms.hpp"
#include "emd/pipeline/evaluate.hpp"
#include "emd/pipeline/pipeline.hpp"
#include "emd/vocoder/generator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "pipeline config (JSON)");
  app->add_option("--set", a.sets, "override a config key, e.g. --set denoiser.max_steps=500")->take_all();
  app->add_option("--seed", a.seed, "override the global seed");
}

// Sets a dotted key. The value is parsed as JSON when possible, else kept
// as a string.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw emd::ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw emd::ConfigError("bad override key '" + key + "'");
    if (!node->is_object()) throw emd::ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

emd::pipeline::PipelineConfig load_config(const CommonArgs& a) {
  json j = json::object();
  fs::path base = fs::current_path();
  if (!a.config.empty()) {
    std::ifstream is(a.config);
    if (!is) throw emd::IoError("cannot open config " + a.config);
    j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw emd::ConfigError("config " + a.config + " is not valid JSON");
    base = fs::absolute(a.config).parent_path();
  }
  for (const auto& s : a.sets) apply_override(j, s);
  if (a.seed) j["seed"] = *a.seed;
  if (!a.out.empty()) j["output_dir"] = fs::absolute(a.out).string();
  return emd::pipeline::PipelineConfig::from_json(j, base);
}

fs::path require_output_dir(const emd::pipeline::PipelineConfig& cfg) {
  if (cfg.output_dir.empty()) throw emd::ConfigError("no output directory: set output_dir or pass --out");
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw emd::IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw emd::IoError("write failed for " + path.string());
}

std::string pad(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 4 ? std::string(4 - s.size(), '0') + s : s;
}

// --- mix ----------------------------------------------------------------

struct MixArgs {
  CommonArgs common;
  std::string manifest;
  std::optional<double> snr_min, snr_max;
  std::string split = "train";
  std::size_t count = 0;
  bool crop = false;
};

int run_mix(const MixArgs& a) {
  emd::pipeline::PipelineConfig cfg = load_config(a.common);
  const fs::path manifest_path = a.manifest.empty() ? cfg.manifest : fs::path(a.manifest);
  if (manifest_path.empty()) throw emd::ConfigError("mix needs --manifest or data.manifest");
  const fs::path out = require_output_dir(cfg);
  emd::data::MixConfig mix;
  mix.snr_low_db = a.snr_min.value_or(cfg.snr_low_db);
  mix.snr_high_db = a.snr_max.value_or(cfg.snr_high_db);
  mix.crop_seconds = cfg.crop_seconds;
  cfg.snr_low_db = mix.snr_low_db;
  cfg.snr_high_db = mix.snr_high_db;
  cfg.manifest = manifest_path;
  cfg.validate();

  const emd::data::Split split = a.split == "eval" ? emd::data::Split::eval : emd::data::Split::train;
  if (a.split != "train" && a.split != "eval") throw emd::ConfigError("--split must be train or eval");
  auto loader = emd::data::MixingLoader::from_manifest(emd::data::read_manifest(manifest_path), split, mix, cfg.seed);
  const std::size_t n = a.count ? a.count : loader.clean_count();

  std::ofstream pairs(out / "pairs.jsonl");
  if (!pairs) throw emd::IoError("cannot write " + (out / "pairs.jsonl").string());
  for (std::size_t i = 0; i < n; ++i) {
    const emd::data::MixtureSample s =
        a.crop ? loader.sample(i) : loader.sample_clip(i % loader.clean_count(), i);
    const std::string id = "mix_" + pad(i);
    emd::dsp::write_wav(out / (id + "_noisy.wav"), s.mixture);
    emd::dsp::write_wav(out / (id + "_clean.wav"), s.clean);
    pairs << json{{"id", id},
                  {"noisy", id + "_noisy.wav"},
                  {"clean", id + "_clean.wav"},
                  {"snr_db", s.snr_db}}
                 .dump()
          << '\n';
  }
  emd::pipeline::echo_config(cfg, out);
  std::cout << "wrote " << n << " pairs to " << (out / "pairs.jsonl").string() << '\n';
  return kExitOk;
}

// --- training -----------------------------------------------------------

int run_train_denoiser(const CommonArgs& c, const std::string& arch) {
  const emd::pipeline::PipelineConfig cfg = load_config(c);
  const auto variant = emd::den::parse_variant(arch.empty() ? cfg.denoiser_arch : arch);
  const fs::path out = require_output_dir(cfg);
  const auto run = emd::pipeline::train_denoiser(cfg, variant, out, [](const emd::den::LossPoint& p) {
    std::cout << "step " << p.step << " train_loss " << p.train_loss << " eval_loss " << p.eval_loss << std::endl;
  });
  std::cout << "final eval loss " << run.result.final_eval_loss << "; checkpoint "
            << (out / "denoiser.ckpt").string() << '\n';
  return kExitOk;
}

int run_train_vocoder(const CommonArgs& c) {
  const emd::pipeline::PipelineConfig cfg = load_config(c);
  const fs::path out = require_output_dir(cfg);
  emd::pipeline::train_vocoder(cfg, out, [](const emd::voc::VocoderLossReport& r) {
    std::cout << r.to_json().dump() << std::endl;
  });
  std::cout << "checkpoint " << (out / "generator.ckpt").string() << '\n';
  return kExitOk;
}

// --- enhance / evaluate -------------------------------------------------

struct EnhanceArgs {
  CommonArgs common;
  std::string input, input_emb, output;
};

int run_enhance(const EnhanceArgs& a) {
  const emd::pipeline::PipelineConfig cfg = load_config(a.common);
  emd::pipeline::Enhancer enhancer(cfg);
  emd::dsp::Waveform out;
  if (!a.input_emb.empty()) {
    const auto emb = emd::enc::read_embeddings(a.input_emb);
    std::size_t length = static_cast<std::size_t>(std::llround(emb.frames * emd::dsp::kPipelineSampleRate /
                                                               static_cast<double>(emb.frame_rate_hz)));
    if (!a.input.empty()) length = emd::data::load_audio(a.input).size();
    out = enhancer.enhance_embeddings(emb, length);
  } else {
    if (a.input.empty()) throw emd::ConfigError("enhance needs --input (or --input-emb)");
    out = enhancer.enhance(emd::dsp::read_wav(a.input));
  }
  const fs::path output(a.output);
  const fs::path dir = output.has_parent_path() ? output.parent_path() : fs::current_path();
  fs::create_directories(dir);
  emd::dsp::write_wav(output, out);
  emd::pipeline::echo_config(cfg, dir);
  return kExitOk;
}

struct EvaluateArgs {
  CommonArgs common;
  std::string pairs, metrics = "stoi,sisnr,lsd", report;
  std::optional<std::size_t> workers;
  bool no_enhance = false;
};

int run_evaluate(const EvaluateArgs& a) {
  emd::pipeline::PipelineConfig cfg = load_config(a.common);
  if (a.workers) cfg.workers = *a.workers;
  if (a.no_enhance) cfg.evaluate_enhance = false;
  cfg.validate();
  const auto metrics = emd::pipeline::parse_metrics(a.metrics);
  const auto pairs = emd::pipeline::read_pairs(a.pairs);
  std::optional<emd::pipeline::Enhancer> enhancer;
  if (cfg.evaluate_enhance) enhancer.emplace(cfg);
  const auto report =
      emd::pipeline::evaluate(pairs, metrics, enhancer ? &*enhancer : nullptr, cfg.lms, cfg.workers);
  const json j = report.to_json();
  const fs::path report_path(a.report);
  write_json_file(report_path, j);
  emd::pipeline::echo_config(cfg, report_path.has_parent_path() ? report_path.parent_path() : fs::current_path());
  std::cout << j.at("aggregates").dump() << '\n';
  return kExitOk;
}

// --- count-params / emb -------------------------------------------------

int run_count_params(const std::string& arch, std::size_t input_dim) {
  if (arch == "vocoder-full" || arch == "vocoder-desk") {
    const auto cfg = arch == "vocoder-full" ? emd::voc::VocoderConfig::full(input_dim ? input_dim : 768, 50.0)
                                            : emd::voc::VocoderConfig::desk(input_dim ? input_dim : 100, 62.5);
    std::cout << emd::voc::generator_param_count(cfg) << '\n';
    return kExitOk;
  }
  const auto spec = emd::den::DenoiserArch::make(emd::den::parse_variant(arch), input_dim);
  spec.validate();
  const emd::den::DenoiserModel<float> model(spec, 0);
  std::cout << model.count_params() << '\n';
  return kExitOk;
}

std::vector<std::pair<fs::path, fs::path>> file_jobs(const fs::path& in, const fs::path& out,
                                                     const std::string& in_ext, const std::string& out_ext) {
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == in_ext) {
        jobs.emplace_back(e.path(), out / e.path().filename().replace_extension(out_ext));
      }
    }
    std::sort(jobs.begin(), jobs.end());
    if (jobs.empty()) throw emd::ConfigError("no *" + in_ext + " files in " + in.string());
  } else {
    if (!fs::exists(in)) throw emd::IoError("input " + in.string() + " does not exist");
    jobs.emplace_back(in, out);
  }
  return jobs;
}

int run_emb_export(const CommonArgs& c, const std::string& in, const std::string& out) {
  const emd::pipeline::PipelineConfig cfg = load_config(c);
  if (cfg.encoder_id != emd::enc::kLmsId) {
    throw emd::ConfigError("emb export runs the built-in '" + std::string(emd::enc::kLmsId) +
                           "' encoder only; encoder '" + cfg.encoder_id + "' is external");
  }
  std::size_t n = 0;
  for (const auto& [src, dst] : file_jobs(in, out, ".wav", ".emb")) {
    emd::enc::write_embeddings(emd::enc::lms_encode(emd::data::load_audio(src), cfg.lms), dst);
    ++n;
  }
  std::cout << "exported " << n << " file(s)\n";
  return kExitOk;
}

struct ImportArgs {
  std::string in;
  std::string encoder_id;
  std::size_t dim = 0;
  std::string out;
};

// Validates EMB1 files: format, registry dims, optional expectations.
// Re-encodes them to --out when given.
int run_emb_import(const ImportArgs& a) {
  const auto registry = emd::enc::EncoderRegistry::with_defaults();
  std::vector<fs::path> files;
  if (fs::is_directory(a.in)) {
    for (const auto& e : fs::directory_iterator(a.in)) {
      if (e.is_regular_file() && e.path().extension() == ".emb") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw emd::ConfigError("no *.emb files in " + a.in);
  } else {
    files.emplace_back(a.in);
  }
  if (!a.out.empty() && fs::is_directory(a.in)) fs::create_directories(a.out);
  std::size_t errors = 0;
  int first_code = kExitOk;
  for (const auto& f : files) {
    try {
      const auto seq = emd::enc::read_embeddings(f);
      if (registry.find(seq.encoder_id)) registry.check(seq);
      if (!a.encoder_id.empty() && seq.encoder_id != a.encoder_id) {
        throw emd::ConfigError(f.string() + ": encoder_id '" + seq.encoder_id + "', expected '" + a.encoder_id + "'");
      }
      if (a.dim && seq.dim != a.dim) {
        throw emd::ConfigError(f.string() + ": dim " + std::to_string(seq.dim) + ", expected " + std::to_string(a.dim));
      }
      std::cout << json{{"file", f.string()},
                        {"encoder_id", seq.encoder_id},
                        {"dim", seq.dim},
                        {"frames", seq.frames},
                        {"frame_rate_hz", seq.frame_rate_hz}}
                       .dump()
                << '\n';
      if (!a.out.empty()) {
        emd::enc::write_embeddings(seq, fs::is_directory(a.in) ? fs::path(a.out) / f.filename() : fs::path(a.out));
      }
    } catch (const emd::ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      ++errors;
      if (first_code == kExitOk) first_code = kExitConfig;
    } catch (const emd::IoError& e) {
      std::cerr << "error: " << e.what() << '\n';
      ++errors;
      if (first_code == kExitOk) first_code = kExitIo;
    }
  }
  std::cout << files.size() - errors << " valid, " << errors << " invalid\n";
  return first_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-domain speech enhancement"};
  app.require_subcommand(1);

  MixArgs mix;
  auto* mix_cmd = app.add_subcommand("mix", "materialize (noisy, clean) WAV pairs");
  add_common(mix_cmd, mix.common);
  mix_cmd->add_option("--manifest", mix.manifest, "clean/noise manifest (JSONL)");
  mix_cmd->add_option("--out", mix.common.out, "output directory");
  mix_cmd->add_option("--snr-min", mix.snr_min, "lowest SNR in dB");
  mix_cmd->add_option("--snr-max", mix.snr_max, "highest SNR in dB");
  mix_cmd->add_option("--split", mix.split, "manifest split (train|eval)");
  mix_cmd->add_option("--count", mix.count, "number of pairs (default: one per clean clip)");
  mix_cmd->add_flag("--crop", mix.crop, "use random training crops instead of whole clips");

  CommonArgs den;
  std::string arch;
  auto* den_cmd = app.add_subcommand("train-denoiser", "train an embedding denoiser");
  add_common(den_cmd, den);
  den_cmd->add_option("--arch", arch, "vit3|vit1|blstm3|lstm3|mlp2|mlp_vit3");
  den_cmd->add_option("--out", den.out, "output directory");

  CommonArgs voc;
  auto* voc_cmd = app.add_subcommand("train-vocoder", "train the embedding vocoder");
  add_common(voc_cmd, voc);
  voc_cmd->add_option("--out", voc.out, "output directory");

  EnhanceArgs enh;
  auto* enh_cmd = app.add_subcommand("enhance", "denoise a recording");
  add_common(enh_cmd, enh.common);
  enh_cmd->add_option("--input", enh.input, "noisy WAV");
  enh_cmd->add_option("--input-emb", enh.input_emb, "EMB1 embeddings of the noisy input (external encoders)");
  enh_cmd->add_option("--output", enh.output, "enhanced WAV")->required();

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "score (noisy, clean) pairs");
  add_common(ev_cmd, ev.common);
  ev_cmd->add_option("--pairs", ev.pairs, "pairs file (JSONL)")->required();
  ev_cmd->add_option("--metrics", ev.metrics, "stoi,sisnr,lsd[,embmse][,speaker]");
  ev_cmd->add_option("--report", ev.report, "report JSON path")->required();
  ev_cmd->add_option("--workers", ev.workers, "worker threads");
  ev_cmd->add_flag("--no-enhance", ev.no_enhance, "score the noisy inputs as given");

  std::string count_arch;
  std::size_t count_dim = 0;
  auto* count_cmd = app.add_subcommand("count-params", "print the parameter count of an architecture");
  count_cmd->add_option("--arch", count_arch, "denoiser variant, vocoder-desk or vocoder-full")->required();
  count_cmd->add_option("--input-dim", count_dim, "embedding dim (default: the variant's own)");

  auto* emb_cmd = app.add_subcommand("emb", "EMB1 utilities");
  emb_cmd->require_subcommand(1);
  CommonArgs exp_common;
  std::string exp_in, exp_out;
  auto* exp_cmd = emb_cmd->add_subcommand("export", "write built-in encoder embeddings as EMB1");
  add_common(exp_cmd, exp_common);
  exp_cmd->add_option("--in", exp_in, "WAV file or directory")->required();
  exp_cmd->add_option("--out", exp_out, "EMB1 file or directory")->required();
  ImportArgs imp;
  auto* imp_cmd = emb_cmd->add_subcommand("import", "validate EMB1 files");
  imp_cmd->add_option("--in", imp.in, "EMB1 file or directory")->required();
  imp_cmd->add_option("--encoder-id", imp.encoder_id, "expected encoder id");
  imp_cmd->add_option("--dim", imp.dim, "expected dim");
  imp_cmd->add_option("--out", imp.out, "re-encode validated files here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*mix_cmd) return run_mix(mix);
    if (*den_cmd) return run_train_denoiser(den, arch);
    if (*voc_cmd) return run_train_vocoder(voc);
    if (*enh_cmd) return run_enhance(enh);
    if (*ev_cmd) return run_evaluate(ev);
    if (*count_cmd) return run_count_params(count_arch, count_dim);
    if (*exp_cmd) return run_emb_export(exp_common, exp_in, exp_out);
    if (*imp_cmd) return run_emb_import(imp);
  } catch (const emd::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const emd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const emd::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
