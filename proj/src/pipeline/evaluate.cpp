#include "emd/pipeline/evaluate.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "emd/common/error.hpp"
#include "emd/common/log.hpp"
#include "emd/data/loader.hpp"
#include "emd/metrics/metrics.hpp"

namespace emd::pipeline {
namespace {

std::vector<float> mean_pool(const enc::EmbeddingSequence& s) {
  if (s.frames == 0) throw ConfigError("speaker embedding has no frames");
  std::vector<float> out(s.dim, 0.0f);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t d = 0; d < s.dim; ++d) out[d] += s.at(t, d);
  }
  for (float& v : out) v /= static_cast<float>(s.frames);
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path fp(p);
  return (fp.is_absolute() ? fp : base / fp).lexically_normal();
}

void put(nlohmann::json& row, const char* key, const std::optional<double>& v) {
  if (v) row[key] = *v;
}

}  // namespace

std::set<Metric> parse_metrics(const std::string& list) {
  std::set<Metric> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    if (tok.empty()) continue;
    if (tok == "stoi") {
      out.insert(Metric::stoi);
    } else if (tok == "sisnr" || tok == "si_snr" || tok == "si-snr") {
      out.insert(Metric::si_snr);
    } else if (tok == "lsd") {
      out.insert(Metric::lsd);
    } else if (tok == "embmse" || tok == "emb_mse") {
      out.insert(Metric::emb_mse);
    } else if (tok == "speaker") {
      out.insert(Metric::speaker);
    } else {
      throw ConfigError("unknown metric '" + tok + "' (known: stoi, sisnr, lsd, embmse, speaker)");
    }
  }
  if (out.empty()) throw ConfigError("no metrics requested");
  return out;
}

std::vector<EvalPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open pairs file " + path.string());
  std::vector<EvalPair> out;
  std::string line;
  std::size_t line_no = 0;
  const auto base = path.parent_path();
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalPair p;
      p.noisy = resolve(base, j.at("noisy").get<std::string>());
      p.clean = resolve(base, j.at("clean").get<std::string>());
      p.id = j.value("id", p.noisy.stem().string());
      p.clean_speaker = resolve(base, j.value("clean_speaker", std::string()));
      p.processed_speaker = resolve(base, j.value("processed_speaker", std::string()));
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("pairs file " + path.string() + " is empty");
  return out;
}

std::optional<double> MetricReport::mean(std::optional<double> PairScores::*field) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (const auto& v = p.*field) {
      acc += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : pairs) {
    nlohmann::json r{{"id", p.id}};
    put(r, "stoi", p.stoi);
    put(r, "si_snr_db", p.si_snr_db);
    put(r, "lsd_db", p.lsd_db);
    put(r, "emb_mse", p.emb_mse);
    put(r, "speaker_cosine", p.speaker_cosine);
    rows.push_back(std::move(r));
  }
  nlohmann::json means = nlohmann::json::object();
  put(means, "stoi", mean(&PairScores::stoi));
  put(means, "si_snr_db", mean(&PairScores::si_snr_db));
  put(means, "lsd_db", mean(&PairScores::lsd_db));
  put(means, "emb_mse", mean(&PairScores::emb_mse));
  put(means, "speaker_cosine", mean(&PairScores::speaker_cosine));
  return {{"pairs", rows},
          {"aggregates", means},
          {"scored", pairs.size()},
          {"skipped", skipped},
          {"skipped_ids", skipped_ids}};
}

PairScores score_pair(const std::string& id, const dsp::Waveform& clean, const dsp::Waveform& processed,
                      const std::set<Metric>& metrics, const enc::LmsConfig& lms) {
  if (clean.size() != processed.size()) {
    throw ConfigError("pair '" + id + "': clean has " + std::to_string(clean.size()) +
                      " samples, processed has " + std::to_string(processed.size()));
  }
  PairScores s;
  s.id = id;
  if (metrics.count(Metric::stoi)) s.stoi = metrics::stoi(clean, processed);
  if (metrics.count(Metric::si_snr)) s.si_snr_db = metrics::si_snr(clean, processed);
  if (metrics.count(Metric::lsd)) s.lsd_db = metrics::lsd(clean, processed);
  if (metrics.count(Metric::emb_mse)) {
    s.emb_mse = enc::embedding_mse(enc::lms_encode(clean, lms), enc::lms_encode(processed, lms));
  }
  return s;
}

MetricReport evaluate(const std::vector<EvalPair>& pairs, const std::set<Metric>& metrics, Enhancer* enhancer,
                      const enc::LmsConfig& lms, std::size_t workers) {
  if (workers == 0) throw ConfigError("workers must be positive");
  std::vector<std::optional<PairScores>> rows(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        const EvalPair& p = pairs[i];
        const dsp::Waveform clean = data::load_audio(p.clean);
        const dsp::Waveform noisy = data::load_audio(p.noisy);
        if (clean.size() != noisy.size()) {
          warn("skipping pair '" + p.id + "': clean has " + std::to_string(clean.size()) +
               " samples but noisy has " + std::to_string(noisy.size()));
          continue;
        }
        const dsp::Waveform processed = enhancer ? enhancer->enhance(noisy) : noisy;
        PairScores s = score_pair(p.id, clean, processed, metrics, lms);
        if (metrics.count(Metric::speaker)) {
          if (!p.clean_speaker.empty() && !p.processed_speaker.empty()) {
            const auto a = enc::read_embeddings(p.clean_speaker);
            const auto b = enc::read_embeddings(p.processed_speaker);
            if (a.dim != b.dim) {
              throw ConfigError("pair '" + p.id + "': speaker embeddings have dims " + std::to_string(a.dim) +
                                " and " + std::to_string(b.dim));
            }
            s.speaker_cosine = metrics::cosine_similarity(mean_pool(a), mean_pool(b));
          } else {
            warn("pair '" + p.id + "' has no speaker embeddings; speaker score omitted");
          }
        }
        rows[i] = std::move(s);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(pairs.size(), 1));
  if (n_threads <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MetricReport report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (rows[i]) {
      report.pairs.push_back(std::move(*rows[i]));
    } else {
      ++report.skipped;
      report.skipped_ids.push_back(pairs[i].id);
    }
  }
  return report;
}

}  // namespace emd::pipeline
