#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "emd/pipeline/pipeline.hpp"

namespace emd::pipeline {

enum class Metric { stoi, si_snr, lsd, emb_mse, speaker };

// Parses "stoi,sisnr,lsd[,embmse][,speaker]".
std::set<Metric> parse_metrics(const std::string& list);

// One line of a pairs file: {"id", "noisy", "clean", optional
// "clean_speaker" / "processed_speaker" EMB1 paths}.
struct EvalPair {
  std::string id;
  std::filesystem::path noisy;
  std::filesystem::path clean;
  std::filesystem::path clean_speaker;
  std::filesystem::path processed_speaker;
};

std::vector<EvalPair> read_pairs(const std::filesystem::path& path);

struct PairScores {
  std::string id;
  std::optional<double> stoi, si_snr_db, lsd_db, emb_mse, speaker_cosine;
};

struct MetricReport {
  std::vector<PairScores> pairs;
  std::size_t skipped = 0;
  std::vector<std::string> skipped_ids;

  // Mean of each metric over the rows that have it.
  std::optional<double> mean(std::optional<double> PairScores::*field) const;
  nlohmann::json to_json() const;
};

// Scores processed audio against clean audio. The processed signal is the
// enhanced noisy input when `enhancer` is given, else the noisy input itself.
// Length-mismatched pairs are skipped with a warning. Rows keep the input
// order regardless of the worker count.
MetricReport evaluate(const std::vector<EvalPair>& pairs, const std::set<Metric>& metrics,
                      Enhancer* enhancer, const enc::LmsConfig& lms = {}, std::size_t workers = 1);

// Scores one in-memory pair.
PairScores score_pair(const std::string& id, const dsp::Waveform& clean, const dsp::Waveform& processed,
                      const std::set<Metric>& metrics, const enc::LmsConfig& lms = {});

}  // namespace emd::pipeline
