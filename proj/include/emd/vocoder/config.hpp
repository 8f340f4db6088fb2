#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "json.hpp"
#include "emd/dsp/stft.hpp"

namespace emd::voc {

struct VocoderConfig {
  std::size_t input_dim = 100;
  double input_frame_rate_hz = 62.5;
  std::size_t hidden_dim = 128;
  std::size_t n_blocks = 4;
  std::size_t intermediate_dim = 384;
  std::size_t kernel_size = 7;
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  int sample_rate_hz = 16000;

  // hidden 128, 4 blocks, intermediate 384.
  static VocoderConfig desk(std::size_t input_dim, double input_frame_rate_hz);
  // hidden 512, 8 blocks, intermediate 1536.
  static VocoderConfig full(std::size_t input_dim, double input_frame_rate_hz);

  dsp::StftConfig stft() const { return dsp::StftConfig::make(n_fft, hop, true); }
  std::size_t bins() const { return n_fft / 2 + 1; }
  // Log-magnitude and phase channel per bin.
  std::size_t head_width() const { return n_fft + 2; }
  double frame_rate_hz() const { return static_cast<double>(sample_rate_hz) / hop; }
  // STFT frames produced for `input_frames` embedding frames.
  std::size_t output_frames(std::size_t input_frames) const;

  void validate() const;
  nlohmann::json to_json() const;
  static VocoderConfig from_json(const nlohmann::json& j);
};

struct DiscriminatorConfig {
  std::vector<std::size_t> periods = {2, 3, 5, 7, 11};
  std::vector<std::size_t> mpd_channels = {8, 16, 32, 32};
  std::vector<std::pair<std::size_t, std::size_t>> resolutions = {{1024, 256}, {2048, 512}, {512, 128}};
  std::size_t mrd_channels = 16;
  double leaky_slope = 0.1;

  static DiscriminatorConfig desk() { return {}; }
  static DiscriminatorConfig full();

  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

}  // namespace emd::voc
