#include "emd/vocoder/config.hpp"

#include <cmath>

#include "emd/common/error.hpp"

namespace emd::voc {

VocoderConfig VocoderConfig::desk(std::size_t input_dim, double input_frame_rate_hz) {
  VocoderConfig c;
  c.input_dim = input_dim;
  c.input_frame_rate_hz = input_frame_rate_hz;
  c.validate();
  return c;
}

VocoderConfig VocoderConfig::full(std::size_t input_dim, double input_frame_rate_hz) {
  VocoderConfig c;
  c.input_dim = input_dim;
  c.input_frame_rate_hz = input_frame_rate_hz;
  c.hidden_dim = 512;
  c.n_blocks = 8;
  c.intermediate_dim = 1536;
  c.validate();
  return c;
}

std::size_t VocoderConfig::output_frames(std::size_t input_frames) const {
  const double ratio = frame_rate_hz() / input_frame_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(input_frames) * ratio));
  return std::max<std::size_t>(n, 1);
}

void VocoderConfig::validate() const {
  if (input_dim == 0) throw ConfigError("vocoder input_dim must be positive");
  if (!(input_frame_rate_hz > 0.0)) throw ConfigError("vocoder input frame rate must be positive");
  if (hidden_dim == 0 || n_blocks == 0 || intermediate_dim == 0) {
    throw ConfigError("vocoder hidden_dim, n_blocks and intermediate_dim must be positive");
  }
  if (kernel_size % 2 == 0) throw ConfigError("vocoder kernel_size must be odd");
  if (sample_rate_hz <= 0) throw ConfigError("vocoder sample rate must be positive");
  stft();
}

nlohmann::json VocoderConfig::to_json() const {
  return {{"input_dim", input_dim},   {"input_frame_rate_hz", input_frame_rate_hz},
          {"hidden_dim", hidden_dim}, {"n_blocks", n_blocks},
          {"intermediate_dim", intermediate_dim}, {"kernel_size", kernel_size},
          {"n_fft", n_fft},           {"hop", hop},
          {"sample_rate_hz", sample_rate_hz}};
}

VocoderConfig VocoderConfig::from_json(const nlohmann::json& j) {
  VocoderConfig c;
  try {
    c.input_dim = j.value("input_dim", c.input_dim);
    c.input_frame_rate_hz = j.value("input_frame_rate_hz", c.input_frame_rate_hz);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.intermediate_dim = j.value("intermediate_dim", c.intermediate_dim);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.n_fft = j.value("n_fft", c.n_fft);
    c.hop = j.value("hop", c.hop);
    c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vocoder config: ") + e.what());
  }
  c.validate();
  return c;
}

DiscriminatorConfig DiscriminatorConfig::full() {
  DiscriminatorConfig c;
  c.mpd_channels = {32, 128, 512, 1024};
  c.mrd_channels = 32;
  return c;
}

void DiscriminatorConfig::validate() const {
  if (periods.empty()) throw ConfigError("MPD needs at least one period");
  for (auto p : periods) {
    if (p < 2) throw ConfigError("MPD periods must be >= 2");
  }
  if (mpd_channels.empty()) throw ConfigError("MPD needs at least one conv layer");
  for (auto c : mpd_channels) {
    if (c == 0) throw ConfigError("MPD channels must be positive");
  }
  if (resolutions.empty()) throw ConfigError("MRD needs at least one resolution");
  for (const auto& [n_fft, hop] : resolutions) dsp::StftConfig::make(n_fft, hop, true);
  if (mrd_channels == 0) throw ConfigError("MRD channels must be positive");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be nonnegative");
}

nlohmann::json DiscriminatorConfig::to_json() const {
  nlohmann::json res = nlohmann::json::array();
  for (const auto& [n_fft, hop] : resolutions) res.push_back({n_fft, hop});
  return {{"periods", periods},         {"mpd_channels", mpd_channels}, {"resolutions", res},
          {"mrd_channels", mrd_channels}, {"leaky_slope", leaky_slope}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  try {
    c.periods = j.value("periods", c.periods);
    c.mpd_channels = j.value("mpd_channels", c.mpd_channels);
    if (j.contains("resolutions")) {
      c.resolutions.clear();
      for (const auto& r : j.at("resolutions")) {
        c.resolutions.emplace_back(r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>());
      }
    }
    c.mrd_channels = j.value("mrd_channels", c.mrd_channels);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("discriminator config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace emd::voc
