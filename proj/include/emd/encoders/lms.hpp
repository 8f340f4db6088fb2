#pragma once

#include <string>
#include <vector>

#include "emd/dsp/mel.hpp"
#include "emd/dsp/stft.hpp"
#include "emd/dsp/waveform.hpp"
#include "emd/encoders/embedding.hpp"

namespace emd::enc {

inline constexpr const char* kLmsId = "lms";

struct LmsConfig {
  dsp::StftConfig stft;
  dsp::MelConfig mel;

  float frame_rate_hz() const {
    return static_cast<float>(mel.sample_rate_hz) / static_cast<float>(stft.hop);
  }
};

// 100-band log-mel embedding of a 16 kHz waveform. Other rates are rejected
// so the caller resamples explicitly.
EmbeddingSequence lms_encode(const dsp::Waveform& w, const LmsConfig& cfg = {});

enum class EncoderSource { builtin_lms, external_file };

struct EncoderDescriptor {
  std::string encoder_id;
  std::size_t dim = 0;  // 0: any dim accepted
  float frame_rate_hz = 0.0f;  // 0: taken from the file header
  EncoderSource source = EncoderSource::external_file;
};

class EncoderRegistry {
 public:
  // lms, wavlm_base, whisper_small, dasheng_base and speaker.
  static EncoderRegistry with_defaults();

  // Throws ConfigError on a duplicate encoder_id.
  void add(EncoderDescriptor d);
  const EncoderDescriptor* find(const std::string& encoder_id) const;
  // Throws ConfigError listing the known ids.
  const EncoderDescriptor& get(const std::string& encoder_id) const;
  const std::vector<EncoderDescriptor>& all() const { return entries_; }

  // Checks an imported sequence against its descriptor.
  void check(const EmbeddingSequence& seq) const;

 private:
  std::vector<EncoderDescriptor> entries_;
};

}  // namespace emd::enc
