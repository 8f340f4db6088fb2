#include "emd/encoders/lms.hpp"

#include "emd/common/error.hpp"

namespace emd::enc {

EmbeddingSequence lms_encode(const dsp::Waveform& w, const LmsConfig& cfg) {
  if (w.sample_rate_hz != cfg.mel.sample_rate_hz) {
    throw ConfigError("lms_encode expects " + std::to_string(cfg.mel.sample_rate_hz) +
                      " Hz audio but got " + std::to_string(w.sample_rate_hz) +
                      " Hz; resample the input first");
  }
  const dsp::LogMel lm = dsp::log_mel(w, cfg.stft, cfg.mel);
  EmbeddingSequence seq;
  seq.frames = lm.frames;
  seq.dim = lm.n_mels;
  seq.frame_rate_hz = cfg.frame_rate_hz();
  seq.encoder_id = kLmsId;
  seq.data.assign(lm.data.begin(), lm.data.end());
  return seq;
}

EncoderRegistry EncoderRegistry::with_defaults() {
  EncoderRegistry r;
  r.add({kLmsId, kLmsDim, LmsConfig{}.frame_rate_hz(), EncoderSource::builtin_lms});
  r.add({"wavlm_base", kExternalDim, 0.0f, EncoderSource::external_file});
  r.add({"whisper_small", kExternalDim, 0.0f, EncoderSource::external_file});
  r.add({"dasheng_base", kExternalDim, 0.0f, EncoderSource::external_file});
  r.add({"speaker", 0, 0.0f, EncoderSource::external_file});
  return r;
}

void EncoderRegistry::add(EncoderDescriptor d) {
  if (find(d.encoder_id) != nullptr) {
    throw ConfigError("encoder " + d.encoder_id + " is already registered");
  }
  entries_.push_back(std::move(d));
}

const EncoderDescriptor* EncoderRegistry::find(const std::string& encoder_id) const {
  for (const auto& d : entries_) {
    if (d.encoder_id == encoder_id) return &d;
  }
  return nullptr;
}

const EncoderDescriptor& EncoderRegistry::get(const std::string& encoder_id) const {
  if (const auto* d = find(encoder_id)) return *d;
  std::string known;
  for (const auto& d : entries_) known += (known.empty() ? "" : ", ") + d.encoder_id;
  throw ConfigError("unknown encoder '" + encoder_id + "' (known: " + known + ")");
}

void EncoderRegistry::check(const EmbeddingSequence& seq) const {
  validate(seq);
  const EncoderDescriptor& d = get(seq.encoder_id);
  if (d.dim != 0 && seq.dim != d.dim) {
    throw ConfigError("encoder " + d.encoder_id + " produces dim " + std::to_string(d.dim) +
                      " but the sequence has dim " + std::to_string(seq.dim));
  }
  if (d.frame_rate_hz > 0.0f && seq.frame_rate_hz != d.frame_rate_hz) {
    throw ConfigError("encoder " + d.encoder_id + " runs at " + std::to_string(d.frame_rate_hz) +
                      " Hz but the sequence declares " + std::to_string(seq.frame_rate_hz) +
                      " Hz");
  }
}

}  // namespace emd::enc
