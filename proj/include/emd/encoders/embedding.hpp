#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emd/common/error.hpp"

namespace emd::enc {

// EMB1 decoding failures, distinguishable by kind.
class EmbeddingFormatError : public FormatError {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated_header, truncated_payload, size_mismatch, zero_dim };

  EmbeddingFormatError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::size_t kLmsDim = 100;
inline constexpr std::size_t kExternalDim = 768;

// frames x dim embedding matrix, frame-major.
struct EmbeddingSequence {
  std::vector<float> data;
  std::size_t frames = 0;
  std::size_t dim = 0;
  float frame_rate_hz = 0.0f;
  std::string encoder_id;

  float at(std::size_t t, std::size_t d) const { return data[t * dim + d]; }
  const float* row(std::size_t t) const { return data.data() + t * dim; }
};

// Throws ConfigError on inconsistent sizes or a non-positive frame rate, and
// NumericError on NaN/Inf.
void validate(const EmbeddingSequence& seq);

// EMB1: "EMB1" | u32 version=1 | u32 dim | u32 n_frames | f32 frame_rate_hz |
//       u8 id length + UTF-8 encoder_id | n_frames * dim f32, all little-endian.
inline constexpr std::uint32_t kEmbeddingVersion = 1;

std::string encode_embeddings(const EmbeddingSequence& seq);
EmbeddingSequence decode_embeddings(const std::string& bytes);

void write_embeddings(const EmbeddingSequence& seq, const std::filesystem::path& path);
EmbeddingSequence read_embeddings(const std::filesystem::path& path);

// Mean squared difference; shapes must match.
double embedding_mse(const EmbeddingSequence& a, const EmbeddingSequence& b);

}  // namespace emd::enc
