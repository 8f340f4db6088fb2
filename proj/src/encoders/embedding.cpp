#include "emd/encoders/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace emd::enc {
namespace {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::size_t kFixedHeader = 4 + 4 + 4 + 4 + 4 + 1;

using Kind = EmbeddingFormatError::Kind;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[pos + i]);
  return v;
}

}  // namespace

void validate(const EmbeddingSequence& seq) {
  if (seq.dim == 0) throw ConfigError("embedding sequence has dim 0");
  if (seq.data.size() != seq.frames * seq.dim) {
    throw ConfigError("embedding sequence holds " + std::to_string(seq.data.size()) +
                      " values for " + std::to_string(seq.frames) + " x " +
                      std::to_string(seq.dim));
  }
  if (!(seq.frame_rate_hz > 0.0f) || !std::isfinite(seq.frame_rate_hz)) {
    throw ConfigError("embedding frame rate must be positive");
  }
  for (std::size_t i = 0; i < seq.data.size(); ++i) {
    if (!std::isfinite(seq.data[i])) {
      throw NumericError("embedding value at frame " + std::to_string(i / seq.dim) +
                         " is not finite");
    }
  }
}

std::string encode_embeddings(const EmbeddingSequence& seq) {
  validate(seq);
  if (seq.encoder_id.size() > 255) throw ConfigError("encoder_id longer than 255 bytes");
  std::string out(kMagic, 4);
  put_u32(out, kEmbeddingVersion);
  put_u32(out, static_cast<std::uint32_t>(seq.dim));
  put_u32(out, static_cast<std::uint32_t>(seq.frames));
  out.append(reinterpret_cast<const char*>(&seq.frame_rate_hz), 4);
  out.push_back(static_cast<char>(seq.encoder_id.size()));
  out += seq.encoder_id;
  out.append(reinterpret_cast<const char*>(seq.data.data()), seq.data.size() * sizeof(float));
  return out;
}

EmbeddingSequence decode_embeddings(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw EmbeddingFormatError(Kind::bad_magic, "EMB1: bad magic");
  }
  if (bytes.size() < kFixedHeader) {
    throw EmbeddingFormatError(Kind::truncated_header, "EMB1: truncated header");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kEmbeddingVersion) {
    throw EmbeddingFormatError(Kind::version_mismatch,
                               "EMB1: unsupported version " + std::to_string(version));
  }
  EmbeddingSequence seq;
  seq.dim = get_u32(bytes, 8);
  seq.frames = get_u32(bytes, 12);
  std::memcpy(&seq.frame_rate_hz, bytes.data() + 16, 4);
  if (seq.dim == 0) throw EmbeddingFormatError(Kind::zero_dim, "EMB1: dim is 0");
  const std::size_t id_len = static_cast<unsigned char>(bytes[20]);
  if (bytes.size() < kFixedHeader + id_len) {
    throw EmbeddingFormatError(Kind::truncated_header, "EMB1: truncated encoder_id");
  }
  seq.encoder_id = bytes.substr(kFixedHeader, id_len);

  const std::size_t start = kFixedHeader + id_len;
  const std::size_t payload = bytes.size() - start;
  const std::size_t expected = seq.frames * seq.dim * sizeof(float);
  if (payload != expected) {
    const std::size_t row_bytes = seq.frames * sizeof(float);
    // A payload that is a whole number of frame-major rows for some other dim
    // indicates a header/payload disagreement rather than a cut-off file.
    const bool other_dim = row_bytes > 0 && payload > 0 && payload % row_bytes == 0;
    if (payload > expected || other_dim) {
      throw EmbeddingFormatError(
          Kind::size_mismatch, "EMB1: size mismatch, header declares " +
                                   std::to_string(seq.frames) + " x " + std::to_string(seq.dim) +
                                   " (" + std::to_string(expected) + " bytes) but payload has " +
                                   std::to_string(payload) + " bytes");
    }
    throw EmbeddingFormatError(Kind::truncated_payload,
                               "EMB1: truncated payload (" + std::to_string(payload) + " of " +
                                   std::to_string(expected) + " bytes)");
  }
  seq.data.resize(seq.frames * seq.dim);
  std::memcpy(seq.data.data(), bytes.data() + start, expected);
  if (!(seq.frame_rate_hz > 0.0f) || !std::isfinite(seq.frame_rate_hz)) {
    throw FormatError("EMB1: frame rate must be positive");
  }
  for (float v : seq.data) {
    if (!std::isfinite(v)) throw FormatError("EMB1: payload contains non-finite values");
  }
  return seq;
}

void write_embeddings(const EmbeddingSequence& seq, const std::filesystem::path& path) {
  const std::string bytes = encode_embeddings(seq);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

EmbeddingSequence read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open embeddings " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_embeddings(bytes);
  } catch (const EmbeddingFormatError& e) {
    throw EmbeddingFormatError(e.kind(), path.string() + ": " + e.what());
  }
}

double embedding_mse(const EmbeddingSequence& a, const EmbeddingSequence& b) {
  if (a.frames != b.frames || a.dim != b.dim) {
    throw ConfigError("embedding_mse: shapes " + std::to_string(a.frames) + "x" +
                      std::to_string(a.dim) + " and " + std::to_string(b.frames) + "x" +
                      std::to_string(b.dim) + " differ");
  }
  if (a.data.empty()) throw ConfigError("embedding_mse: empty sequences");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace emd::enc
