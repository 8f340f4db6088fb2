#include "emd/dsp/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "emd/common/error.hpp"

namespace emd::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::ofstream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open WAV file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file" + where);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError("bad fmt chunk" + where);
      format = u16(chunk + 8);
      channels = u16(chunk + 10);
      rate = u32(chunk + 12);
      bits = u16(chunk + 22);
      if (format == kFormatExtensible && size >= 26) format = u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || data == nullptr) throw FormatError("missing fmt or data chunk" + where);
  if (channels != 1) {
    throw FormatError("only mono WAV is supported, file has " + std::to_string(channels) +
                      " channels" + where);
  }
  if (rate == 0) throw FormatError("zero sample rate" + where);

  Waveform w;
  w.sample_rate_hz = static_cast<int>(rate);
  const std::size_t width = bits / 8;
  if (width == 0) throw FormatError("unsupported bit depth" + where);
  const std::size_t n = data_size / width;
  w.samples.resize(n);
  if (format == kFormatPcm && bits == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      w.samples[i] = static_cast<float>(static_cast<std::int16_t>(u16(data + 2 * i)) / 32768.0);
    }
  } else if (format == kFormatPcm && bits == 24) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* p = data + 3 * i;
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v |= ~0xFFFFFF;
      w.samples[i] = static_cast<float>(v / 8388608.0);
    }
  } else if (format == kFormatPcm && bits == 32) {
    for (std::size_t i = 0; i < n; ++i) {
      w.samples[i] = static_cast<float>(static_cast<std::int32_t>(u32(data + 4 * i)) / 2147483648.0);
    }
  } else if (format == kFormatFloat && bits == 32) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t raw = u32(data + 4 * i);
      float v;
      std::memcpy(&v, &raw, 4);
      w.samples[i] = v;
    }
  } else if (format == kFormatFloat && bits == 64) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t raw = 0;
      for (int b = 7; b >= 0; --b) raw = (raw << 8) | data[8 * i + b];
      double v;
      std::memcpy(&v, &raw, 8);
      w.samples[i] = static_cast<float>(v);
    }
  } else {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits)" + where);
  }
  validate(w);
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  validate(w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, kFormatPcm);
  put_u16(os, 1);
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate_hz));
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  std::vector<unsigned char> buf(w.samples.size() * 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double v = std::clamp(static_cast<double>(w.samples[i]), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
    const auto u = static_cast<std::uint16_t>(q);
    buf[2 * i] = static_cast<unsigned char>(u & 0xff);
    buf[2 * i + 1] = static_cast<unsigned char>(u >> 8);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace emd::dsp
