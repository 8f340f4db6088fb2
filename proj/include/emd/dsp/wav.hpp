#pragma once

#include <filesystem>

#include "emd/dsp/waveform.hpp"

namespace emd::dsp {

// Reads a mono RIFF/WAVE file. 16/24/32-bit integer PCM and 32/64-bit float
// are accepted and converted to [-1, 1]. Multichannel files are rejected.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit signed little-endian PCM, clamping to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace emd::dsp
