#pragma once

#include "emd/dsp/waveform.hpp"

namespace emd::dsp {

// Band-limited polyphase resampling with a Kaiser-windowed sinc
// (beta 14.77, rolloff 0.9476, 64 zero crossings per side, so about 128 taps
// per phase when upsampling). Output length is round(len * target / source).
// A same-rate call returns the input unchanged.
Waveform resample(const Waveform& w, int target_hz);

// Convenience: resample to the 16 kHz pipeline rate.
Waveform to_pipeline_rate(const Waveform& w);

}  // namespace emd::dsp
