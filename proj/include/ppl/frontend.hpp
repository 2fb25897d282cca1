#pragma once

#include <string>
#include <vector>

#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"

namespace ppl {

struct AudioBuffer {
  std::vector<double> samples;  // mono, [-1, 1]
  double sample_rate = 16000.0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// 16-bit PCM mono WAV.
AudioBuffer read_wav(const std::string& path);
void write_wav(const AudioBuffer& audio, const std::string& path);

struct FrontendConfig {
  double f0_min_hz = 80.0;
  double f0_max_hz = 500.0;     // covers children's voices
  double f0_window_s = 0.040;
  double voicing_threshold = 0.60;   // on normalized autocorrelation
  double silence_floor_db = -120.0;
  double voicing_silence_db = -70.0;  // below this a frame is never voiced
};

// Computes the 15-channel contour stack at a 10 ms hop. F0 by normalized
// autocorrelation over 40 ms windows (80-500 Hz); intensity as RMS dB;
// HNR from the autocorrelation peak; five octave-band log energies and
// spectral tilt from a short-time FFT.
ContourStack extract_contours(const AudioBuffer& audio, const Utterance& utterance,
                              const FrontendConfig& config = {});

}  // namespace ppl
