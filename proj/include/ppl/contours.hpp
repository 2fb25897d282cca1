#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ppl {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channel layout of the 15-channel stack, one row per channel.
namespace chan {
inline constexpr int kF0Raw = 0;       // interpolated log-F0
inline constexpr int kF0Smooth = 1;    // 5-frame median of channel 0
inline constexpr int kF0Delta = 2;
inline constexpr int kF0DeltaDelta = 3;
inline constexpr int kIntRaw = 4;      // RMS dB
inline constexpr int kIntSmooth = 5;
inline constexpr int kIntDelta = 6;
inline constexpr int kIntDeltaDelta = 7;
inline constexpr int kHnr = 8;
inline constexpr int kBand0 = 9;       // 0-0.5 kHz log energy; bands 9..13
inline constexpr int kTilt = 14;       // high-band minus low-band log energy
inline constexpr int kF0Begin = 0, kF0End = 4;
inline constexpr int kIntBegin = 4, kIntEnd = 8;
inline constexpr int kSpecBegin = 8, kSpecEnd = 15;
}  // namespace chan

// Frame matrix of acoustic-prosodic contours at a 10 ms hop:
// 4 F0 + 4 intensity + 7 spectral channels, plus a per-frame voicing mask.
struct ContourStack {
  static constexpr double kHopS = 0.010;
  static constexpr int kChannels = 15;

  MatRM frames;                   // kChannels x F
  std::vector<std::uint8_t> voicing;  // F entries, 0/1

  int num_frames() const { return static_cast<int>(frames.cols()); }
};

inline int frame_count_for_duration(double duration_s) {
  return static_cast<int>(std::floor(duration_s / ContourStack::kHopS + 1e-9));
}

// --- channel assembly helpers (shared by the audio frontend and the
// --- synthetic generator, which emits contours without audio) ---

// Linear interpolation across unvoiced gaps; edges held at the nearest
// voiced value. A fully unvoiced track comes back unchanged.
Eigen::VectorXd interpolate_unvoiced(const Eigen::VectorXd& track,
                                     const std::vector<std::uint8_t>& voicing);

Eigen::VectorXd median_smooth5(const Eigen::VectorXd& x);

// Regression delta over +/-2 frames: d[t] = sum_k k*(x[t+k]-x[t-k]) / 10,
// k in {1,2}, indices clamped at the edges. Units are per frame.
Eigen::VectorXd delta_pm2(const Eigen::VectorXd& x);

// Assembles the full 15-channel stack from raw per-frame tracks.
// band_log_energy has 5 rows (octave bands low to high).
ContourStack assemble_stack(const Eigen::VectorXd& log_f0,
                            const std::vector<std::uint8_t>& voicing,
                            const Eigen::VectorXd& intensity_db,
                            const Eigen::VectorXd& hnr_db,
                            const MatRM& band_log_energy);

// Corpus-global standardization statistics for the 7 spectral channels.
struct SpectralStats {
  std::array<double, 7> mean{};
  std::array<double, 7> sd{};
};

SpectralStats compute_spectral_stats(const std::vector<const ContourStack*>& stacks);

// Per-utterance z-score of the 8 F0/intensity channels (F0 stats over the
// voiced+interpolated span); spectral channels standardized with the given
// corpus-global stats, or with utterance-local stats when nullptr.
// Zero-variance channels map to all-zeros.
ContourStack zscore_utterance(const ContourStack& stack, const SpectralStats* spectral = nullptr);

// CSV with header t_s,f0_1..f0_4,int_1..int_4,spec_1..spec_7,voiced,
// one row per 10 ms frame, values at 9 significant digits.
void write_contours_csv(const ContourStack& stack, const std::string& path);
ContourStack read_contours_csv(const std::string& path);

}  // namespace ppl
