#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"
#include "ppl/lexical.hpp"

namespace ppl {

inline constexpr int kA34Dim = 34;
inline constexpr int kA10Dim = 10;
inline constexpr int kDp12Dim = 12;

// Frame span [begin, end) of word i in the stack; throws when the word
// covers no frame (alignment inconsistency).
std::pair<int, int> word_frame_range(const ContourStack& stack, const Word& w);

// The full acoustic-prosodic set, fixed ordering (names in feature_names):
//   F0 block (10):        mean, max, min, range, std, slope,
//                         dmean_prev, dmean_next, dmax_prev, dmax_next
//   intensity block (10): the same ten functionals
//   spectral block (6):   hnr_mean, hnr_max, tilt_mean, tilt_max,
//                         tilt_dprev, tilt_dnext
//   duration block (8):   word_dur, word_dur_norm, pause_before, pause_after,
//                         dur_dprev, dur_dnext, syl_dur_mean, phone_dur_mean
// Delta features against a missing neighbor are 0. Slopes are least-squares,
// per second. Rate normalization divides by the utterance mean phone duration.
// Neighbor context is +/-1 word (config constant delta_context = 1).
std::array<double, kA34Dim> compute_a34(const ContourStack& stack, const Utterance& utt, int i);

// Contour-shape subset: {F0, intensity} x {slope, quadratic coefficient,
// relative peak position, range} + hnr_slope + tilt_slope. Single-frame
// words have slope/quad 0 and peak position 0.5.
std::array<double, kA10Dim> compute_a10(const ContourStack& stack, const Utterance& utt, int i);

// {word dur, mean syl dur, max syl dur, pause before, pause after,
//  mean phone dur} x {actual, rate-normalized}, actual six first.
std::array<double, kDp12Dim> compute_dp12(const Utterance& utt, int i);

inline constexpr int kDeltaContext = 1;

enum class FeatureBlock { Cnn, A34, A10, Dp12, Lex, Info };
FeatureBlock feature_block_from_string(const std::string& s);
const char* to_string(FeatureBlock block);

// Column names for the CSV dump, frozen to keep checkpoints portable.
std::vector<std::string> feature_names(const std::vector<FeatureBlock>& blocks,
                                       const GroupingScheme& scheme);

// Per-word static feature columns for the given blocks (cnn excluded; the
// CNN encoding is computed inside the model).
Eigen::MatrixXd build_static_features(const ContourStack& normalized_stack, const Utterance& utt,
                                      const std::vector<FeatureBlock>& blocks,
                                      const GroupingScheme& scheme);

void write_features_csv(const Eigen::MatrixXd& features,
                        const std::vector<std::string>& names, const Utterance& utt,
                        const std::string& path);

}  // namespace ppl
