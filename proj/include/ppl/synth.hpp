#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"
#include "ppl/frontend.hpp"

namespace ppl {

// Knobs of the synthetic-corpus generator. The generated corpus is the
// verification oracle for the pipeline: prominence is planted with known
// cue magnitudes, votes are drawn from a logistic model of total realized
// cue strength, and contours are emitted directly (no audio synthesis in
// the default path).
struct SynthOptions {
  // vote model: p = sigmoid(steepness * (cue_strength - midpoint))
  double vote_steepness = 2.5;
  double vote_midpoint = 1.25;

  // top-down rater expectation added to the cue strength, by canonical
  // prominence label
  double topdown_mandatory = 0.50;
  double topdown_optional = 0.0;
  double topdown_forbidden = -0.50;

  // accent level ranges; cue per attribute = accent * speaker weight
  double accent_min = 0.35;
  double accent_max = 1.00;
  double jitter_max = 0.12;  // accent level of unplanted words

  // imperfect realization: some planted words surface with weak acoustics
  // while raters still vote from expectations, and some function words get
  // spurious acoustic emphasis that raters discount
  double weak_realization_prob = 0.18;
  double weak_realization_min = 0.20;
  double weak_realization_max = 0.50;
  double spurious_emphasis_prob = 0.10;
  double spurious_accent_min = 0.30;
  double spurious_accent_max = 0.60;

  // realized cue magnitudes in the emitted contours
  double f0_bump_lnhz = 0.35;       // per unit F0 cue
  double intensity_bump_db = 7.0;   // per unit intensity cue
  double duration_stretch = 0.40;   // relative lengthening per unit duration cue
  double tilt_bump_db = 5.0;        // high-band emphasis per unit intensity cue

  // relative plant propensity by prominence label
  double plant_mandatory_factor = 2.8;
  double plant_optional_factor = 1.0;
  double plant_forbidden_factor = 0.08;

  double insertion_rate = 0.02;

  // calibration of the overall planted rate
  double target_positive_rate = 0.24;
  double positive_tolerance = 0.03;

  bool emit_audio = false;  // sine+noise audio for frontend smoke tests
};

struct SynthResult {
  Corpus corpus;
  std::map<std::string, ContourStack> contours;  // by utterance id
  std::map<std::string, AudioBuffer> audio;      // only when emit_audio
  double calibrated_plant_rate = 0.0;
};

// Deterministic given (sizes, seed). Utterance lengths are uniform in
// 50..70 words; prominence is planted preferentially on content words with
// mandatory canonical labels; the planted rate is calibrated on a >=10k-word
// probe so that the fraction of words with votes >= 3 lands at
// target_positive_rate within tolerance.
SynthResult synth_corpus(int n_speakers, int n_utterances, std::uint64_t seed,
                         const SynthOptions& options = {});

}  // namespace ppl
