#include "ppl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ppl/errors.hpp"
#include "ppl/rng.hpp"

namespace ppl {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// --- story-like grammar -------------------------------------------------

struct VocabEntry {
  const char* word;
  int syllables;
};

const VocabEntry kNouns[] = {{"story", 2},   {"forest", 2}, {"river", 2},  {"teacher", 2},
                             {"garden", 2},  {"window", 2}, {"market", 2}, {"morning", 2},
                             {"bird", 1},    {"house", 1},  {"road", 1},   {"mountain", 2},
                             {"village", 3}, {"basket", 2}, {"lantern", 2}};
const VocabEntry kProperNouns[] = {{"anna", 2}, {"ravi", 2}, {"meera", 2}, {"tom", 1}};
const VocabEntry kAdjectives[] = {{"small", 1},  {"bright", 1}, {"quiet", 2},
                                  {"golden", 2}, {"heavy", 2},  {"narrow", 2}};
const VocabEntry kAdverbs[] = {{"slowly", 2}, {"quickly", 2}, {"gently", 2}, {"again", 2}};
const VocabEntry kVerbs[] = {{"walked", 1}, {"looked", 1},  {"opened", 2}, {"carried", 2},
                             {"found", 1},  {"crossed", 1}, {"followed", 2}};
const VocabEntry kAuxiliaries[] = {{"was", 1}, {"were", 1}, {"had", 1}};
const VocabEntry kModals[] = {{"could", 1}, {"would", 1}, {"must", 1}};
const VocabEntry kPronouns[] = {{"she", 1}, {"he", 1}, {"they", 1}, {"it", 1}};
const VocabEntry kPrepositions[] = {{"in", 1}, {"on", 1}, {"under", 2}, {"near", 1}, {"through", 1}};
const VocabEntry kConjunctions[] = {{"and", 1}, {"but", 1}, {"so", 1}};
const VocabEntry kParticles[] = {{"up", 1}, {"out", 1}, {"down", 1}};
const VocabEntry kArticles[] = {{"the", 1}, {"a", 1}, {"this", 1}, {"that", 1}};
const VocabEntry kFillers[] = {{"uh", 1}, {"um", 1}, {"the", 1}};

const VocabEntry* vocab_for(PosTag tag, int* count) {
  switch (tag) {
    case PosTag::NN: *count = 15; return kNouns;
    case PosTag::NP: *count = 4; return kProperNouns;
    case PosTag::JJ: *count = 6; return kAdjectives;
    case PosTag::RB: *count = 4; return kAdverbs;
    case PosTag::VB: *count = 7; return kVerbs;
    case PosTag::AU: *count = 3; return kAuxiliaries;
    case PosTag::MD: *count = 3; return kModals;
    case PosTag::PR: *count = 4; return kPronouns;
    case PosTag::IN: *count = 5; return kPrepositions;
    case PosTag::CC: *count = 3; return kConjunctions;
    case PosTag::RP: *count = 3; return kParticles;
    case PosTag::DT: *count = 4; return kArticles;
    default: *count = 3; return kFillers;
  }
}

using Template = std::vector<PosTag>;

const std::vector<Template>& sentence_templates() {
  using P = PosTag;
  static const std::vector<Template> templates = {
      {P::DT, P::NN, P::VB, P::IN, P::DT, P::NN},
      {P::DT, P::JJ, P::NN, P::VB, P::RB},
      {P::PR, P::AU, P::VB, P::DT, P::JJ, P::NN},
      {P::NP, P::MD, P::VB, P::IN, P::DT, P::NN},
      {P::PR, P::VB, P::DT, P::NN, P::CC, P::DT, P::NN},
      {P::DT, P::NN, P::AU, P::RB, P::VB, P::IN, P::DT, P::NN},
      {P::NP, P::VB, P::RP, P::CC, P::VB, P::DT, P::JJ, P::NN},
      {P::IN, P::DT, P::NN, P::PR, P::VB, P::DT, P::NN},
  };
  return templates;
}

// --- speaker and word plans ----------------------------------------------

struct SpeakerProfile {
  std::string id;
  double base_lnf0;
  double base_db;
  double rate;        // phone-duration multiplier
  double w_f0, w_int, w_dur;  // cue weights, sum == 3
};

SpeakerProfile make_speaker(int index, Rng& rng) {
  SpeakerProfile s;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02d", index);
  s.id = buf;
  s.base_lnf0 = std::log(rng.uniform(190.0, 290.0));  // children's range
  s.base_db = rng.uniform(60.0, 70.0);
  // wide speaking-rate spread: absolute durations alone cannot separate a
  // slow reader from an accented word
  s.rate = rng.uniform(0.75, 1.35);
  double w[3];
  for (double& x : w) x = rng.uniform(0.7, 1.3);
  const double scale = 3.0 / (w[0] + w[1] + w[2]);
  s.w_f0 = w[0] * scale;
  s.w_int = w[1] * scale;
  s.w_dur = w[2] * scale;
  return s;
}

struct WordPlan {
  Word word;               // timings filled during layout
  bool planted = false;
  bool sentence_final = false;
  double cue_f0 = 0.0, cue_int = 0.0, cue_dur = 0.0;
  int n_syllables = 1;
};

double topdown_term(EventLabel label, const SynthOptions& opt) {
  switch (label) {
    case EventLabel::Mandatory: return opt.topdown_mandatory;
    case EventLabel::Optional: return opt.topdown_optional;
    default: return opt.topdown_forbidden;
  }
}

// Plans the words of one utterance: tags, labels, planting, cue levels and
// votes. Timings and contours are laid out separately.
std::vector<WordPlan> plan_words(int n_words, const SpeakerProfile& speaker, double plant_base,
                                 const SynthOptions& opt, Rng& rng) {
  std::vector<WordPlan> plans;
  plans.reserve(n_words + 4);

  const auto& templates = sentence_templates();
  while (static_cast<int>(plans.size()) < n_words) {
    const Template& sent = templates[rng.uniform_int(0, static_cast<int>(templates.size()) - 1)];
    // nuclear accent goes to the last content word of the sentence
    int nuclear = -1;
    for (int i = static_cast<int>(sent.size()) - 1; i >= 0; --i) {
      if (is_content_tag(sent[i])) {
        nuclear = i;
        break;
      }
    }
    for (int i = 0; i < static_cast<int>(sent.size()); ++i) {
      if (rng.bernoulli(opt.insertion_rate)) {
        WordPlan filler;
        int count;
        const VocabEntry* vocab = vocab_for(PosTag::INS, &count);
        const VocabEntry& entry = vocab[rng.uniform_int(0, count - 1)];
        filler.word.text = entry.word;
        filler.word.target_text = "";
        filler.word.pos = PosTag::INS;
        filler.word.is_inserted = true;
        filler.word.info = {EventLabel::Optional, EventLabel::Optional};
        filler.n_syllables = entry.syllables;
        plans.push_back(std::move(filler));
      }
      WordPlan p;
      int count;
      const VocabEntry* vocab = vocab_for(sent[i], &count);
      const VocabEntry& entry = vocab[rng.uniform_int(0, count - 1)];
      p.word.text = entry.word;
      p.word.target_text = entry.word;
      p.word.pos = sent[i];
      p.n_syllables = entry.syllables;
      p.sentence_final = (i + 1 == static_cast<int>(sent.size()));
      if (is_content_tag(sent[i])) {
        p.word.info.prominence = (i == nuclear) ? EventLabel::Mandatory : EventLabel::Optional;
      } else {
        p.word.info.prominence = EventLabel::Forbidden;
      }
      p.word.info.boundary = p.sentence_final ? EventLabel::Mandatory
                             : (i + 2 == static_cast<int>(sent.size()) ? EventLabel::Optional
                                                                       : EventLabel::Forbidden);
      plans.push_back(std::move(p));
    }
  }
  plans.resize(n_words);
  plans.back().sentence_final = true;
  plans.back().word.info.boundary = EventLabel::Mandatory;

  // plant prominence and draw votes
  for (WordPlan& p : plans) {
    double factor = opt.plant_optional_factor;
    if (p.word.is_inserted) {
      factor = opt.plant_forbidden_factor;
    } else {
      switch (p.word.info.prominence) {
        case EventLabel::Mandatory: factor = opt.plant_mandatory_factor; break;
        case EventLabel::Optional: factor = opt.plant_optional_factor; break;
        case EventLabel::Forbidden: factor = opt.plant_forbidden_factor; break;
      }
    }
    p.planted = rng.bernoulli(std::min(1.0, plant_base * factor));
    const double accent = p.planted ? rng.uniform(opt.accent_min, opt.accent_max)
                                    : rng.uniform(0.0, opt.jitter_max);
    // perceived strength drives the votes; the realized acoustics may fall
    // short of it (weak realization) or exceed it (spurious emphasis that
    // raters discount as a miscue)
    const double strength = accent * (speaker.w_f0 + speaker.w_int + speaker.w_dur) +
                            topdown_term(p.word.is_inserted ? EventLabel::Optional
                                                            : p.word.info.prominence,
                                         opt);
    double realized = accent;
    if (p.planted && rng.bernoulli(opt.weak_realization_prob)) {
      realized = accent * rng.uniform(opt.weak_realization_min, opt.weak_realization_max);
    } else if (!p.planted && !is_content_tag(p.word.pos) &&
               rng.bernoulli(opt.spurious_emphasis_prob)) {
      realized = rng.uniform(opt.spurious_accent_min, opt.spurious_accent_max);
    }
    p.cue_f0 = realized * speaker.w_f0;
    p.cue_int = realized * speaker.w_int;
    p.cue_dur = realized * speaker.w_dur;
    const double prob = sigmoid(opt.vote_steepness * (strength - opt.vote_midpoint));
    p.word.votes = rng.binomial(kNumRaters, prob);
  }
  return plans;
}

// --- timing layout --------------------------------------------------------

struct PhoneSpec {
  const char* label;
  bool voiced;
};

const PhoneSpec kOnsets[] = {{"k", false}, {"t", false}, {"s", false}, {"m", true},
                             {"n", true},  {"l", true},  {"r", true}};
const PhoneSpec kVowels[] = {{"aa", true}, {"iy", true}, {"eh", true}, {"ow", true}, {"uw", true}};

// Lays out phones/syllables/pauses on the time axis. Returns utterance words
// with timings; phone voicing flags are appended to `phone_voiced` in order.
void layout_timeline(std::vector<WordPlan>& plans, const SpeakerProfile& speaker,
                     double utterance_rate, const SynthOptions& opt, Rng& rng,
                     std::vector<std::pair<double, double>>* unvoiced_spans) {
  const double rate = speaker.rate * utterance_rate;
  double cursor = rng.uniform(0.10, 0.20);  // leading silence
  for (std::size_t wi = 0; wi < plans.size(); ++wi) {
    WordPlan& p = plans[wi];
    const double stretch = 1.0 + opt.duration_stretch * p.cue_dur +
                           (p.sentence_final ? 0.12 : 0.0);
    p.word.start_s = cursor;
    for (int s = 0; s < p.n_syllables; ++s) {
      const double syl_start = cursor;
      const int n_phones = rng.uniform_int(2, 3);
      for (int ph = 0; ph < n_phones; ++ph) {
        const bool is_vowel = (ph == 1);
        const PhoneSpec& spec = is_vowel ? kVowels[rng.uniform_int(0, 4)]
                                         : kOnsets[rng.uniform_int(0, 6)];
        double dur = rng.uniform(0.055, 0.095) * rate * stretch;
        if (is_vowel) dur *= 1.35;
        PhoneSeg seg{spec.label, cursor, cursor + dur};
        if (!spec.voiced) unvoiced_spans->push_back({seg.start_s, seg.end_s});
        p.word.phones.push_back(seg);
        cursor += dur;
      }
      p.word.syllables.push_back({syl_start, cursor});
    }
    p.word.end_s = cursor;
    // pause after the word, scaled with the reading rate
    double gap = rng.uniform(0.010, 0.050);
    if (p.sentence_final) gap = rng.uniform(0.18, 0.42);
    else if (p.word.info.boundary == EventLabel::Optional) gap = rng.uniform(0.06, 0.14);
    cursor += gap * rate;
  }
}

// --- contour emission ------------------------------------------------------

// Smooth pseudo-random wander: a few slow sinusoids.
struct Wander {
  double a1, f1, p1, a2, f2, p2;
  static Wander make(double amp, Rng& rng) {
    return {amp * rng.uniform(0.6, 1.0), rng.uniform(0.25, 0.6), rng.uniform(0.0, 2.0 * kPi),
            amp * rng.uniform(0.3, 0.7), rng.uniform(0.9, 1.8), rng.uniform(0.0, 2.0 * kPi)};
  }
  double at(double t) const {
    return a1 * std::sin(2.0 * kPi * f1 * t + p1) + a2 * std::sin(2.0 * kPi * f2 * t + p2);
  }
};

// Raised-cosine accent shape over [0,1], peaking at 0.4.
double accent_shape(double rel) {
  if (rel < 0.0 || rel > 1.0) return 0.0;
  const double x = rel < 0.4 ? rel / 0.4 : (1.0 - rel) / 0.6;
  return 0.5 - 0.5 * std::cos(kPi * std::clamp(x, 0.0, 1.0));
}

ContourStack emit_contours(const std::vector<WordPlan>& plans,
                           const std::vector<std::pair<double, double>>& unvoiced_spans,
                           const SpeakerProfile& speaker, const SynthOptions& opt, Rng& rng) {
  const double end_time = plans.back().word.end_s + rng.uniform(0.12, 0.20);
  const int frames = frame_count_for_duration(end_time);

  Eigen::VectorXd log_f0 = Eigen::VectorXd::Zero(frames);
  Eigen::VectorXd intensity(frames);
  Eigen::VectorXd hnr(frames);
  MatRM bands(5, frames);
  std::vector<std::uint8_t> voicing(frames, 0);

  const Wander f0_wander = Wander::make(0.045, rng);
  const Wander int_wander = Wander::make(1.2, rng);
  const double declination = 0.12;  // ln-Hz drop over the utterance

  // per-frame jitter, pre-drawn so the stream is stable
  std::vector<double> f0_noise(frames), int_noise(frames);
  for (int t = 0; t < frames; ++t) f0_noise[t] = rng.normal(0.0, 0.008);
  for (int t = 0; t < frames; ++t) int_noise[t] = rng.normal(0.0, 0.35);

  std::size_t word_idx = 0;
  std::size_t unvoiced_idx = 0;
  for (int t = 0; t < frames; ++t) {
    const double time = (t + 0.5) * ContourStack::kHopS;
    while (word_idx < plans.size() && time >= plans[word_idx].word.end_s) ++word_idx;
    const WordPlan* cur =
        (word_idx < plans.size() && time >= plans[word_idx].word.start_s) ? &plans[word_idx]
                                                                          : nullptr;
    while (unvoiced_idx < unvoiced_spans.size() && time >= unvoiced_spans[unvoiced_idx].second)
      ++unvoiced_idx;
    const bool in_unvoiced_phone = unvoiced_idx < unvoiced_spans.size() &&
                                   time >= unvoiced_spans[unvoiced_idx].first &&
                                   time < unvoiced_spans[unvoiced_idx].second;

    double f0_cue = 0.0, int_cue = 0.0;
    if (cur != nullptr) {
      const double rel = (time - cur->word.start_s) / (cur->word.end_s - cur->word.start_s);
      const double shape = accent_shape(rel);
      f0_cue = opt.f0_bump_lnhz * cur->cue_f0 * shape;
      int_cue = opt.intensity_bump_db * cur->cue_int * shape;
    }

    const bool voiced = cur != nullptr && !in_unvoiced_phone;
    voicing[t] = voiced ? 1 : 0;
    log_f0[t] = speaker.base_lnf0 - declination * (time / end_time) + f0_wander.at(time) +
                f0_noise[t] + f0_cue;

    const double speech_db = speaker.base_db + int_wander.at(time) + int_noise[t] + int_cue;
    const double level = cur != nullptr ? speech_db : 32.0 + int_noise[t];  // room noise in pauses
    intensity[t] = level;

    if (voiced) {
      hnr[t] = 12.0 + 0.25 * int_cue + 0.3 * int_noise[t];
    } else if (cur != nullptr) {
      hnr[t] = 1.0 + 0.3 * int_noise[t];  // unvoiced consonant
    } else {
      hnr[t] = -5.0 + 0.3 * int_noise[t];
    }

    // octave-band profile hangs off the frame level; emphasis brightens
    // the high bands on accented words
    const double tilt_cue = opt.tilt_bump_db * (cur != nullptr ? cur->cue_int : 0.0) *
                            (cur != nullptr
                                 ? accent_shape((time - cur->word.start_s) /
                                                (cur->word.end_s - cur->word.start_s))
                                 : 0.0);
    double profile[5] = {-4.0, -8.0, -14.0, -20.0, -26.0};
    if (in_unvoiced_phone) {
      profile[3] += 8.0;
      profile[4] += 12.0;  // fricative-like high-band energy
    }
    for (int b = 0; b < 5; ++b) {
      const double emphasis = tilt_cue * (b == 4 ? 1.0 : b == 3 ? 0.5 : 0.0);
      bands(b, t) = level + profile[b] + emphasis + 0.2 * int_noise[t];
    }
  }

  return assemble_stack(log_f0, voicing, intensity, hnr, bands);
}

AudioBuffer emit_audio(const ContourStack& stack, Rng& rng) {
  AudioBuffer audio;
  audio.sample_rate = 16000.0;
  const int frames = stack.num_frames();
  const int n = static_cast<int>(frames * ContourStack::kHopS * audio.sample_rate);
  audio.samples.resize(n);
  double phase = 0.0;
  for (int i = 0; i < n; ++i) {
    const int t = std::min(frames - 1, static_cast<int>(i / (ContourStack::kHopS * 16000.0)));
    const double db = stack.frames(chan::kIntRaw, t);
    const double amp = std::pow(10.0, (db - 85.0) / 20.0);  // 65 dB speech ~ -20 dBFS
    if (stack.voicing[t]) {
      const double f0 = std::exp(stack.frames(chan::kF0Raw, t));
      phase += 2.0 * kPi * f0 / audio.sample_rate;
      audio.samples[i] = amp * std::sin(phase);
    } else {
      audio.samples[i] = amp * rng.uniform(-1.0, 1.0);
    }
  }
  return audio;
}

// --- calibration -----------------------------------------------------------

// Positive (votes >= 3) fraction of a label/vote-only probe of >= 10k words.
double probe_positive_rate(double plant_base, const SynthOptions& opt, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(0xca11b7a7e);
  int positives = 0, total = 0;
  const int n_probe_speakers = 10;
  std::vector<SpeakerProfile> speakers;
  for (int i = 0; i < n_probe_speakers; ++i) speakers.push_back(make_speaker(i, rng));
  while (total < 10000) {
    for (int i = 0; i < n_probe_speakers && total < 10000 + n_probe_speakers * 70; ++i) {
      const int n_words = rng.uniform_int(50, 70);
      auto plans = plan_words(n_words, speakers[i], plant_base, opt, rng);
      for (const WordPlan& p : plans) {
        ++total;
        if (p.word.votes >= kBinaryVoteThreshold) ++positives;
      }
    }
  }
  return static_cast<double>(positives) / total;
}

double calibrate_plant_base(const SynthOptions& opt, std::uint64_t seed) {
  double base = 0.35;
  const double inner_tol = 0.6 * opt.positive_tolerance;
  for (int round = 0; round < 10; ++round) {
    const double rate = probe_positive_rate(base, opt, seed + round);
    if (std::abs(rate - opt.target_positive_rate) <= inner_tol) return base;
    base = std::clamp(base * opt.target_positive_rate / std::max(rate, 1e-3), 0.02, 0.95);
  }
  return base;
}

}  // namespace

SynthResult synth_corpus(int n_speakers, int n_utterances, std::uint64_t seed,
                         const SynthOptions& opt) {
  if (n_speakers < 3)
    throw ValidationError("synth_corpus: need at least 3 speakers for speaker-disjoint folds");
  if (n_utterances < n_speakers)
    throw ValidationError("synth_corpus: need at least one utterance per speaker");

  SynthResult result;
  result.calibrated_plant_rate = calibrate_plant_base(opt, seed);

  Rng master(seed);
  std::vector<SpeakerProfile> speakers;
  Rng speaker_rng = master.fork(1);
  for (int i = 0; i < n_speakers; ++i) speakers.push_back(make_speaker(i, speaker_rng));

  for (int u = 0; u < n_utterances; ++u) {
    Rng rng = master.fork(1000 + u);
    const SpeakerProfile& speaker = speakers[u % n_speakers];

    const int n_words = rng.uniform_int(50, 70);
    auto plans = plan_words(n_words, speaker, result.calibrated_plant_rate, opt, rng);
    std::vector<std::pair<double, double>> unvoiced_spans;
    const double utterance_rate = rng.uniform(0.88, 1.12);
    layout_timeline(plans, speaker, utterance_rate, opt, rng, &unvoiced_spans);
    ContourStack stack = emit_contours(plans, unvoiced_spans, speaker, opt, rng);

    Utterance utt;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "utt%04d", u);
    utt.id = buf;
    utt.speaker_id = speaker.id;
    for (WordPlan& p : plans) utt.words.push_back(std::move(p.word));
    validate_utterance(utt);

    if (opt.emit_audio) result.audio[utt.id] = emit_audio(stack, rng);
    result.contours[utt.id] = std::move(stack);
    result.corpus.utterances.push_back(std::move(utt));
  }
  return result;
}

}  // namespace ppl
