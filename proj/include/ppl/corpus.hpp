#pragma once

#include <string>
#include <vector>

namespace ppl {

// The 12 PoS tags of the tag set, plus INS for inserted words.
enum class PosTag { NN, NP, JJ, RB, VB, AU, MD, PR, IN, CC, RP, DT, INS };
inline constexpr int kNumPosTags = 13;

PosTag pos_from_string(const std::string& s);
const char* to_string(PosTag tag);
bool is_content_tag(PosTag tag);  // {NN, NP, JJ, RB, VB}

enum class EventLabel { Mandatory, Optional, Forbidden };
EventLabel event_from_string(const std::string& s);
const char* to_string(EventLabel label);

// Canonical expectation of prominence/boundary for a word in the text.
struct InfoStructure {
  EventLabel prominence = EventLabel::Optional;
  EventLabel boundary = EventLabel::Optional;
};

struct PhoneSeg {
  std::string label;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SylSeg {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Word {
  std::string text;
  std::string target_text;  // word in the text; equals text unless a miscue
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<PhoneSeg> phones;
  std::vector<SylSeg> syllables;
  PosTag pos = PosTag::NN;
  bool is_inserted = false;
  InfoStructure info;
  int votes = 0;  // raters marking the word prominent, 0..7
};

inline constexpr int kNumRaters = 7;
inline constexpr int kBinaryVoteThreshold = 3;

// Regression target in [0, 1].
double degree_label(const Word& w);
// Detection label: prominent iff 3 or more votes.
bool binary_label(const Word& w);

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string audio_ref;    // empty when absent
  std::string contour_ref;  // empty when absent
  std::vector<Word> words;

  int num_words() const { return static_cast<int>(words.size()); }
  // Last word end plus a trailing margin; used to size contour stacks.
  double end_time_s() const;
};

struct Corpus {
  std::vector<Utterance> utterances;

  std::vector<std::string> speakers() const;      // sorted, unique
  std::size_t total_words() const;
  double positive_fraction() const;               // words with votes >= 3
};

// Throw ValidationError naming the utterance/word on any broken invariant.
void validate_utterance(const Utterance& utt);
void validate_corpus(const Corpus& corpus);

inline constexpr const char* kCorpusFormatTag = "ppl-corpus-v1";

// JSONL, one utterance object per line. Errors carry the line number.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

}  // namespace ppl
