#include "ppl/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"
#include <nlohmann/json.hpp>

namespace ppl {

using nlohmann::json;

namespace {

const char* kPosNames[kNumPosTags] = {"NN", "NP", "JJ", "RB", "VB", "AU", "MD",
                                      "PR", "IN", "CC", "RP", "DT", "INS"};

}  // namespace

PosTag pos_from_string(const std::string& s) {
  for (int i = 0; i < kNumPosTags; ++i) {
    if (s == kPosNames[i]) return static_cast<PosTag>(i);
  }
  throw ValidationError("unknown PoS tag: '" + s + "'");
}

const char* to_string(PosTag tag) { return kPosNames[static_cast<int>(tag)]; }

bool is_content_tag(PosTag tag) {
  switch (tag) {
    case PosTag::NN:
    case PosTag::NP:
    case PosTag::JJ:
    case PosTag::RB:
    case PosTag::VB:
      return true;
    default:
      return false;
  }
}

EventLabel event_from_string(const std::string& s) {
  if (s == "mandatory") return EventLabel::Mandatory;
  if (s == "optional") return EventLabel::Optional;
  if (s == "forbidden") return EventLabel::Forbidden;
  throw ValidationError("unknown info-structure label: '" + s + "'");
}

const char* to_string(EventLabel label) {
  switch (label) {
    case EventLabel::Mandatory: return "mandatory";
    case EventLabel::Optional: return "optional";
    default: return "forbidden";
  }
}

double degree_label(const Word& w) {
  return static_cast<double>(w.votes) / static_cast<double>(kNumRaters);
}

bool binary_label(const Word& w) { return w.votes >= kBinaryVoteThreshold; }

double Utterance::end_time_s() const {
  double end = 0.0;
  for (const auto& w : words) end = std::max(end, w.end_s);
  return end;
}

std::vector<std::string> Corpus::speakers() const {
  std::set<std::string> s;
  for (const auto& u : utterances) s.insert(u.speaker_id);
  return {s.begin(), s.end()};
}

std::size_t Corpus::total_words() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.words.size();
  return n;
}

double Corpus::positive_fraction() const {
  std::size_t pos = 0, n = 0;
  for (const auto& u : utterances) {
    for (const auto& w : u.words) {
      ++n;
      if (binary_label(w)) ++pos;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(n);
}

namespace {

void fail(const Utterance& utt, const std::string& what) {
  throw ValidationError("utterance '" + utt.id + "': " + what);
}

void check_segments_within(const Utterance& utt, const Word& w, int wi) {
  const std::string where = "word " + std::to_string(wi) + " ('" + w.text + "')";
  const double eps = 1e-9;
  double prev_end = w.start_s;
  for (const auto& p : w.phones) {
    if (p.start_s < w.start_s - eps || p.end_s > w.end_s + eps)
      fail(utt, where + ": phone outside word span (field phones)");
    if (p.start_s < prev_end - eps)
      fail(utt, where + ": phones overlap or out of order (field phones)");
    if (p.end_s <= p.start_s) fail(utt, where + ": empty phone segment (field phones)");
    prev_end = p.end_s;
  }
  prev_end = w.start_s;
  for (const auto& s : w.syllables) {
    if (s.start_s < w.start_s - eps || s.end_s > w.end_s + eps)
      fail(utt, where + ": syllable outside word span (field syllables)");
    if (s.start_s < prev_end - eps)
      fail(utt, where + ": syllables overlap or out of order (field syllables)");
    if (s.end_s <= s.start_s) fail(utt, where + ": empty syllable segment (field syllables)");
    prev_end = s.end_s;
  }
}

}  // namespace

void validate_utterance(const Utterance& utt) {
  if (utt.id.empty()) throw ValidationError("utterance with empty id");
  if (utt.speaker_id.empty()) fail(utt, "empty speaker_id");
  if (utt.words.empty()) fail(utt, "no words");
  double prev_end = -1.0;
  for (int i = 0; i < utt.num_words(); ++i) {
    const Word& w = utt.words[i];
    const std::string where = "word " + std::to_string(i) + " ('" + w.text + "')";
    if (!(w.start_s < w.end_s)) fail(utt, where + ": start_s >= end_s");
    if (w.start_s < prev_end - 1e-9) fail(utt, where + ": overlaps previous word");
    if (w.votes < 0 || w.votes > kNumRaters)
      fail(utt, where + ": votes out of range (field votes = " + std::to_string(w.votes) + ")");
    if (!w.is_inserted && w.syllables.empty())
      fail(utt, where + ": non-inserted word with no syllables (field syllables)");
    if (w.is_inserted != (w.pos == PosTag::INS))
      fail(utt, where + ": is_inserted disagrees with PoS tag (field pos)");
    check_segments_within(utt, w, i);
    prev_end = w.end_s;
  }
}

void validate_corpus(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& u : corpus.utterances) {
    validate_utterance(u);
    if (!ids.insert(u.id).second)
      throw ValidationError("duplicate utterance id '" + u.id + "'");
  }
}

namespace {

json word_to_json(const Word& w) {
  json phones = json::array();
  for (const auto& p : w.phones) phones.push_back({p.label, p.start_s, p.end_s});
  json syls = json::array();
  for (const auto& s : w.syllables) syls.push_back({s.start_s, s.end_s});
  return json{{"text", w.text},
              {"target_text", w.target_text},
              {"start_s", w.start_s},
              {"end_s", w.end_s},
              {"phones", phones},
              {"syllables", syls},
              {"pos", to_string(w.pos)},
              {"is_inserted", w.is_inserted},
              {"info",
               {{"prominence", to_string(w.info.prominence)},
                {"boundary", to_string(w.info.boundary)}}},
              {"votes", w.votes}};
}

Word word_from_json(const json& j) {
  Word w;
  w.text = j.at("text").get<std::string>();
  w.target_text = j.at("target_text").get<std::string>();
  w.start_s = j.at("start_s").get<double>();
  w.end_s = j.at("end_s").get<double>();
  for (const auto& p : j.at("phones")) {
    w.phones.push_back({p.at(0).get<std::string>(), p.at(1).get<double>(), p.at(2).get<double>()});
  }
  for (const auto& s : j.at("syllables")) {
    w.syllables.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  w.pos = pos_from_string(j.at("pos").get<std::string>());
  w.is_inserted = j.at("is_inserted").get<bool>();
  const auto& info = j.at("info");
  w.info.prominence = event_from_string(info.at("prominence").get<std::string>());
  w.info.boundary = event_from_string(info.at("boundary").get<std::string>());
  w.votes = j.at("votes").get<int>();
  return w;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": malformed JSON line: " + e.what());
    }
    try {
      const std::string format = j.at("format").get<std::string>();
      if (format != kCorpusFormatTag)
        throw ValidationError("unsupported corpus format tag '" + format + "'");
      Utterance utt;
      utt.id = j.at("id").get<std::string>();
      utt.speaker_id = j.at("speaker_id").get<std::string>();
      if (j.contains("audio_ref") && !j["audio_ref"].is_null())
        utt.audio_ref = j["audio_ref"].get<std::string>();
      if (j.contains("contour_ref") && !j["contour_ref"].is_null())
        utt.contour_ref = j["contour_ref"].get<std::string>();
      for (const auto& wj : j.at("words")) utt.words.push_back(word_from_json(wj));
      corpus.utterances.push_back(std::move(utt));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": bad utterance object: " + e.what());
    }
  }
  validate_corpus(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ostringstream out;
  for (const auto& u : corpus.utterances) {
    json j{{"format", kCorpusFormatTag}, {"id", u.id}, {"speaker_id", u.speaker_id}};
    if (!u.audio_ref.empty()) j["audio_ref"] = u.audio_ref;
    if (!u.contour_ref.empty()) j["contour_ref"] = u.contour_ref;
    json words = json::array();
    for (const auto& w : u.words) words.push_back(word_to_json(w));
    j["words"] = std::move(words);
    out << j.dump() << "\n";
  }
  write_file_atomic(path, out.str());
}

}  // namespace ppl
