#include "ppl/lexical.hpp"

#include <fstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"
#include <nlohmann/json.hpp>

namespace ppl {

using nlohmann::json;

GroupingName grouping_from_string(const std::string& s) {
  if (s == "tags13") return GroupingName::Tags13;
  if (s == "groups8") return GroupingName::Groups8;
  if (s == "groups4") return GroupingName::Groups4;
  if (s == "contentfunction2") return GroupingName::ContentFunction2;
  throw ValidationError("unknown grouping scheme: '" + s + "'");
}

const char* to_string(GroupingName name) {
  switch (name) {
    case GroupingName::Tags13: return "tags13";
    case GroupingName::Groups8: return "groups8";
    case GroupingName::Groups4: return "groups4";
    default: return "contentfunction2";
  }
}

GroupingScheme builtin_grouping(GroupingName name) {
  GroupingScheme scheme;
  scheme.name = name;
  // tag order: NN NP JJ RB VB AU MD PR IN CC RP DT INS
  switch (name) {
    case GroupingName::Tags13:
      scheme.group_count = 13;
      for (int i = 0; i < kNumPosTags; ++i) scheme.map[i] = i;
      break;
    case GroupingName::Groups8:
      // nouns, adjectives, adverbs, verbs, aux+modal, pronouns,
      // linkers (IN/CC/RP), determiners+inserted
      scheme.group_count = 8;
      scheme.map = {0, 0, 1, 2, 3, 4, 4, 5, 6, 6, 6, 7, 7};
      break;
    case GroupingName::Groups4:
      // nouns, verb-function (VB/AU/MD), modifiers (JJ/RB), function rest
      scheme.group_count = 4;
      scheme.map = {0, 0, 2, 2, 1, 1, 1, 3, 3, 3, 3, 3, 3};
      break;
    case GroupingName::ContentFunction2:
      scheme.group_count = 2;
      for (int i = 0; i < kNumPosTags; ++i)
        scheme.map[i] = is_content_tag(static_cast<PosTag>(i)) ? 0 : 1;
      break;
  }
  return scheme;
}

GroupingScheme load_grouping(const std::string& path, GroupingName name) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("bad grouping file " + path + ": " + e.what());
  }
  if (j.value("format", "") != kGroupingFormatTag)
    throw ValidationError("grouping file " + path + ": unsupported format tag");
  const auto& schemes = j.at("schemes");
  const std::string key = to_string(name);
  if (!schemes.contains(key))
    throw ValidationError("grouping file " + path + ": missing scheme '" + key + "'");

  GroupingScheme scheme;
  scheme.name = name;
  int max_group = -1;
  for (int i = 0; i < kNumPosTags; ++i) {
    const std::string tag = to_string(static_cast<PosTag>(i));
    if (!schemes[key].contains(tag))
      throw ValidationError("grouping file " + path + ": scheme '" + key + "' missing tag " + tag);
    scheme.map[i] = schemes[key][tag].get<int>();
    max_group = std::max(max_group, scheme.map[i]);
  }
  scheme.group_count = max_group + 1;
  return scheme;
}

void save_builtin_groupings(const std::string& path) {
  json schemes = json::object();
  for (GroupingName name : {GroupingName::Tags13, GroupingName::Groups8, GroupingName::Groups4,
                            GroupingName::ContentFunction2}) {
    const GroupingScheme scheme = builtin_grouping(name);
    json m = json::object();
    for (int i = 0; i < kNumPosTags; ++i) m[to_string(static_cast<PosTag>(i))] = scheme.map[i];
    schemes[to_string(name)] = std::move(m);
  }
  write_file_atomic(path, json{{"format", kGroupingFormatTag}, {"schemes", schemes}}.dump(2) + "\n");
}

std::array<double, kNumPosTags> encode_pos(PosTag tag) {
  std::array<double, kNumPosTags> out{};
  out[static_cast<int>(tag)] = 1.0;
  return out;
}

std::vector<double> group_pos(PosTag tag, const GroupingScheme& scheme) {
  std::vector<double> out(scheme.group_count, 0.0);
  out[scheme.map[static_cast<int>(tag)]] = 1.0;
  return out;
}

std::array<double, 6> encode_info(const InfoStructure& info) {
  std::array<double, 6> out{};
  out[static_cast<int>(info.prominence)] = 1.0;
  out[3 + static_cast<int>(info.boundary)] = 1.0;
  return out;
}

std::array<double, 2> word_lengths(const Word& w) {
  return {static_cast<double>(w.phones.size()), static_cast<double>(w.syllables.size())};
}

std::vector<double> lex_features(const Word& w, const GroupingScheme& scheme) {
  std::vector<double> out = group_pos(w.pos, scheme);
  const auto lengths = word_lengths(w);
  out.push_back(lengths[0]);
  out.push_back(lengths[1]);
  return out;
}

}  // namespace ppl
