#pragma once

#include <array>
#include <string>
#include <vector>

#include "ppl/corpus.hpp"

namespace ppl {

// Coarsenings of the PoS tag set used in the lexical-feature sweeps.
enum class GroupingName { Tags13, Groups8, Groups4, ContentFunction2 };

GroupingName grouping_from_string(const std::string& s);
const char* to_string(GroupingName name);

struct GroupingScheme {
  GroupingName name = GroupingName::Tags13;
  int group_count = kNumPosTags;
  std::array<int, kNumPosTags> map{};  // PosTag index -> group index
};

// Built-in mappings (the shipped data file mirrors these).
GroupingScheme builtin_grouping(GroupingName name);

inline constexpr const char* kGroupingFormatTag = "ppl-posgroups-v1";

// Versioned data-file override: {"format": "...", "schemes": {name: {TAG: idx}}}.
GroupingScheme load_grouping(const std::string& path, GroupingName name);
void save_builtin_groupings(const std::string& path);

// One-hot over the 13 tags; INS occupies the last position.
std::array<double, kNumPosTags> encode_pos(PosTag tag);

// One-hot of size scheme.group_count under the scheme's mapping.
std::vector<double> group_pos(PosTag tag, const GroupingScheme& scheme);

// Two 3-way one-hots: prominence then boundary, each (mandatory, optional,
// forbidden).
std::array<double, 6> encode_info(const InfoStructure& info);

// [phone count, syllable count] of the uttered word.
std::array<double, 2> word_lengths(const Word& w);

inline constexpr int kLexDim = kNumPosTags + 2;  // 15
inline constexpr int kInfoDim = 6;

// The L block: PoS one-hot (under the scheme) followed by the two lengths.
std::vector<double> lex_features(const Word& w, const GroupingScheme& scheme);

}  // namespace ppl
