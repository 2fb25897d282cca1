#include "ppl/cnn_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ppl/errors.hpp"
#include "ppl/features.hpp"

namespace ppl {

ChannelMode channel_mode_from_string(const std::string& s) {
  if (s == "concat") return ChannelMode::MultichannelConcat;
  if (s == "pool") return ChannelMode::MultichannelPool;
  if (s == "single") return ChannelMode::SingleChannel;
  throw ValidationError("unknown CNN channel mode: '" + s + "'");
}

const char* to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::MultichannelConcat: return "concat";
    case ChannelMode::MultichannelPool: return "pool";
    default: return "single";
  }
}

PositionEncoding position_encoding_from_string(const std::string& s) {
  if (s == "onebit") return PositionEncoding::OneBit;
  if (s == "word3") return PositionEncoding::Word3;
  if (s == "wordpause5") return PositionEncoding::WordPause5;
  if (s == "wordpause5_syll7") return PositionEncoding::WordPause5Syll7;
  throw ValidationError("unknown position encoding: '" + s + "'");
}

const char* to_string(PositionEncoding enc) {
  switch (enc) {
    case PositionEncoding::OneBit: return "onebit";
    case PositionEncoding::Word3: return "word3";
    case PositionEncoding::WordPause5: return "wordpause5";
    default: return "wordpause5_syll7";
  }
}

SegmentMode segment_mode_from_string(const std::string& s) {
  if (s == "variable") return SegmentMode::Variable;
  if (s == "fixed") return SegmentMode::FixedMean3Word;
  throw ValidationError("unknown segment mode: '" + s + "'");
}

const char* to_string(SegmentMode mode) {
  return mode == SegmentMode::Variable ? "variable" : "fixed";
}

int CnnConfig::position_channels() const {
  switch (position_encoding) {
    case PositionEncoding::OneBit: return 1;
    case PositionEncoding::Word3: return 3;
    case PositionEncoding::WordPause5: return 5;
    default: return 12;
  }
}

void CnnConfig::validate() const {
  if (widths.empty()) throw ValidationError("CnnConfig: no kernel widths");
  std::set<int> seen;
  for (int w : widths) {
    if (w < 1 || w % 2 == 0) throw ValidationError("CnnConfig: kernel widths must be odd");
    if (!seen.insert(w).second) throw ValidationError("CnnConfig: duplicate kernel width");
  }
  if (filters_per_width < 1) throw ValidationError("CnnConfig: filters_per_width must be >= 1");
  if (context_words < 0) throw ValidationError("CnnConfig: negative context");
}

namespace {

constexpr int kSyllChannels = 7;

// 0-based syllable index of a frame time within the word, capped at 6.
int syllable_index(const Word& w, double time) {
  int count = 0;
  for (const auto& s : w.syllables) {
    if (s.start_s <= time) ++count;
  }
  return std::min(std::max(count - 1, 0), kSyllChannels - 1);
}

}  // namespace

WordSegment build_segment(const ContourStack& stack, const Utterance& utt, int i,
                          const CnnConfig& config) {
  config.validate();
  const int n = utt.num_words();
  const int first = std::max(0, i - config.context_words);
  const int last = std::min(n - 1, i + config.context_words);

  const auto [seg_begin, ignored_a] = word_frame_range(stack, utt.words[first]);
  const auto [ignored_b, seg_end] = word_frame_range(stack, utt.words[last]);
  const auto [cur_begin, cur_end] = word_frame_range(stack, utt.words[i]);
  (void)ignored_a;
  (void)ignored_b;
  const int span = seg_end - seg_begin;

  int T = span;
  int offset = 0;  // content placement within the segment
  if (config.segment_mode == SegmentMode::FixedMean3Word) {
    T = std::max(1, config.fixed_len_frames);
    // center the current word
    const int word_center = (cur_begin + cur_end) / 2 - seg_begin;
    offset = T / 2 - word_center;
  }

  WordSegment segment;
  segment.content = MatRM::Zero(ContourStack::kChannels, T);
  segment.position = MatRM::Zero(config.position_channels(), T);

  // frame spans of the context words, in segment coordinates
  struct SpanInfo {
    int begin, end, word_index;
  };
  std::vector<SpanInfo> spans;
  for (int j = first; j <= last; ++j) {
    const auto [b, e] = word_frame_range(stack, utt.words[j]);
    spans.push_back({b - seg_begin + offset, e - seg_begin + offset, j});
  }

  for (int t = 0; t < T; ++t) {
    const int src = t - offset + seg_begin;
    if (src < seg_begin || src >= seg_end) continue;  // zero padding
    segment.content.col(t) = stack.frames.col(src);

    const SpanInfo* in_word = nullptr;
    for (const auto& s : spans) {
      if (t >= s.begin && t < s.end) {
        in_word = &s;
        break;
      }
    }
    switch (config.position_encoding) {
      case PositionEncoding::OneBit:
        if (in_word != nullptr && in_word->word_index == i) segment.position(0, t) = 1.0;
        break;
      case PositionEncoding::Word3:
        if (in_word != nullptr) {
          const int bit = in_word->word_index < i ? 0 : in_word->word_index == i ? 1 : 2;
          segment.position(bit, t) = 1.0;
        }
        break;
      case PositionEncoding::WordPause5:
      case PositionEncoding::WordPause5Syll7: {
        int bit;
        if (in_word != nullptr) {
          bit = in_word->word_index < i ? 0 : in_word->word_index == i ? 2 : 4;
        } else {
          // pause frame: between context words, before or after the current one
          bit = src < cur_begin ? 1 : 3;
        }
        segment.position(bit, t) = 1.0;
        if (config.position_encoding == PositionEncoding::WordPause5Syll7 && in_word != nullptr &&
            in_word->word_index == i) {
          const double time = (src + 0.5) * ContourStack::kHopS;
          segment.position(5 + syllable_index(utt.words[i], time), t) = 1.0;
        }
        break;
      }
    }
  }

  segment.word_begin = cur_begin - seg_begin + offset;
  segment.word_end = cur_end - seg_begin + offset;
  return segment;
}

int mean_segment_frames(const ContourStack& stack, const Utterance& utt, int context_words) {
  long total = 0;
  const int n = utt.num_words();
  for (int i = 0; i < n; ++i) {
    const int first = std::max(0, i - context_words);
    const int last = std::min(n - 1, i + context_words);
    const auto [b, e1] = word_frame_range(stack, utt.words[first]);
    const auto [b2, e] = word_frame_range(stack, utt.words[last]);
    (void)e1;
    (void)b2;
    total += e - b;
  }
  return n > 0 ? static_cast<int>(total / n) : 1;
}

CnnEncoder::CnnEncoder(const CnnConfig& config, ParamSet& params, Rng& rng) : config_(config) {
  config_.validate();
  if (config_.channels == ChannelMode::SingleChannel) {
    bank_rows_ = {{0, ContourStack::kChannels}};
  } else {
    bank_rows_ = {{chan::kF0Begin, chan::kF0End},
                  {chan::kIntBegin, chan::kIntEnd},
                  {chan::kSpecBegin, chan::kSpecEnd}};
  }
  const int pos = config_.position_channels();
  for (int b = 0; b < static_cast<int>(bank_rows_.size()); ++b) {
    const int channels = bank_rows_[b].second - bank_rows_[b].first + pos;
    for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
      const std::string tag = "cnn.bank" + std::to_string(b) + ".w" +
                              std::to_string(config_.widths[wi]);
      ParamTensor& k = params.add(tag + ".kernels",
                                  {config_.filters_per_width, channels, config_.widths[wi]},
                                  InitScheme::XavierUniform, rng);
      kernel_idx_.push_back(params.count() - 1);
      (void)k;
      params.add(tag + ".bias", {config_.filters_per_width}, InitScheme::Zeros, rng);
      bias_idx_.push_back(params.count() - 1);
    }
  }
}

MatRM CnnEncoder::bank_input(const WordSegment& segment, int bank) const {
  const auto [row_begin, row_end] = bank_rows_[bank];
  const int content_rows = row_end - row_begin;
  const int pos_rows = static_cast<int>(segment.position.rows());
  MatRM input(content_rows + pos_rows, segment.content.cols());
  input.topRows(content_rows) = segment.content.middleRows(row_begin, content_rows);
  input.bottomRows(pos_rows) = segment.position;
  return input;
}

Eigen::VectorXd CnnEncoder::bank_forward(const MatRM& input, int bank, const ParamSet& params,
                                         std::vector<std::vector<int>>* argmax) const {
  const int per_width = config_.filters_per_width;
  Eigen::VectorXd enc(config_.bank_encoding_dim());
  for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
    const int slot = bank * static_cast<int>(config_.widths.size()) + static_cast<int>(wi);
    const MatRM conv = conv1d_same(input, params[kernel_idx_[slot]], params[bias_idx_[slot]]);
    std::vector<int> arg;
    enc.segment(wi * per_width, per_width) = maxpool_time(conv, &arg);
    if (argmax != nullptr) (*argmax)[slot] = std::move(arg);
  }
  return enc;
}

Eigen::VectorXd CnnEncoder::forward(const WordSegment& segment, const ParamSet& params,
                                    Cache* cache) const {
  const int banks = static_cast<int>(bank_rows_.size());
  const int bank_dim = config_.bank_encoding_dim();
  std::vector<std::vector<int>> argmax(banks * config_.widths.size());

  std::vector<Eigen::VectorXd> bank_enc(banks);
  for (int b = 0; b < banks; ++b) {
    bank_enc[b] = bank_forward(bank_input(segment, b), b, params, &argmax);
  }

  Eigen::VectorXd out;
  if (config_.channels == ChannelMode::MultichannelConcat) {
    out.resize(banks * bank_dim);
    for (int b = 0; b < banks; ++b) out.segment(b * bank_dim, bank_dim) = bank_enc[b];
  } else if (config_.channels == ChannelMode::MultichannelPool) {
    out = bank_enc[0];
    std::vector<int> winner(bank_dim, 0);
    if (config_.bank_pool == BankPool::Max) {
      for (int b = 1; b < banks; ++b) {
        for (int k = 0; k < bank_dim; ++k) {
          if (bank_enc[b][k] > out[k]) {
            out[k] = bank_enc[b][k];
            winner[k] = b;
          }
        }
      }
    } else {
      for (int b = 1; b < banks; ++b) out += bank_enc[b];
      out /= banks;
    }
    if (cache != nullptr) cache->winner_bank = std::move(winner);
  } else {
    out = bank_enc[0];
  }
  if (cache != nullptr) cache->argmax = std::move(argmax);
  return out;
}

void CnnEncoder::backward(const WordSegment& segment, const Cache& cache,
                          const Eigen::VectorXd& d_encoding, ParamSet& params) const {
  const int banks = static_cast<int>(bank_rows_.size());
  const int bank_dim = config_.bank_encoding_dim();
  const int per_width = config_.filters_per_width;

  for (int b = 0; b < banks; ++b) {
    // gradient reaching this bank's encoding
    Eigen::VectorXd d_bank(bank_dim);
    if (config_.channels == ChannelMode::MultichannelConcat) {
      d_bank = d_encoding.segment(b * bank_dim, bank_dim);
    } else if (config_.channels == ChannelMode::MultichannelPool) {
      if (config_.bank_pool == BankPool::Max) {
        for (int k = 0; k < bank_dim; ++k)
          d_bank[k] = cache.winner_bank[k] == b ? d_encoding[k] : 0.0;
      } else {
        d_bank = d_encoding / banks;
      }
    } else {
      d_bank = d_encoding;
    }
    if (d_bank.isZero(0.0)) continue;

    const MatRM input = bank_input(segment, b);
    const int T = static_cast<int>(input.cols());
    const int channels = static_cast<int>(input.rows());
    for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
      const int slot = b * static_cast<int>(config_.widths.size()) + static_cast<int>(wi);
      const int width = config_.widths[wi];
      const int half = (width - 1) / 2;
      ParamTensor& kernels = params[kernel_idx_[slot]];
      ParamTensor& bias = params[bias_idx_[slot]];
      const std::vector<int>& arg = cache.argmax[slot];
      for (int f = 0; f < per_width; ++f) {
        const double d = d_bank[wi * per_width + f];
        if (d == 0.0) continue;
        bias.grad[f] += d;
        const int t_star = arg[f];
        double* kg = kernels.grad.data() + f * channels * width;
        for (int c = 0; c < channels; ++c) {
          const double* row = input.data() + c * T;
          for (int w = 0; w < width; ++w) {
            const int t = t_star + w - half;
            if (t >= 0 && t < T) kg[c * width + w] += d * row[t];
          }
        }
      }
    }
  }
}

}  // namespace ppl
