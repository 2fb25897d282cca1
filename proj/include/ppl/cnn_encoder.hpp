#pragma once

#include <string>
#include <vector>

#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"
#include "ppl/nn_ops.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

enum class ChannelMode { MultichannelConcat, MultichannelPool, SingleChannel };
enum class PositionEncoding { OneBit, Word3, WordPause5, WordPause5Syll7 };
enum class SegmentMode { Variable, FixedMean3Word };
enum class BankPool { Max, Average };  // cross-bank pooling in MultichannelPool mode

ChannelMode channel_mode_from_string(const std::string& s);
const char* to_string(ChannelMode mode);
PositionEncoding position_encoding_from_string(const std::string& s);
const char* to_string(PositionEncoding enc);
SegmentMode segment_mode_from_string(const std::string& s);
const char* to_string(SegmentMode mode);

struct CnnConfig {
  std::vector<int> widths{25, 51};
  int filters_per_width = 8;
  ChannelMode channels = ChannelMode::MultichannelConcat;
  int context_words = 1;
  PositionEncoding position_encoding = PositionEncoding::WordPause5Syll7;
  SegmentMode segment_mode = SegmentMode::Variable;
  BankPool bank_pool = BankPool::Max;
  int fixed_len_frames = 0;  // FixedMean3Word target; 0 = derive from corpus

  int position_channels() const;
  int num_banks() const { return channels == ChannelMode::SingleChannel ? 1 : 3; }
  int bank_encoding_dim() const {
    return static_cast<int>(widths.size()) * filters_per_width;
  }
  int encoding_dim() const {
    return channels == ChannelMode::MultichannelConcat ? 3 * bank_encoding_dim()
                                                       : bank_encoding_dim();
  }
  void validate() const;
};

// Per-word CNN input: contour content plus 0/1 position channels over the
// segment spanning the word and its +/- context_words neighbors (with the
// pauses between them). Missing neighbors contribute no frames in variable
// mode; fixed mode center-crops/zero-pads around the word (padding frames
// carry all-zero position bits).
struct WordSegment {
  MatRM content;   // 15 x T
  MatRM position;  // P x T
  int word_begin = 0;  // current-word span within the segment
  int word_end = 0;
};

WordSegment build_segment(const ContourStack& stack, const Utterance& utt, int i,
                          const CnnConfig& config);

// Mean 3-word-segment length over words, for FixedMean3Word.
int mean_segment_frames(const ContourStack& stack, const Utterance& utt, int context_words);

// One filter bank per contour attribute group (F0 / intensity / spectral),
// position channels appended to every bank's input; per width: conv1d_same
// then max-pool over time; concatenation (or cross-bank pooling) of the
// bank encodings.
class CnnEncoder {
 public:
  CnnEncoder(const CnnConfig& config, ParamSet& params, Rng& rng);

  const CnnConfig& config() const { return config_; }
  int encoding_dim() const { return config_.encoding_dim(); }

  struct Cache {
    std::vector<std::vector<int>> argmax;      // per bank*width, per filter
    std::vector<int> winner_bank;              // MultichannelPool/Max only
  };

  Eigen::VectorXd forward(const WordSegment& segment, const ParamSet& params,
                          Cache* cache = nullptr) const;
  void backward(const WordSegment& segment, const Cache& cache, const Eigen::VectorXd& d_encoding,
                ParamSet& params) const;

 private:
  MatRM bank_input(const WordSegment& segment, int bank) const;
  Eigen::VectorXd bank_forward(const MatRM& input, int bank, const ParamSet& params,
                               std::vector<std::vector<int>>* argmax) const;

  CnnConfig config_;
  std::vector<int> kernel_idx_;  // ParamSet index per bank*width
  std::vector<int> bias_idx_;
  std::vector<std::pair<int, int>> bank_rows_;  // content row range per bank
};

}  // namespace ppl
