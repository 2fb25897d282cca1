#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppl/cnn_encoder.hpp"
#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"
#include "ppl/features.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

enum class CellType { GRU, LSTM };
CellType cell_from_string(const std::string& s);
const char* to_string(CellType cell);

struct RnnConfig {
  CellType cell = CellType::GRU;
  bool bidirectional = true;
  int layers = 2;
  int units = 96;
  double dropout_p = 0.2;
};

// Grids of the architecture search; enforced for experiment configs, not for
// diagnostic models (the gradient checker runs tiny off-grid sizes).
bool layers_in_grid(int layers);
bool units_in_grid(int units);

struct ModelSpec {
  RnnConfig rnn;
  std::vector<FeatureBlock> blocks{FeatureBlock::A34};
  CnnConfig cnn;                                // used iff blocks contain cnn
  GroupingName grouping = GroupingName::Tags13;  // lex block coarsening
  int static_dim = 0;                            // per-word non-CNN feature dim

  bool uses_cnn() const;
  int input_dim() const;  // static_dim + cnn encoding if present
  std::string label() const;  // e.g. "BGRU-2x96"
};

int static_dim_for(const std::vector<FeatureBlock>& blocks, const GroupingScheme& scheme);

// Per-utterance model input: precomputed static word features plus the
// normalized contour stack when the CNN block is active.
struct UtteranceFeatures {
  std::string utt_id;
  std::string speaker_id;
  Eigen::MatrixXd statics;  // static_dim x n_words
  ContourStack stack;       // empty when no CNN block
  bool has_stack = false;
  Eigen::VectorXd degrees;  // targets, votes/7
  std::vector<int> votes;
  const Utterance* utterance = nullptr;  // alignment source for segments

  int num_words() const { return static_cast<int>(statics.cols()); }
};

// One recurrent direction's saved activations for BPTT. Column s holds the
// s-th processed step; h has n+1 columns with col 0 the zero initial state.
struct DirectionCache {
  Eigen::MatrixXd h;
  Eigen::MatrixXd g1, g2, g3, g4;  // GRU: z, r, candidate, unused
  Eigen::MatrixXd aux;             // GRU: r.h_prev; LSTM: c (n+1 cols)
  Eigen::MatrixXd tanh_c;          // LSTM only
};

struct LayerCache {
  Eigen::MatrixXd input;   // layer input after the dropout below it
  Eigen::MatrixXd output;  // concat(fwd, bwd) per step, pre-dropout
  Eigen::MatrixXd dropout_mask;
  DirectionCache fwd, bwd;
};

struct ForwardCache {
  std::vector<WordSegment> segments;
  std::vector<CnnEncoder::Cache> cnn;
  Eigen::MatrixXd x0;
  std::vector<LayerCache> layers;
  Eigen::VectorXd logits;
  Eigen::VectorXd preds;
};

inline constexpr const char* kModelFormatTag = "ppl-model-v1";

// Per-dimension affine standardization of the static feature rows, fitted on
// the training words and carried in the checkpoint. Zero-variance dimensions
// are centered with unit scale.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_sd;
};

FeatureScaler fit_feature_scaler(const std::vector<const UtteranceFeatures*>& items);

// Word-sequence prominence-degree regressor: optional CNN word encoder,
// stacked (bi)directional GRU/LSTM layers with inter-layer dropout, and a
// linear+sigmoid head emitting one degree per word.
class ProminenceModel {
 public:
  ProminenceModel(const ModelSpec& spec, std::uint64_t init_seed);

  const ModelSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Per-word degrees in (0,1). Training mode applies inter-layer dropout
  // using `dropout_rng`; eval mode is deterministic.
  Eigen::VectorXd forward(const UtteranceFeatures& utt, bool training, Rng* dropout_rng,
                          ForwardCache* cache) const;
  Eigen::VectorXd predict(const UtteranceFeatures& utt) const;

  // Accumulates parameter gradients for d loss/d preds.
  void backward(const UtteranceFeatures& utt, const ForwardCache& cache,
                const Eigen::VectorXd& d_preds);

  // Spectral normalization carried with the checkpoint so prediction can
  // reproduce the training-time contour standardization.
  void set_spectral_stats(const SpectralStats& stats) { spectral_stats_ = stats; }
  const std::optional<SpectralStats>& spectral_stats() const { return spectral_stats_; }

  void set_feature_scaler(const FeatureScaler& scaler);
  const std::optional<FeatureScaler>& feature_scaler() const { return feature_scaler_; }

  void save_checkpoint(const std::string& path) const;
  static ProminenceModel load_checkpoint(const std::string& path);

 private:
  struct DirectionParams {
    int w = -1, u = -1, b = -1;  // ParamSet indices
  };
  struct LayerParams {
    DirectionParams fwd, bwd;
  };

  void register_params(std::uint64_t init_seed);
  void run_direction(const DirectionParams& dir, const Eigen::MatrixXd& input, bool reverse,
                     DirectionCache& cache, Eigen::MatrixXd& output, int row_offset) const;
  void backward_direction(const DirectionParams& dir, const Eigen::MatrixXd& input,
                          const DirectionCache& cache, bool reverse,
                          const Eigen::MatrixXd& d_output, int row_offset,
                          Eigen::MatrixXd& d_input);

  ModelSpec spec_;
  ParamSet params_;
  std::unique_ptr<CnnEncoder> encoder_;
  std::vector<LayerParams> layers_;
  int head_w_ = -1, head_b_ = -1;
  std::optional<SpectralStats> spectral_stats_;
  std::optional<FeatureScaler> feature_scaler_;
};

// JSON (de)serialization shared by checkpoints and reports.
std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& json_text);

}  // namespace ppl
