#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ppl/contours.hpp"
#include "ppl/corpus.hpp"
#include "ppl/sequence_model.hpp"

namespace ppl {

struct TrainConfig {
  double lr = 0.003;
  int batch_utterances = 8;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  double threshold = 0.357;  // binarization tau for F-scores
  double clip_norm = 5.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = 0;       // 1-based; 0 when trained without validation
  double best_val_r = 0.0;
  std::vector<double> epoch_losses;  // masked MSE per epoch over train
};

// Builds model inputs for every utterance: per-utterance z-scored contours
// (spectral channels standardized with `stats`), static feature blocks, and
// degree targets. The corpus must outlive the result (utterance pointers).
std::vector<UtteranceFeatures> featurize_corpus(
    const Corpus& corpus, const std::map<std::string, ContourStack>& contours,
    const ModelSpec& spec, const SpectralStats& stats);

// Spectral stats over the contours of the given utterances (train side only,
// to keep the protocol speaker-independent).
SpectralStats spectral_stats_for(const Corpus& corpus,
                                 const std::map<std::string, ContourStack>& contours,
                                 const std::vector<int>& utterance_indices);

// One optimizer step's worth of work: forwards the whole batch, assembles the
// padded prediction grid, applies the masked MSE, backpropagates. Returns the
// masked loss. Training mode draws dropout from `dropout_rng`.
double batch_backward(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                      bool training, Rng* dropout_rng);

// Forward-only masked loss of the batch (eval mode).
double batch_loss(const ProminenceModel& model,
                  const std::vector<const UtteranceFeatures*>& batch);

// Mini-batches of whole utterances, AdamW with gradient clipping, early
// stopping on pooled validation Pearson r (patience in epochs); the best
// validation snapshot is restored on return. With an empty validation set the
// full epoch budget runs without early stopping. Deterministic per seed.
TrainResult train_model(ProminenceModel& model,
                        const std::vector<const UtteranceFeatures*>& train,
                        const std::vector<const UtteranceFeatures*>& val,
                        const TrainConfig& config);

struct PooledPredictions {
  Eigen::VectorXd preds;
  Eigen::VectorXd degrees;
  std::vector<int> votes;
};

PooledPredictions predict_pooled(const ProminenceModel& model,
                                 const std::vector<const UtteranceFeatures*>& items);

// Central-difference gradient verification over every parameter entry:
// max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                  double eps = 1e-5);

// Numeric gradient of a single parameter entry, for fault-injection tests.
double fd_gradient(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                   int tensor_index, int entry_index, double eps);

}  // namespace ppl
