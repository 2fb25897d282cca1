#include "ppl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppl/errors.hpp"
#include "ppl/metrics.hpp"
#include "ppl/nn_ops.hpp"

namespace ppl {

std::vector<UtteranceFeatures> featurize_corpus(
    const Corpus& corpus, const std::map<std::string, ContourStack>& contours,
    const ModelSpec& spec, const SpectralStats& stats) {
  const GroupingScheme scheme = builtin_grouping(spec.grouping);
  std::vector<FeatureBlock> static_blocks;
  for (FeatureBlock b : spec.blocks) {
    if (b != FeatureBlock::Cnn) static_blocks.push_back(b);
  }

  std::vector<UtteranceFeatures> out;
  out.reserve(corpus.utterances.size());
  for (const Utterance& utt : corpus.utterances) {
    const auto it = contours.find(utt.id);
    if (it == contours.end())
      throw ValidationError("featurize: no contours for utterance '" + utt.id + "'");
    const ContourStack normalized = zscore_utterance(it->second, &stats);

    UtteranceFeatures f;
    f.utt_id = utt.id;
    f.speaker_id = utt.speaker_id;
    f.utterance = &utt;
    f.statics = build_static_features(normalized, utt, static_blocks, scheme);
    if (spec.uses_cnn()) {
      f.stack = normalized;
      f.has_stack = true;
    }
    const int n = utt.num_words();
    f.degrees.resize(n);
    f.votes.resize(n);
    for (int i = 0; i < n; ++i) {
      f.degrees[i] = degree_label(utt.words[i]);
      f.votes[i] = utt.words[i].votes;
    }
    out.push_back(std::move(f));
  }
  return out;
}

SpectralStats spectral_stats_for(const Corpus& corpus,
                                 const std::map<std::string, ContourStack>& contours,
                                 const std::vector<int>& utterance_indices) {
  std::vector<const ContourStack*> stacks;
  for (int i : utterance_indices) {
    const auto it = contours.find(corpus.utterances[i].id);
    if (it == contours.end())
      throw ValidationError("spectral stats: no contours for '" + corpus.utterances[i].id + "'");
    stacks.push_back(&it->second);
  }
  if (stacks.empty()) throw ValidationError("spectral stats: empty utterance set");
  return compute_spectral_stats(stacks);
}

namespace {

// Padded batch grid: predictions/targets laid out B x T_max with a mask on
// real word positions.
struct BatchGrid {
  Eigen::VectorXd preds, targets;
  std::vector<std::uint8_t> mask;
  int t_max = 0;
};

BatchGrid make_grid(const std::vector<const UtteranceFeatures*>& batch,
                    const std::vector<Eigen::VectorXd>& preds) {
  BatchGrid grid;
  for (const auto* u : batch) grid.t_max = std::max(grid.t_max, u->num_words());
  const int cells = static_cast<int>(batch.size()) * grid.t_max;
  grid.preds.setZero(cells);
  grid.targets.setZero(cells);
  grid.mask.assign(cells, 0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int n = batch[b]->num_words();
    for (int t = 0; t < n; ++t) {
      const int k = static_cast<int>(b) * grid.t_max + t;
      grid.preds[k] = preds[b][t];
      grid.targets[k] = batch[b]->degrees[t];
      grid.mask[k] = 1;
    }
  }
  return grid;
}

}  // namespace

double batch_backward(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                      bool training, Rng* dropout_rng) {
  std::vector<ForwardCache> caches(batch.size());
  std::vector<Eigen::VectorXd> preds(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    preds[b] = model.forward(*batch[b], training, dropout_rng, &caches[b]);
  }
  const BatchGrid grid = make_grid(batch, preds);
  Eigen::VectorXd d_grid;
  const double loss = mse_masked(grid.preds, grid.targets, grid.mask, &d_grid);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int n = batch[b]->num_words();
    const Eigen::VectorXd d_pred = d_grid.segment(static_cast<int>(b) * grid.t_max, n);
    model.backward(*batch[b], caches[b], d_pred);
  }
  return loss;
}

double batch_loss(const ProminenceModel& model,
                  const std::vector<const UtteranceFeatures*>& batch) {
  std::vector<Eigen::VectorXd> preds(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) preds[b] = model.predict(*batch[b]);
  const BatchGrid grid = make_grid(batch, preds);
  return mse_masked(grid.preds, grid.targets, grid.mask);
}

PooledPredictions predict_pooled(const ProminenceModel& model,
                                 const std::vector<const UtteranceFeatures*>& items) {
  PooledPredictions out;
  long total = 0;
  for (const auto* u : items) total += u->num_words();
  out.preds.resize(total);
  out.degrees.resize(total);
  out.votes.reserve(total);
  long at = 0;
  for (const auto* u : items) {
    const Eigen::VectorXd p = model.predict(*u);
    out.preds.segment(at, u->num_words()) = p;
    out.degrees.segment(at, u->num_words()) = u->degrees;
    out.votes.insert(out.votes.end(), u->votes.begin(), u->votes.end());
    at += u->num_words();
  }
  return out;
}

TrainResult train_model(ProminenceModel& model,
                        const std::vector<const UtteranceFeatures*>& train,
                        const std::vector<const UtteranceFeatures*>& val,
                        const TrainConfig& config) {
  if (train.empty()) throw ValidationError("train: empty training set");

  AdamWState opt;
  opt.lr = config.lr;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.eps = config.eps;
  opt.weight_decay = config.weight_decay;
  opt.reset(model.params());

  Rng rng(config.seed);
  Rng dropout_rng = rng.fork(0xd20);

  TrainResult result;
  std::vector<Eigen::VectorXd> best_values;
  int since_best = 0;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // seeded permutation of whole utterances per epoch
    Rng shuffle_rng = rng.fork(epoch);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
    }

    double sse = 0.0;
    long words = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_utterances) {
      std::vector<const UtteranceFeatures*> batch;
      for (std::size_t k = at; k < std::min(order.size(), at + config.batch_utterances); ++k) {
        batch.push_back(train[order[k]]);
      }
      model.params().zero_grad();
      double loss;
      try {
        loss = batch_backward(model, batch, /*training=*/true, &dropout_rng);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(at / config.batch_utterances) + ": " + e.what());
      }
      if (!std::isfinite(loss))
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(at / config.batch_utterances) + ": non-finite loss");
      model.params().clip_grad_norm(config.clip_norm);
      adamw_step(model.params(), opt);

      long batch_words = 0;
      for (const auto* u : batch) batch_words += u->num_words();
      sse += loss * batch_words;
      words += batch_words;
    }
    result.epoch_losses.push_back(sse / words);
    result.epochs_run = epoch;

    if (!val.empty()) {
      const PooledPredictions vp = predict_pooled(model, val);
      double r;
      try {
        r = pearson(vp.preds, vp.degrees);
      } catch (const ValidationError&) {
        r = 0.0;  // constant predictions early in training
      }
      if (result.best_epoch == 0 || r > result.best_val_r) {
        result.best_val_r = r;
        result.best_epoch = epoch;
        since_best = 0;
        best_values.clear();
        for (const auto& p : model.params().tensors()) best_values.push_back(p.values);
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }

  if (!best_values.empty()) {
    for (int i = 0; i < model.params().count(); ++i) model.params()[i].values = best_values[i];
  }
  return result;
}

double fd_gradient(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                   int tensor_index, int entry_index, double eps) {
  double& theta = model.params()[tensor_index].values[entry_index];
  const double saved = theta;
  theta = saved + eps;
  const double up = batch_loss(model, batch);
  theta = saved - eps;
  const double down = batch_loss(model, batch);
  theta = saved;
  if (!std::isfinite(up) || !std::isfinite(down))
    throw NumericalError("grad check: non-finite loss during finite differences");
  return (up - down) / (2.0 * eps);
}

double grad_check(ProminenceModel& model, const std::vector<const UtteranceFeatures*>& batch,
                  double eps) {
  model.params().zero_grad();
  const double loss = batch_backward(model, batch, /*training=*/false, nullptr);
  if (!std::isfinite(loss)) throw NumericalError("grad check: non-finite loss");

  double max_err = 0.0;
  for (int i = 0; i < model.params().count(); ++i) {
    const Eigen::VectorXd analytic = model.params()[i].grad;
    for (int k = 0; k < analytic.size(); ++k) {
      const double numeric = fd_gradient(model, batch, i, k, eps);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
      max_err = std::max(max_err, std::abs(analytic[k] - numeric) / denom);
    }
  }
  return max_err;
}

}  // namespace ppl
