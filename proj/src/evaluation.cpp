#include "ppl/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ppl/errors.hpp"
#include "ppl/rng.hpp"
#include <nlohmann/json.hpp>

namespace ppl {

using nlohmann::json;

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.size());
  if (y.size() != n) throw ValidationError("pearson: length mismatch");
  if (n < 2) throw ValidationError("pearson: need at least 2 points");
  const Eigen::VectorXd dx = x.array() - x.mean();
  const Eigen::VectorXd dy = y.array() - y.mean();
  const double sx = dx.norm();
  const double sy = dy.norm();
  if (sx == 0.0 || sy == 0.0) throw ValidationError("pearson: constant input vector, r undefined");
  return dx.dot(dy) / (sx * sy);
}

PrF fscore(const Eigen::VectorXd& degrees, const std::vector<int>& votes, double tau) {
  const int n = static_cast<int>(degrees.size());
  if (static_cast<int>(votes.size()) != n) throw ValidationError("fscore: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (int i = 0; i < n; ++i) {
    const bool pred = degrees[i] >= tau;
    const bool label = votes[i] >= kBinaryVoteThreshold;
    if (pred && label) ++tp;
    else if (pred) ++fp;
    else if (label) ++fn;
  }
  PrF out;
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f = out.precision + out.recall > 0.0
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

double population_sd(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / xs.size());
}

std::vector<std::string> FoldPlan::fold_speakers(int fold) const {
  std::vector<std::string> out;
  for (const auto& [speaker, f] : speaker_fold) {
    if (f == fold) out.push_back(speaker);
  }
  return out;
}

std::vector<long> FoldPlan::fold_word_counts(const Corpus& corpus) const {
  std::vector<long> counts(k, 0);
  for (const auto& utt : corpus.utterances) {
    counts[speaker_fold.at(utt.speaker_id)] += utt.num_words();
  }
  return counts;
}

namespace {

std::map<std::string, long> speaker_word_counts(const Corpus& corpus) {
  std::map<std::string, long> counts;
  for (const auto& utt : corpus.utterances) counts[utt.speaker_id] += utt.num_words();
  return counts;
}

FoldPlan pack_speakers(const std::map<std::string, long>& counts, int k, std::uint64_t seed) {
  if (static_cast<int>(counts.size()) < k)
    throw ValidationError("fold split: fewer speakers (" + std::to_string(counts.size()) +
                          ") than folds (" + std::to_string(k) + ")");
  std::vector<std::pair<std::string, long>> order(counts.begin(), counts.end());
  // seeded shuffle breaks ties among equal-sized speakers, then stable sort
  // largest first
  Rng rng(seed);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  FoldPlan plan;
  plan.k = k;
  std::vector<long> load(k, 0);
  for (const auto& [speaker, words] : order) {
    const int fold =
        static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    plan.speaker_fold[speaker] = fold;
    load[fold] += words;
  }
  return plan;
}

}  // namespace

FoldPlan split_speaker_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  return pack_speakers(speaker_word_counts(corpus), k, seed);
}

namespace {

std::vector<const UtteranceFeatures*> select_features(
    const std::vector<UtteranceFeatures>& all, const std::set<std::string>& speakers) {
  std::vector<const UtteranceFeatures*> out;
  for (const auto& f : all) {
    if (speakers.count(f.speaker_id)) out.push_back(&f);
  }
  return out;
}

std::vector<int> utterance_indices_for(const Corpus& corpus, const std::set<std::string>& speakers) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(corpus.utterances.size()); ++i) {
    if (speakers.count(corpus.utterances[i].speaker_id)) out.push_back(i);
  }
  return out;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < std::min(jobs, n); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

CvReport cross_validate(const Corpus& corpus, const std::map<std::string, ContourStack>& contours,
                        const std::vector<ModelSpec>& grid, const TrainConfig& train_config,
                        std::uint64_t fold_seed, const std::string& experiment_name, int jobs) {
  if (grid.empty()) throw ValidationError("cross_validate: empty model grid");
  for (const auto& spec : grid) {
    if (spec.blocks != grid[0].blocks || spec.grouping != grid[0].grouping)
      throw ValidationError("cross_validate: grid entries must share feature blocks");
  }

  CvReport report;
  report.experiment_name = experiment_name;
  report.seed = fold_seed;
  report.threshold = train_config.threshold;
  report.grid = grid;

  const FoldPlan plan = split_speaker_folds(corpus, 3, fold_seed);

  for (int fold = 0; fold < plan.k; ++fold) {
    std::set<std::string> test_speakers, train_speakers;
    for (const auto& [speaker, f] : plan.speaker_fold) {
      (f == fold ? test_speakers : train_speakers).insert(speaker);
    }

    // spectral standardization fitted on the train side only
    const SpectralStats stats =
        spectral_stats_for(corpus, contours, utterance_indices_for(corpus, train_speakers));
    const std::vector<UtteranceFeatures> features =
        featurize_corpus(corpus, contours, grid[0], stats);

    // inner speaker-disjoint folds over the train speakers
    std::map<std::string, long> train_counts;
    for (const auto& [speaker, words] : speaker_word_counts(corpus)) {
      if (train_speakers.count(speaker)) train_counts[speaker] = words;
    }
    const FoldPlan inner =
        pack_speakers(train_counts, plan.inner_k, Rng::splitmix(fold_seed ^ (fold + 101)));

    struct InnerResult {
      double r = 0.0;
      int best_epoch = 1;
    };
    const int n_items = static_cast<int>(grid.size()) * plan.inner_k;
    std::vector<InnerResult> inner_results(n_items);

    parallel_for(n_items, jobs, [&](int item) {
      const int g = item / plan.inner_k;
      const int j = item % plan.inner_k;
      std::set<std::string> inner_val, inner_train;
      for (const auto& [speaker, f] : inner.speaker_fold) {
        (f == j ? inner_val : inner_train).insert(speaker);
      }
      TrainConfig cfg = train_config;
      cfg.seed = Rng::splitmix(train_config.seed ^ Rng::splitmix((fold * 97 + g) * 31 + j));
      ProminenceModel model(grid[g], cfg.seed);
      const auto inner_items = select_features(features, inner_train);
      if (model.spec().static_dim > 0) model.set_feature_scaler(fit_feature_scaler(inner_items));
      const TrainResult tr =
          train_model(model, inner_items, select_features(features, inner_val), cfg);
      inner_results[item] = {tr.best_val_r, std::max(1, tr.best_epoch)};
    });

    // winner: max mean inner r, ties to the earlier grid entry
    int best_g = 0;
    double best_mean = -2.0;
    int best_epochs = 1;
    for (int g = 0; g < static_cast<int>(grid.size()); ++g) {
      double sum_r = 0.0;
      double sum_e = 0.0;
      for (int j = 0; j < plan.inner_k; ++j) {
        sum_r += inner_results[g * plan.inner_k + j].r;
        sum_e += inner_results[g * plan.inner_k + j].best_epoch;
      }
      const double mean_r = sum_r / plan.inner_k;
      if (mean_r > best_mean) {
        best_mean = mean_r;
        best_g = g;
        best_epochs = std::max(1, static_cast<int>(std::lround(sum_e / plan.inner_k)));
      }
    }

    // retrain on the entire train side for the transferred epoch budget
    TrainConfig final_cfg = train_config;
    final_cfg.seed = Rng::splitmix(train_config.seed ^ Rng::splitmix(fold * 97 + 9000));
    final_cfg.max_epochs = best_epochs;
    ProminenceModel model(grid[best_g], final_cfg.seed);
    const auto train_items = select_features(features, train_speakers);
    if (model.spec().static_dim > 0) model.set_feature_scaler(fit_feature_scaler(train_items));
    train_model(model, train_items, {}, final_cfg);

    const auto test_items = select_features(features, test_speakers);
    const PooledPredictions tp = predict_pooled(model, test_items);

    FoldOutcome outcome;
    outcome.fold = fold;
    outcome.best_spec = grid[best_g];
    outcome.inner_mean_r = best_mean;
    outcome.retrain_epochs = best_epochs;
    outcome.pearson_r = pearson(tp.preds, tp.degrees);
    const PrF prf = fscore(tp.preds, tp.votes, train_config.threshold);
    outcome.precision = prf.precision;
    outcome.recall = prf.recall;
    outcome.fscore = prf.f;
    outcome.test_speakers.assign(test_speakers.begin(), test_speakers.end());
    report.folds.push_back(outcome);

    // audit: every utterance trained on must come from a non-test speaker
    std::set<std::string> train_ids;
    for (const auto* u : train_items) train_ids.insert(u->utt_id);
    bool leak = false;
    for (const auto* u : test_items) {
      if (train_ids.count(u->utt_id)) leak = true;
    }
    for (const auto& utt : corpus.utterances) {
      if (test_speakers.count(utt.speaker_id) && train_ids.count(utt.id)) leak = true;
    }
    report.leak_free = report.leak_free && !leak;
    std::ostringstream line;
    line << "fold " << fold << ": train_utts=" << train_items.size()
         << " test_utts=" << test_items.size() << " test_speakers=";
    for (const auto& s : outcome.test_speakers) line << s << ";";
    line << " leak=" << (leak ? "yes" : "no");
    report.audit_lines.push_back(line.str());
  }

  std::vector<double> rs, fs;
  for (const auto& f : report.folds) {
    rs.push_back(f.pearson_r);
    fs.push_back(f.fscore);
  }
  report.mean_r = mean_of(rs);
  report.sd_r = population_sd(rs);
  report.mean_f = mean_of(fs);
  report.sd_f = population_sd(fs);
  return report;
}

std::string report_to_json(const CvReport& report, const std::string& timestamp) {
  json grid = json::array();
  for (const auto& spec : report.grid) grid.push_back(json::parse(model_spec_to_json(spec)));
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back(json{{"fold", f.fold},
                         {"best_config", json::parse(model_spec_to_json(f.best_spec))},
                         {"best_config_label", f.best_spec.label()},
                         {"inner_mean_r", f.inner_mean_r},
                         {"retrain_epochs", f.retrain_epochs},
                         {"pearson_r", f.pearson_r},
                         {"precision", f.precision},
                         {"recall", f.recall},
                         {"fscore", f.fscore},
                         {"test_speakers", f.test_speakers}});
  }
  json j{{"format", kReportFormatTag},
         {"experiment_name", report.experiment_name},
         {"seed", report.seed},
         {"threshold", report.threshold},
         {"grid", grid},
         {"folds", folds},
         {"mean", {{"pearson_r", report.mean_r}, {"fscore", report.mean_f}}},
         {"sd", {{"pearson_r", report.sd_r}, {"fscore", report.sd_f}}},
         {"audit", {{"leak_free", report.leak_free}, {"lines", report.audit_lines}}},
         {"meta", {{"timestamp", timestamp}}}};
  return j.dump(2) + "\n";
}

std::string report_to_csv(const CvReport& report) {
  std::ostringstream out;
  out << "experiment,fold,config,pearson_r,precision,recall,fscore\n";
  char buf[256];
  for (const auto& f : report.folds) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%s,%.9g,%.9g,%.9g,%.9g\n",
                  report.experiment_name.c_str(), f.fold, f.best_spec.label().c_str(),
                  f.pearson_r, f.precision, f.recall, f.fscore);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%s,mean,,%.9g,,,%.9g\n", report.experiment_name.c_str(),
                report.mean_r, report.mean_f);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%s,sd,,%.9g,,,%.9g\n", report.experiment_name.c_str(),
                report.sd_r, report.sd_f);
  out << buf;
  return out.str();
}

SingleRunResult train_eval_single(ProminenceModel& model, const Corpus& corpus,
                                  const std::map<std::string, ContourStack>& contours,
                                  const TrainConfig& train_config, std::uint64_t fold_seed,
                                  int test_fold) {
  const FoldPlan plan = split_speaker_folds(corpus, 3, fold_seed);
  if (test_fold < 0 || test_fold >= plan.k)
    throw ValidationError("train_eval_single: test_fold out of range");

  std::set<std::string> test_speakers, train_speakers;
  for (const auto& [speaker, f] : plan.speaker_fold) {
    (f == test_fold ? test_speakers : train_speakers).insert(speaker);
  }
  // smallest train speaker becomes the early-stopping validation set
  std::string val_speaker;
  long val_words = 0;
  for (const auto& [speaker, words] : speaker_word_counts(corpus)) {
    if (!train_speakers.count(speaker)) continue;
    if (val_speaker.empty() || words < val_words) {
      val_speaker = speaker;
      val_words = words;
    }
  }
  train_speakers.erase(val_speaker);

  const SpectralStats stats =
      spectral_stats_for(corpus, contours, utterance_indices_for(corpus, train_speakers));
  const std::vector<UtteranceFeatures> features =
      featurize_corpus(corpus, contours, model.spec(), stats);
  model.set_spectral_stats(stats);

  const auto train_items = select_features(features, train_speakers);
  if (model.spec().static_dim > 0) model.set_feature_scaler(fit_feature_scaler(train_items));
  const TrainResult tr =
      train_model(model, train_items, select_features(features, {val_speaker}), train_config);

  const auto test_items = select_features(features, test_speakers);
  const PooledPredictions tp = predict_pooled(model, test_items);

  SingleRunResult out;
  out.pearson_r = pearson(tp.preds, tp.degrees);
  const PrF prf = fscore(tp.preds, tp.votes, train_config.threshold);
  out.precision = prf.precision;
  out.recall = prf.recall;
  out.fscore = prf.f;
  out.epochs_run = tr.epochs_run;
  out.best_epoch = tr.best_epoch;
  out.epoch_losses = tr.epoch_losses;
  out.test_speakers.assign(test_speakers.begin(), test_speakers.end());
  return out;
}

}  // namespace ppl
