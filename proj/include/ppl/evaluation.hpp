#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ppl/corpus.hpp"
#include "ppl/metrics.hpp"
#include "ppl/trainer.hpp"

namespace ppl {

struct FoldPlan {
  int k = 3;
  int inner_k = 4;
  std::map<std::string, int> speaker_fold;

  std::vector<std::string> fold_speakers(int fold) const;
  // word counts per fold, for the balance invariant
  std::vector<long> fold_word_counts(const Corpus& corpus) const;
};

// Greedy largest-first bin packing of speakers by word count into k folds;
// ties among speakers are broken by a seeded shuffle. Speakers never share
// folds. Throws when there are fewer speakers than folds.
FoldPlan split_speaker_folds(const Corpus& corpus, int k, std::uint64_t seed);

struct FoldOutcome {
  int fold = 0;
  ModelSpec best_spec;
  double inner_mean_r = 0.0;
  int retrain_epochs = 0;
  double pearson_r = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  std::vector<std::string> test_speakers;
};

struct CvReport {
  std::string experiment_name;
  std::uint64_t seed = 0;
  double threshold = 0.357;
  std::vector<ModelSpec> grid;
  std::vector<FoldOutcome> folds;
  double mean_r = 0.0, sd_r = 0.0;
  double mean_f = 0.0, sd_f = 0.0;
  bool leak_free = true;
  std::vector<std::string> audit_lines;
};

inline constexpr const char* kReportFormatTag = "ppl-report-v1";

// Speaker-independent 3-fold cross-validation with a speaker-disjoint
// 4-fold grid search inside each train split; the winning config retrains on
// the full train side for the mean best inner epoch count and is scored on
// the untouched test fold. Per-(fold, config, inner) worker seeds derive from
// `seed`, so results are identical for any `jobs`.
CvReport cross_validate(const Corpus& corpus, const std::map<std::string, ContourStack>& contours,
                        const std::vector<ModelSpec>& grid, const TrainConfig& train_config,
                        std::uint64_t fold_seed, const std::string& experiment_name, int jobs = 1);

// The timestamp is injected by the caller and lives only under "meta".
std::string report_to_json(const CvReport& report, const std::string& timestamp);
std::string report_to_csv(const CvReport& report);

// Single speaker-independent split: fold `test_fold` of a 3-fold plan is the
// test side, the smallest train speaker is held out for early stopping.
struct SingleRunResult {
  double pearson_r = 0.0;
  double precision = 0.0, recall = 0.0, fscore = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::vector<double> epoch_losses;
  std::vector<std::string> test_speakers;
};

SingleRunResult train_eval_single(ProminenceModel& model, const Corpus& corpus,
                                  const std::map<std::string, ContourStack>& contours,
                                  const TrainConfig& train_config, std::uint64_t fold_seed,
                                  int test_fold = 0);

}  // namespace ppl
