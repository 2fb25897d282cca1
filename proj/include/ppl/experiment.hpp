#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppl/evaluation.hpp"
#include "ppl/sequence_model.hpp"
#include "ppl/synth.hpp"
#include "ppl/trainer.hpp"

namespace ppl {

// Declarative experiment description parsed from a plain-text key=value file
// ('#' comments). rnn.* keys accept comma lists and expand to a grid.
struct ExperimentConfig {
  std::string name;
  std::string corpus_path;
  std::string contours_dir;
  std::vector<FeatureBlock> blocks{FeatureBlock::A34};
  GroupingName grouping = GroupingName::Tags13;
  std::string grouping_file;  // optional mapping override
  CnnConfig cnn;
  std::vector<CellType> cells{CellType::GRU};
  std::vector<int> bidirectional{1};
  std::vector<int> layers{2};
  std::vector<int> units{96};
  double dropout_p = 0.2;
  TrainConfig train;
  std::uint64_t seed = 7;
  int test_fold = 0;
};

ExperimentConfig load_experiment_config(const std::string& path);

// Cross product of the rnn.* lists; grid sizes are held to the allowed
// ranges (layers 1..3, units {48,96,128,256,512}).
std::vector<ModelSpec> build_grid(const ExperimentConfig& config);

// Contour CSVs named <utterance id>.csv in one directory.
std::map<std::string, ContourStack> load_contours_dir(const Corpus& corpus,
                                                      const std::string& dir);

// --- CLI commands. All validate inputs, write outputs atomically and throw
// --- ValidationError / NumericalError on failure (the CLI maps these to
// --- exit codes 1 / 2).

void cmd_synth(int n_speakers, int n_utterances, std::uint64_t seed, const std::string& out_dir,
               bool emit_audio);

void cmd_extract(const std::string& corpus_path, const std::string& audio_dir,
                 const std::string& out_dir);

void cmd_featurize(const std::string& corpus_path, const std::string& contours_dir,
                   const std::string& blocks_csv, const std::string& out_dir);

void cmd_train(const std::string& config_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed_override,
               std::optional<double> threshold_override);

void cmd_cv(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, std::optional<double> threshold_override,
            int jobs);

void cmd_predict(const std::string& checkpoint_path, const std::string& corpus_path,
                 const std::string& contours_dir, const std::string& out_path, double threshold);

// Returns the max relative gradient error of the smallest end-to-end model
// (CNN widths {25,51} x 2 filters + BGRU 1x16 + sigmoid head) or, with a
// config, of the config's first grid entry, on a small synthetic batch.
double cmd_gradcheck(const std::string& config_path, std::uint64_t seed);

}  // namespace ppl
