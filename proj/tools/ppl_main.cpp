// ppl: word-prominence scoring toolkit CLI.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ppl/errors.hpp"
#include "ppl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ppl - word prominence scoring for oral reading"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a calibrated synthetic corpus + contours");
  int n_speakers = 12, n_utterances = 240;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "data/synth";
  bool synth_audio = false;
  synth->add_option("--speakers", n_speakers, "number of speakers (>= 3)");
  synth->add_option("--utterances", n_utterances, "number of utterances");
  synth->add_option("--seed", synth_seed, "generator seed")->envname("PPL_SEED");
  synth->add_option("--out", synth_out, "output directory")->envname("PPL_OUT");
  synth->add_flag("--audio", synth_audio, "also emit sine+noise audio for frontend smoke tests");

  // extract
  auto* extract = app.add_subcommand("extract", "compute contour CSVs from WAV audio");
  std::string ex_corpus, ex_audio_dir, ex_out;
  extract->add_option("--corpus", ex_corpus, "corpus JSONL")->required()->envname("PPL_CORPUS");
  extract->add_option("--audio-dir", ex_audio_dir, "directory with WAV files")->required();
  extract->add_option("--out", ex_out, "output directory")->required()->envname("PPL_OUT");

  // featurize
  auto* feat = app.add_subcommand("featurize", "dump per-word feature CSVs");
  std::string ft_corpus, ft_contours, ft_blocks = "a34,a10,dp12,lex,info", ft_out;
  feat->add_option("--corpus", ft_corpus, "corpus JSONL")->required()->envname("PPL_CORPUS");
  feat->add_option("--contours", ft_contours, "contour CSV directory")
      ->required()
      ->envname("PPL_CONTOURS");
  feat->add_option("--blocks", ft_blocks, "comma list of a34,a10,dp12,lex,info");
  feat->add_option("--out", ft_out, "output directory")->required()->envname("PPL_OUT");

  // train
  auto* train = app.add_subcommand("train", "train one model on a speaker-independent split");
  std::string tr_config, tr_out = "out/train";
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_threshold;
  train->add_option("--config", tr_config, "experiment config file")
      ->required()
      ->envname("PPL_CONFIG");
  train->add_option("--out", tr_out, "output directory")->envname("PPL_OUT");
  train->add_option("--seed", tr_seed, "override config seed")->envname("PPL_SEED");
  train->add_option("--threshold", tr_threshold, "override binarization threshold")
      ->envname("PPL_THRESHOLD");

  // cv
  auto* cv = app.add_subcommand("cv", "3-fold speaker-independent cross-validation over a grid");
  std::string cv_config, cv_out = "out/cv";
  std::optional<std::uint64_t> cv_seed;
  std::optional<double> cv_threshold;
  int cv_jobs = 1;
  cv->add_option("--config", cv_config, "experiment config file")
      ->required()
      ->envname("PPL_CONFIG");
  cv->add_option("--out", cv_out, "output directory")->envname("PPL_OUT");
  cv->add_option("--seed", cv_seed, "override config seed")->envname("PPL_SEED");
  cv->add_option("--threshold", cv_threshold, "override binarization threshold")
      ->envname("PPL_THRESHOLD");
  cv->add_option("--jobs", cv_jobs, "parallel workers (default 1 for reproducibility)")
      ->envname("PPL_JOBS");

  // predict
  auto* predict = app.add_subcommand("predict", "score a corpus with a trained checkpoint");
  std::string pr_checkpoint, pr_corpus, pr_contours, pr_out = "predictions.csv";
  double pr_threshold = 0.357;
  predict->add_option("--checkpoint", pr_checkpoint, "model checkpoint JSON")->required();
  predict->add_option("--corpus", pr_corpus, "corpus JSONL")->required()->envname("PPL_CORPUS");
  predict->add_option("--contours", pr_contours, "contour CSV directory")
      ->required()
      ->envname("PPL_CONTOURS");
  predict->add_option("--out", pr_out, "output CSV")->envname("PPL_OUT");
  predict->add_option("--threshold", pr_threshold, "binary decision threshold")
      ->envname("PPL_THRESHOLD");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_config;
  std::uint64_t gc_seed = 7;
  gradcheck->add_option("--config", gc_config, "optional experiment config (uses grid[0])");
  gradcheck->add_option("--seed", gc_seed, "probe seed")->envname("PPL_SEED");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      ppl::cmd_synth(n_speakers, n_utterances, synth_seed, synth_out, synth_audio);
      std::cout << "wrote corpus + contours to " << synth_out << "\n";
    } else if (extract->parsed()) {
      ppl::cmd_extract(ex_corpus, ex_audio_dir, ex_out);
      std::cout << "wrote contour CSVs to " << ex_out << "\n";
    } else if (feat->parsed()) {
      ppl::cmd_featurize(ft_corpus, ft_contours, ft_blocks, ft_out);
      std::cout << "wrote feature CSVs to " << ft_out << "\n";
    } else if (train->parsed()) {
      ppl::cmd_train(tr_config, tr_out, tr_seed, tr_threshold);
      std::cout << "wrote checkpoint + report to " << tr_out << "\n";
    } else if (cv->parsed()) {
      ppl::cmd_cv(cv_config, cv_out, cv_seed, cv_threshold, cv_jobs);
      std::cout << "wrote report to " << cv_out << "\n";
    } else if (predict->parsed()) {
      ppl::cmd_predict(pr_checkpoint, pr_corpus, pr_contours, pr_out, pr_threshold);
      std::cout << "wrote predictions to " << pr_out << "\n";
    } else if (gradcheck->parsed()) {
      const double err = ppl::cmd_gradcheck(gc_config, gc_seed);
      std::cout << "max relative gradient error: " << err << "\n";
      if (err > 1e-4) {
        std::cerr << "gradcheck FAILED (tolerance 1e-4)\n";
        return 2;
      }
    }
  } catch (const ppl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const ppl::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ppl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
