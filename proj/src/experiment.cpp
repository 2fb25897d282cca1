#include "ppl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"
#include <nlohmann/json.hpp>

namespace ppl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    return std::stoi(s);
  } catch (...) {
    throw ValidationError("config: bad integer for " + key + ": '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    return std::stod(s);
  } catch (...) {
    throw ValidationError("config: bad number for " + key + ": '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValidationError("config: bad boolean for " + key + ": '" + s + "'");
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment config: " + path);

  ExperimentConfig cfg;
  cfg.name = fs::path(path).stem().string();

  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };

  for (const auto& [key, value] : kv) {
    if (key == "name") cfg.name = value;
    else if (key == "corpus") cfg.corpus_path = resolve(value);
    else if (key == "contours") cfg.contours_dir = resolve(value);
    else if (key == "features") {
      cfg.blocks.clear();
      for (const auto& b : split_csv(value)) cfg.blocks.push_back(feature_block_from_string(b));
    } else if (key == "lex.grouping") cfg.grouping = grouping_from_string(value);
    else if (key == "lex.grouping_file") cfg.grouping_file = resolve(value);
    else if (key == "cnn.widths") {
      cfg.cnn.widths.clear();
      for (const auto& w : split_csv(value)) cfg.cnn.widths.push_back(parse_int(w, key));
    } else if (key == "cnn.filters") cfg.cnn.filters_per_width = parse_int(value, key);
    else if (key == "cnn.channels") cfg.cnn.channels = channel_mode_from_string(value);
    else if (key == "cnn.position") cfg.cnn.position_encoding = position_encoding_from_string(value);
    else if (key == "cnn.segment") cfg.cnn.segment_mode = segment_mode_from_string(value);
    else if (key == "cnn.pool") cfg.cnn.bank_pool = value == "avg" ? BankPool::Average : BankPool::Max;
    else if (key == "cnn.context") cfg.cnn.context_words = parse_int(value, key);
    else if (key == "rnn.cell") {
      cfg.cells.clear();
      for (const auto& c : split_csv(value)) cfg.cells.push_back(cell_from_string(c));
    } else if (key == "rnn.bidirectional") {
      cfg.bidirectional.clear();
      for (const auto& b : split_csv(value)) cfg.bidirectional.push_back(parse_bool(b, key) ? 1 : 0);
    } else if (key == "rnn.layers") {
      cfg.layers.clear();
      for (const auto& l : split_csv(value)) cfg.layers.push_back(parse_int(l, key));
    } else if (key == "rnn.units") {
      cfg.units.clear();
      for (const auto& u : split_csv(value)) cfg.units.push_back(parse_int(u, key));
    } else if (key == "rnn.dropout") cfg.dropout_p = parse_double(value, key);
    else if (key == "train.lr") cfg.train.lr = parse_double(value, key);
    else if (key == "train.batch_utterances") cfg.train.batch_utterances = parse_int(value, key);
    else if (key == "train.max_epochs") cfg.train.max_epochs = parse_int(value, key);
    else if (key == "train.patience") cfg.train.patience = parse_int(value, key);
    else if (key == "train.threshold") cfg.train.threshold = parse_double(value, key);
    else if (key == "train.clip_norm") cfg.train.clip_norm = parse_double(value, key);
    else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double(value, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "test_fold") cfg.test_fold = parse_int(value, key);
    else throw ValidationError("config " + path + ": unknown key '" + key + "'");
  }
  if (cfg.blocks.empty()) throw ValidationError("config " + path + ": empty feature set");
  if (cfg.train.threshold <= 0.0 || cfg.train.threshold >= 1.0)
    throw ValidationError("config " + path + ": threshold must be in (0, 1)");
  cfg.train.seed = cfg.seed;
  return cfg;
}

std::vector<ModelSpec> build_grid(const ExperimentConfig& cfg) {
  const GroupingScheme scheme = cfg.grouping_file.empty()
                                    ? builtin_grouping(cfg.grouping)
                                    : load_grouping(cfg.grouping_file, cfg.grouping);
  std::vector<ModelSpec> grid;
  for (CellType cell : cfg.cells) {
    for (int bidi : cfg.bidirectional) {
      for (int layers : cfg.layers) {
        if (!layers_in_grid(layers))
          throw ValidationError("config: layers must be in {1,2,3}, got " +
                                std::to_string(layers));
        for (int units : cfg.units) {
          if (!units_in_grid(units))
            throw ValidationError("config: units must be in {48,96,128,256,512}, got " +
                                  std::to_string(units));
          ModelSpec spec;
          spec.rnn.cell = cell;
          spec.rnn.bidirectional = bidi != 0;
          spec.rnn.layers = layers;
          spec.rnn.units = units;
          spec.rnn.dropout_p = cfg.dropout_p;
          spec.blocks = cfg.blocks;
          spec.cnn = cfg.cnn;
          spec.grouping = cfg.grouping;
          spec.static_dim = static_dim_for(cfg.blocks, scheme);
          grid.push_back(spec);
        }
      }
    }
  }
  return grid;
}

std::map<std::string, ContourStack> load_contours_dir(const Corpus& corpus,
                                                      const std::string& dir) {
  std::map<std::string, ContourStack> out;
  for (const auto& utt : corpus.utterances) {
    const fs::path p = fs::path(dir) / (utt.id + ".csv");
    if (!fs::exists(p))
      throw ValidationError("missing contour file for utterance '" + utt.id + "': " + p.string());
    out[utt.id] = read_contours_csv(p.string());
  }
  return out;
}

void cmd_synth(int n_speakers, int n_utterances, std::uint64_t seed, const std::string& out_dir,
               bool emit_audio) {
  SynthOptions options;
  options.emit_audio = emit_audio;
  SynthResult result = synth_corpus(n_speakers, n_utterances, seed, options);

  fs::create_directories(fs::path(out_dir) / "contours");
  if (emit_audio) fs::create_directories(fs::path(out_dir) / "audio");
  for (auto& utt : result.corpus.utterances) {
    utt.contour_ref = "contours/" + utt.id + ".csv";
    write_contours_csv(result.contours.at(utt.id), (fs::path(out_dir) / utt.contour_ref).string());
    if (emit_audio) {
      utt.audio_ref = "audio/" + utt.id + ".wav";
      write_wav(result.audio.at(utt.id), (fs::path(out_dir) / utt.audio_ref).string());
    }
  }
  save_corpus(result.corpus, (fs::path(out_dir) / "corpus.jsonl").string());
}

void cmd_extract(const std::string& corpus_path, const std::string& audio_dir,
                 const std::string& out_dir) {
  const Corpus corpus = load_corpus(corpus_path);
  for (const auto& utt : corpus.utterances) {
    const std::string name = utt.audio_ref.empty() ? utt.id + ".wav" : utt.audio_ref;
    const fs::path wav = fs::path(audio_dir) / name;
    const AudioBuffer audio = read_wav(wav.string());
    const ContourStack stack = extract_contours(audio, utt);
    write_contours_csv(stack, (fs::path(out_dir) / (utt.id + ".csv")).string());
  }
}

void cmd_featurize(const std::string& corpus_path, const std::string& contours_dir,
                   const std::string& blocks_csv, const std::string& out_dir) {
  const Corpus corpus = load_corpus(corpus_path);
  const auto contours = load_contours_dir(corpus, contours_dir);

  std::vector<FeatureBlock> blocks;
  for (const auto& b : split_csv(blocks_csv)) blocks.push_back(feature_block_from_string(b));
  if (blocks.empty()) throw ValidationError("featurize: no feature blocks given");
  const GroupingScheme scheme = builtin_grouping(GroupingName::Tags13);

  // corpus-global spectral standardization for the dump
  std::vector<const ContourStack*> stacks;
  for (const auto& [id, stack] : contours) stacks.push_back(&stack);
  const SpectralStats stats = compute_spectral_stats(stacks);

  const auto names = feature_names(blocks, scheme);
  for (const auto& utt : corpus.utterances) {
    const ContourStack normalized = zscore_utterance(contours.at(utt.id), &stats);
    const Eigen::MatrixXd feats = build_static_features(normalized, utt, blocks, scheme);
    write_features_csv(feats, names, utt, (fs::path(out_dir) / (utt.id + ".csv")).string());
  }
}

namespace {

struct LoadedExperiment {
  ExperimentConfig cfg;
  std::vector<ModelSpec> grid;
  Corpus corpus;
  std::map<std::string, ContourStack> contours;
};

LoadedExperiment load_experiment(const std::string& config_path,
                                 std::optional<std::uint64_t> seed_override,
                                 std::optional<double> threshold_override) {
  LoadedExperiment exp;
  exp.cfg = load_experiment_config(config_path);
  if (seed_override.has_value()) {
    exp.cfg.seed = *seed_override;
    exp.cfg.train.seed = *seed_override;
  }
  if (threshold_override.has_value()) exp.cfg.train.threshold = *threshold_override;
  if (exp.cfg.corpus_path.empty()) throw ValidationError("config: missing corpus path");
  if (exp.cfg.contours_dir.empty()) throw ValidationError("config: missing contours dir");
  exp.grid = build_grid(exp.cfg);
  exp.corpus = load_corpus(exp.cfg.corpus_path);
  exp.contours = load_contours_dir(exp.corpus, exp.cfg.contours_dir);
  return exp;
}

}  // namespace

void cmd_train(const std::string& config_path, const std::string& out_dir,
               std::optional<std::uint64_t> seed_override,
               std::optional<double> threshold_override) {
  LoadedExperiment exp = load_experiment(config_path, seed_override, threshold_override);
  if (exp.grid.size() != 1)
    throw ValidationError("train: config expands to a grid of " +
                          std::to_string(exp.grid.size()) + "; use the cv command for grids");

  ProminenceModel model(exp.grid[0], exp.cfg.seed);
  const SingleRunResult run = train_eval_single(model, exp.corpus, exp.contours, exp.cfg.train,
                                                exp.cfg.seed, exp.cfg.test_fold);

  fs::create_directories(out_dir);
  model.save_checkpoint((fs::path(out_dir) / "checkpoint.json").string());

  json j{{"format", kReportFormatTag},
         {"experiment_name", exp.cfg.name},
         {"seed", exp.cfg.seed},
         {"threshold", exp.cfg.train.threshold},
         {"model", json::parse(model_spec_to_json(exp.grid[0]))},
         {"test_fold", exp.cfg.test_fold},
         {"test_speakers", run.test_speakers},
         {"pearson_r", run.pearson_r},
         {"precision", run.precision},
         {"recall", run.recall},
         {"fscore", run.fscore},
         {"epochs_run", run.epochs_run},
         {"best_epoch", run.best_epoch},
         {"epoch_losses", run.epoch_losses},
         {"meta", {{"timestamp", iso_timestamp()}}}};
  write_file_atomic((fs::path(out_dir) / "train_report.json").string(), j.dump(2) + "\n");
}

void cmd_cv(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, std::optional<double> threshold_override,
            int jobs) {
  LoadedExperiment exp = load_experiment(config_path, seed_override, threshold_override);
  const CvReport report = cross_validate(exp.corpus, exp.contours, exp.grid, exp.cfg.train,
                                         exp.cfg.seed, exp.cfg.name, jobs);
  fs::create_directories(out_dir);
  write_file_atomic((fs::path(out_dir) / "report.json").string(),
                    report_to_json(report, iso_timestamp()));
  write_file_atomic((fs::path(out_dir) / "report.csv").string(), report_to_csv(report));
}

void cmd_predict(const std::string& checkpoint_path, const std::string& corpus_path,
                 const std::string& contours_dir, const std::string& out_path, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ValidationError("predict: threshold must be in (0, 1)");
  ProminenceModel model = ProminenceModel::load_checkpoint(checkpoint_path);
  const Corpus corpus = load_corpus(corpus_path);
  const auto contours = load_contours_dir(corpus, contours_dir);

  SpectralStats stats;
  if (model.spectral_stats().has_value()) {
    stats = *model.spectral_stats();
  } else {
    std::vector<const ContourStack*> stacks;
    for (const auto& [id, stack] : contours) stacks.push_back(&stack);
    stats = compute_spectral_stats(stacks);
  }
  const auto features = featurize_corpus(corpus, contours, model.spec(), stats);

  std::ostringstream out;
  out << "utt_id,word_index,text,degree,prominent\n";
  char buf[64];
  for (const auto& f : features) {
    const Eigen::VectorXd preds = model.predict(f);
    for (int i = 0; i < f.num_words(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", preds[i]);
      out << f.utt_id << ',' << i << ',' << f.utterance->words[i].text << ',' << buf << ','
          << (preds[i] >= threshold ? 1 : 0) << '\n';
    }
  }
  write_file_atomic(out_path, out.str());
}

double cmd_gradcheck(const std::string& config_path, std::uint64_t seed) {
  ModelSpec spec;
  if (!config_path.empty()) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    spec = build_grid(cfg)[0];
  } else {
    // smallest end-to-end model: default widths, 2 filters each, BGRU 1x16
    spec.blocks = {FeatureBlock::Cnn};
    spec.cnn.widths = {25, 51};
    spec.cnn.filters_per_width = 2;
    spec.rnn.cell = CellType::GRU;
    spec.rnn.bidirectional = true;
    spec.rnn.layers = 1;
    spec.rnn.units = 16;
    spec.static_dim = 0;
  }

  // one short synthetic utterance as the probe batch; 8 words keeps every
  // gradient entry well above the finite-difference noise floor
  SynthResult synth = synth_corpus(3, 3, seed);
  Corpus mini;
  Utterance utt = synth.corpus.utterances[0];
  utt.words.resize(8);
  mini.utterances.push_back(utt);
  std::map<std::string, ContourStack> contours{{utt.id, synth.contours.at(utt.id)}};

  if (spec.static_dim == 0 && !spec.uses_cnn()) {
    // config without CNN: measure on its own static blocks
    spec.static_dim = static_dim_for(spec.blocks, builtin_grouping(spec.grouping));
  }
  std::vector<const ContourStack*> stacks{&contours.at(utt.id)};
  const SpectralStats stats = compute_spectral_stats(stacks);
  const auto features = featurize_corpus(mini, contours, spec, stats);
  std::vector<const UtteranceFeatures*> batch{&features[0]};

  ProminenceModel model(spec, seed);
  return grad_check(model, batch, 1e-5);
}

}  // namespace ppl
