#include "ppl/sequence_model.hpp"

#include <cmath>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"
#include <nlohmann/json.hpp>

namespace ppl {

using nlohmann::json;

CellType cell_from_string(const std::string& s) {
  if (s == "gru") return CellType::GRU;
  if (s == "lstm") return CellType::LSTM;
  throw ValidationError("unknown RNN cell: '" + s + "'");
}

const char* to_string(CellType cell) { return cell == CellType::GRU ? "gru" : "lstm"; }

bool layers_in_grid(int layers) { return layers >= 1 && layers <= 3; }

bool units_in_grid(int units) {
  for (int u : {48, 96, 128, 256, 512}) {
    if (units == u) return true;
  }
  return false;
}

bool ModelSpec::uses_cnn() const {
  for (FeatureBlock b : blocks) {
    if (b == FeatureBlock::Cnn) return true;
  }
  return false;
}

int ModelSpec::input_dim() const {
  return static_dim + (uses_cnn() ? cnn.encoding_dim() : 0);
}

std::string ModelSpec::label() const {
  std::string s = rnn.bidirectional ? "B" : "";
  s += rnn.cell == CellType::GRU ? "GRU" : "LSTM";
  s += "-" + std::to_string(rnn.layers) + "x" + std::to_string(rnn.units);
  return s;
}

int static_dim_for(const std::vector<FeatureBlock>& blocks, const GroupingScheme& scheme) {
  int d = 0;
  for (FeatureBlock b : blocks) {
    switch (b) {
      case FeatureBlock::Cnn: break;
      case FeatureBlock::A34: d += kA34Dim; break;
      case FeatureBlock::A10: d += kA10Dim; break;
      case FeatureBlock::Dp12: d += kDp12Dim; break;
      case FeatureBlock::Lex: d += scheme.group_count + 2; break;
      case FeatureBlock::Info: d += kInfoDim; break;
    }
  }
  return d;
}

namespace {

int gates_for(CellType cell) { return cell == CellType::GRU ? 3 : 4; }

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

FeatureScaler fit_feature_scaler(const std::vector<const UtteranceFeatures*>& items) {
  if (items.empty()) throw ValidationError("feature scaler: empty training set");
  const int dim = static_cast<int>(items[0]->statics.rows());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  long n = 0;
  for (const auto* u : items) {
    sum += u->statics.rowwise().sum();
    sumsq += u->statics.array().square().matrix().rowwise().sum();
    n += u->num_words();
  }
  FeatureScaler scaler;
  scaler.mean = sum / n;
  scaler.inv_sd.resize(dim);
  for (int d = 0; d < dim; ++d) {
    const double var = std::max(0.0, sumsq[d] / n - scaler.mean[d] * scaler.mean[d]);
    const double sd = std::sqrt(var);
    scaler.inv_sd[d] = sd > 1e-8 ? 1.0 / sd : 1.0;
  }
  return scaler;
}

void ProminenceModel::set_feature_scaler(const FeatureScaler& scaler) {
  if (scaler.mean.size() != spec_.static_dim || scaler.inv_sd.size() != spec_.static_dim)
    throw ValidationError("feature scaler: dimension mismatch");
  feature_scaler_ = scaler;
}

ProminenceModel::ProminenceModel(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  if (spec_.blocks.empty()) throw ValidationError("model: input_blocks must be non-empty");
  if (spec_.rnn.layers < 1) throw ValidationError("model: need at least one RNN layer");
  if (spec_.rnn.units < 1) throw ValidationError("model: need at least one hidden unit");
  if (spec_.rnn.dropout_p < 0.0 || spec_.rnn.dropout_p >= 1.0)
    throw ValidationError("model: dropout_p out of range");
  register_params(init_seed);
}

void ProminenceModel::register_params(std::uint64_t init_seed) {
  Rng rng(Rng::splitmix(init_seed) ^ 0x9097c0de);
  if (spec_.uses_cnn()) encoder_ = std::make_unique<CnnEncoder>(spec_.cnn, params_, rng);

  const int units = spec_.rnn.units;
  const int gates = gates_for(spec_.rnn.cell);
  const int dirs = spec_.rnn.bidirectional ? 2 : 1;
  int in_dim = spec_.input_dim();
  for (int l = 0; l < spec_.rnn.layers; ++l) {
    LayerParams layer;
    for (int d = 0; d < dirs; ++d) {
      const std::string tag =
          "rnn.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      params_.add(tag + ".W", {gates * units, in_dim}, InitScheme::XavierUniform, rng);
      DirectionParams dp;
      dp.w = params_.count() - 1;
      params_.add(tag + ".U", {gates * units, units}, InitScheme::XavierUniform, rng);
      dp.u = params_.count() - 1;
      params_.add(tag + ".b", {gates * units}, InitScheme::Zeros, rng);
      dp.b = params_.count() - 1;
      if (d == 0) {
        layer.fwd = dp;
      } else {
        layer.bwd = dp;
      }
    }
    layers_.push_back(layer);
    in_dim = units * dirs;
  }
  params_.add("head.w", {1, in_dim}, InitScheme::XavierUniform, rng);
  head_w_ = params_.count() - 1;
  params_.add("head.b", {1}, InitScheme::Zeros, rng);
  head_b_ = params_.count() - 1;
}

void ProminenceModel::run_direction(const DirectionParams& dir, const Eigen::MatrixXd& input,
                                    bool reverse, DirectionCache& cache, Eigen::MatrixXd& output,
                                    int row_offset) const {
  const int units = spec_.rnn.units;
  const int n = static_cast<int>(input.cols());
  const int gates = gates_for(spec_.rnn.cell);
  const auto W = params_[dir.w].mat(gates * units, static_cast<int>(input.rows()));
  const auto U = params_[dir.u].mat(gates * units, units);
  const auto& b = params_[dir.b].values;

  // input contribution for every step in one product
  Eigen::MatrixXd wx = W * input;
  wx.colwise() += b;

  cache.h = Eigen::MatrixXd::Zero(units, n + 1);
  cache.g1.resize(units, n);
  cache.g2.resize(units, n);
  cache.g3.resize(units, n);
  if (spec_.rnn.cell == CellType::GRU) {
    cache.aux.resize(units, n);
  } else {
    cache.g4.resize(units, n);
    cache.aux = Eigen::MatrixXd::Zero(units, n + 1);  // cell states
    cache.tanh_c.resize(units, n);
  }

  Eigen::VectorXd a(gates * units);
  for (int s = 0; s < n; ++s) {
    const int t = reverse ? n - 1 - s : s;
    const auto h_prev = cache.h.col(s);
    if (spec_.rnn.cell == CellType::GRU) {
      // z, r from the first two gate rows; candidate uses r.h_prev
      Eigen::VectorXd azr = wx.col(t).head(2 * units);
      azr.noalias() += U.topRows(2 * units) * h_prev;
      auto z = cache.g1.col(s);
      auto r = cache.g2.col(s);
      for (int k = 0; k < units; ++k) {
        z[k] = sigm(azr[k]);
        r[k] = sigm(azr[units + k]);
      }
      auto rh = cache.aux.col(s);
      rh = r.cwiseProduct(h_prev);
      Eigen::VectorXd ag = wx.col(t).tail(units);
      ag.noalias() += U.bottomRows(units) * rh;
      auto g = cache.g3.col(s);
      g = ag.array().tanh();
      cache.h.col(s + 1) =
          (Eigen::VectorXd::Ones(units) - z).cwiseProduct(h_prev) + z.cwiseProduct(g);
    } else {
      a = wx.col(t);
      a.noalias() += U * h_prev;
      auto f = cache.g1.col(s);
      auto i = cache.g2.col(s);
      auto o = cache.g3.col(s);
      auto g = cache.g4.col(s);
      for (int k = 0; k < units; ++k) {
        f[k] = sigm(a[k]);
        i[k] = sigm(a[units + k]);
        o[k] = sigm(a[2 * units + k]);
        g[k] = std::tanh(a[3 * units + k]);
      }
      const auto c_prev = cache.aux.col(s);
      cache.aux.col(s + 1) = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      cache.tanh_c.col(s) = cache.aux.col(s + 1).array().tanh();
      cache.h.col(s + 1) = o.cwiseProduct(cache.tanh_c.col(s));
    }
    output.block(row_offset, t, units, 1) = cache.h.col(s + 1);
  }
}

Eigen::VectorXd ProminenceModel::forward(const UtteranceFeatures& utt, bool training,
                                         Rng* dropout_rng, ForwardCache* cache) const {
  const int n = utt.num_words();
  if (n < 1) throw ValidationError("forward: empty word sequence");
  if (static_cast<int>(utt.statics.rows()) != spec_.static_dim)
    throw ValidationError("forward: feature length " + std::to_string(utt.statics.rows()) +
                          " does not match model static_dim " + std::to_string(spec_.static_dim));

  ForwardCache local;
  ForwardCache& fc = cache != nullptr ? *cache : local;

  // assemble per-word inputs: CNN encoding first, then the static blocks
  fc.x0.resize(spec_.input_dim(), n);
  if (spec_.uses_cnn()) {
    if (!utt.has_stack || utt.utterance == nullptr)
      throw ValidationError("forward: CNN block requires contours for '" + utt.utt_id + "'");
    const int enc_dim = encoder_->encoding_dim();
    fc.segments.resize(n);
    fc.cnn.resize(n);
    for (int i = 0; i < n; ++i) {
      fc.segments[i] = build_segment(utt.stack, *utt.utterance, i, spec_.cnn);
      fc.x0.col(i).head(enc_dim) = encoder_->forward(fc.segments[i], params_, &fc.cnn[i]);
    }
    fc.x0.bottomRows(spec_.static_dim) = utt.statics;
  } else {
    fc.x0 = utt.statics;
  }
  if (feature_scaler_.has_value() && spec_.static_dim > 0) {
    auto rows = fc.x0.bottomRows(spec_.static_dim);
    rows.colwise() -= feature_scaler_->mean;
    rows.array().colwise() *= feature_scaler_->inv_sd.array();
  }

  const int dirs = spec_.rnn.bidirectional ? 2 : 1;
  const int units = spec_.rnn.units;
  fc.layers.resize(spec_.rnn.layers);
  const Eigen::MatrixXd* below = &fc.x0;
  for (int l = 0; l < spec_.rnn.layers; ++l) {
    LayerCache& lc = fc.layers[l];
    lc.input = *below;
    lc.output.resize(units * dirs, n);
    run_direction(layers_[l].fwd, lc.input, /*reverse=*/false, lc.fwd, lc.output, 0);
    if (spec_.rnn.bidirectional)
      run_direction(layers_[l].bwd, lc.input, /*reverse=*/true, lc.bwd, lc.output, units);

    // dropout between layers only, never after the last
    if (l + 1 < spec_.rnn.layers) {
      lc.dropout_mask.setOnes(units * dirs, n);
      if (training && spec_.rnn.dropout_p > 0.0) {
        if (dropout_rng == nullptr)
          throw ValidationError("forward: training mode needs a dropout rng");
        const double p = spec_.rnn.dropout_p;
        const double scale = 1.0 / (1.0 - p);
        for (int t = 0; t < n; ++t) {
          for (int k = 0; k < units * dirs; ++k) {
            lc.dropout_mask(k, t) = dropout_rng->uniform() < p ? 0.0 : scale;
          }
        }
      }
      fc.layers[l + 1].input = lc.output.cwiseProduct(lc.dropout_mask);
      below = &fc.layers[l + 1].input;
    } else {
      below = &lc.output;
    }
  }

  const auto& top = fc.layers.back().output;
  const auto w = params_[head_w_].mat(1, units * dirs);
  const double b = params_[head_b_].values[0];
  fc.logits = (w * top).transpose();
  fc.logits.array() += b;
  fc.preds = fc.logits.unaryExpr([](double x) { return sigm(x); });
  return fc.preds;
}

Eigen::VectorXd ProminenceModel::predict(const UtteranceFeatures& utt) const {
  return forward(utt, /*training=*/false, nullptr, nullptr);
}

void ProminenceModel::backward_direction(const DirectionParams& dir, const Eigen::MatrixXd& input,
                                         const DirectionCache& cache, bool reverse,
                                         const Eigen::MatrixXd& d_output, int row_offset,
                                         Eigen::MatrixXd& d_input) {
  const int units = spec_.rnn.units;
  const int n = static_cast<int>(input.cols());
  const int gates = gates_for(spec_.rnn.cell);
  const int in_dim = static_cast<int>(input.rows());
  const auto U = params_[dir.u].mat(gates * units, units);

  Eigen::MatrixXd da(gates * units, n);  // pre-activation grads per processed step
  Eigen::VectorXd carry_h = Eigen::VectorXd::Zero(units);
  Eigen::VectorXd carry_c = Eigen::VectorXd::Zero(units);

  for (int s = n - 1; s >= 0; --s) {
    const int t = reverse ? n - 1 - s : s;
    Eigen::VectorXd dh = d_output.block(row_offset, t, units, 1) + carry_h;
    if (spec_.rnn.cell == CellType::GRU) {
      const auto z = cache.g1.col(s);
      const auto r = cache.g2.col(s);
      const auto g = cache.g3.col(s);
      const auto h_prev = cache.h.col(s);
      const Eigen::VectorXd dz = dh.cwiseProduct(g - h_prev);
      const Eigen::VectorXd dg = dh.cwiseProduct(z);
      Eigen::VectorXd dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(units) - z);

      const Eigen::VectorXd dag =
          dg.cwiseProduct(Eigen::VectorXd::Ones(units) - g.cwiseProduct(g));
      const Eigen::VectorXd daz =
          dz.array() * z.array() * (1.0 - z.array());
      const Eigen::VectorXd drh = U.bottomRows(units).transpose() * dag;
      const Eigen::VectorXd dr = drh.cwiseProduct(h_prev);
      dh_prev += drh.cwiseProduct(r);
      const Eigen::VectorXd dar = dr.array() * r.array() * (1.0 - r.array());

      da.col(s).head(units) = daz;
      da.col(s).segment(units, units) = dar;
      da.col(s).tail(units) = dag;
      dh_prev.noalias() += U.topRows(2 * units).transpose() * da.col(s).head(2 * units);
      carry_h = dh_prev;
    } else {
      const auto f = cache.g1.col(s);
      const auto i = cache.g2.col(s);
      const auto o = cache.g3.col(s);
      const auto g = cache.g4.col(s);
      const auto c_prev = cache.aux.col(s);
      const auto tc = cache.tanh_c.col(s);
      const Eigen::VectorXd do_ = dh.cwiseProduct(tc);
      const Eigen::VectorXd dc =
          carry_c + (dh.cwiseProduct(o).array() * (1.0 - tc.array().square())).matrix();
      const Eigen::VectorXd df = dc.cwiseProduct(c_prev);
      const Eigen::VectorXd di = dc.cwiseProduct(g);
      const Eigen::VectorXd dg = dc.cwiseProduct(i);
      carry_c = dc.cwiseProduct(f);

      da.col(s).head(units) = df.array() * f.array() * (1.0 - f.array());
      da.col(s).segment(units, units) = di.array() * i.array() * (1.0 - i.array());
      da.col(s).segment(2 * units, units) = do_.array() * o.array() * (1.0 - o.array());
      da.col(s).tail(units) = dg.array() * (1.0 - g.array().square());
      carry_h = U.transpose() * da.col(s);
    }
  }

  // batched weight gradients over all steps
  Eigen::MatrixXd x_proc(in_dim, n);
  for (int s = 0; s < n; ++s) x_proc.col(s) = input.col(reverse ? n - 1 - s : s);

  auto dW = params_[dir.w].grad_mat(gates * units, in_dim);
  auto dU = params_[dir.u].grad_mat(gates * units, units);
  dW.noalias() += da * x_proc.transpose();
  params_[dir.b].grad += da.rowwise().sum();
  if (spec_.rnn.cell == CellType::GRU) {
    dU.topRows(2 * units).noalias() +=
        da.topRows(2 * units) * cache.h.leftCols(n).transpose();
    dU.bottomRows(units).noalias() += da.bottomRows(units) * cache.aux.transpose();
  } else {
    dU.noalias() += da * cache.h.leftCols(n).transpose();
  }

  const auto W = params_[dir.w].mat(gates * units, in_dim);
  const Eigen::MatrixXd dx_proc = W.transpose() * da;
  for (int s = 0; s < n; ++s) d_input.col(reverse ? n - 1 - s : s) += dx_proc.col(s);
}

void ProminenceModel::backward(const UtteranceFeatures& utt, const ForwardCache& cache,
                               const Eigen::VectorXd& d_preds) {
  const int n = utt.num_words();
  const int units = spec_.rnn.units;
  const int dirs = spec_.rnn.bidirectional ? 2 : 1;

  // head
  const Eigen::VectorXd d_logits =
      d_preds.array() * cache.preds.array() * (1.0 - cache.preds.array());
  const auto& top = cache.layers.back().output;
  params_[head_w_].grad += top * d_logits;
  params_[head_b_].grad[0] += d_logits.sum();
  const auto w = params_[head_w_].mat(1, units * dirs);
  Eigen::MatrixXd d_out = w.transpose() * d_logits.transpose();

  for (int l = spec_.rnn.layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[l];
    Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(lc.input.rows(), n);
    backward_direction(layers_[l].fwd, lc.input, lc.fwd, /*reverse=*/false, d_out, 0, d_in);
    if (spec_.rnn.bidirectional)
      backward_direction(layers_[l].bwd, lc.input, lc.bwd, /*reverse=*/true, d_out, units, d_in);
    if (l > 0) {
      d_out = d_in.cwiseProduct(cache.layers[l - 1].dropout_mask);
    } else if (spec_.uses_cnn()) {
      const int enc_dim = encoder_->encoding_dim();
      for (int i = 0; i < n; ++i) {
        encoder_->backward(cache.segments[i], cache.cnn[i], d_in.col(i).head(enc_dim), params_);
      }
    }
  }
}

namespace {

json cnn_config_to_json(const CnnConfig& cnn) {
  return json{{"widths", cnn.widths},
              {"filters", cnn.filters_per_width},
              {"channels", to_string(cnn.channels)},
              {"context_words", cnn.context_words},
              {"position", to_string(cnn.position_encoding)},
              {"segment", to_string(cnn.segment_mode)},
              {"pool", cnn.bank_pool == BankPool::Max ? "max" : "avg"},
              {"fixed_len_frames", cnn.fixed_len_frames}};
}

CnnConfig cnn_config_from_json(const json& j) {
  CnnConfig cnn;
  cnn.widths = j.at("widths").get<std::vector<int>>();
  cnn.filters_per_width = j.at("filters").get<int>();
  cnn.channels = channel_mode_from_string(j.at("channels").get<std::string>());
  cnn.context_words = j.at("context_words").get<int>();
  cnn.position_encoding = position_encoding_from_string(j.at("position").get<std::string>());
  cnn.segment_mode = segment_mode_from_string(j.at("segment").get<std::string>());
  cnn.bank_pool = j.at("pool").get<std::string>() == "avg" ? BankPool::Average : BankPool::Max;
  cnn.fixed_len_frames = j.at("fixed_len_frames").get<int>();
  return cnn;
}

json spec_to_json_obj(const ModelSpec& spec) {
  json blocks = json::array();
  for (FeatureBlock b : spec.blocks) blocks.push_back(to_string(b));
  return json{{"cell", to_string(spec.rnn.cell)},
              {"bidirectional", spec.rnn.bidirectional},
              {"layers", spec.rnn.layers},
              {"units", spec.rnn.units},
              {"dropout_p", spec.rnn.dropout_p},
              {"blocks", blocks},
              {"grouping", to_string(spec.grouping)},
              {"static_dim", spec.static_dim},
              {"cnn", cnn_config_to_json(spec.cnn)}};
}

ModelSpec spec_from_json_obj(const json& j) {
  ModelSpec spec;
  spec.rnn.cell = cell_from_string(j.at("cell").get<std::string>());
  spec.rnn.bidirectional = j.at("bidirectional").get<bool>();
  spec.rnn.layers = j.at("layers").get<int>();
  spec.rnn.units = j.at("units").get<int>();
  spec.rnn.dropout_p = j.at("dropout_p").get<double>();
  spec.blocks.clear();
  for (const auto& b : j.at("blocks")) spec.blocks.push_back(feature_block_from_string(b));
  spec.grouping = grouping_from_string(j.at("grouping").get<std::string>());
  spec.static_dim = j.at("static_dim").get<int>();
  spec.cnn = cnn_config_from_json(j.at("cnn"));
  return spec;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) { return spec_to_json_obj(spec).dump(); }

ModelSpec model_spec_from_json(const std::string& json_text) {
  return spec_from_json_obj(json::parse(json_text));
}

void ProminenceModel::save_checkpoint(const std::string& path) const {
  json params = json::array();
  for (const auto& p : params_.tensors()) {
    std::vector<double> values(p.values.data(), p.values.data() + p.size());
    params.push_back(json{{"name", p.name}, {"shape", p.shape}, {"values", values}});
  }
  json j{{"format", kModelFormatTag}, {"model", spec_to_json_obj(spec_)}, {"params", params}};
  if (spectral_stats_.has_value()) {
    j["normalization"] = json{{"spectral_mean", spectral_stats_->mean},
                              {"spectral_sd", spectral_stats_->sd}};
  }
  if (feature_scaler_.has_value()) {
    std::vector<double> mean(feature_scaler_->mean.data(),
                             feature_scaler_->mean.data() + feature_scaler_->mean.size());
    std::vector<double> inv_sd(feature_scaler_->inv_sd.data(),
                               feature_scaler_->inv_sd.data() + feature_scaler_->inv_sd.size());
    j["feature_scaler"] = json{{"mean", mean}, {"inv_sd", inv_sd}};
  }
  write_file_atomic(path, j.dump() + "\n");
}

ProminenceModel ProminenceModel::load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("bad checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != kModelFormatTag)
    throw ValidationError("checkpoint " + path + ": unsupported format tag");

  ProminenceModel model(spec_from_json_obj(j.at("model")), /*init_seed=*/0);
  const auto& params = j.at("params");
  if (static_cast<int>(params.size()) != model.params_.count())
    throw ValidationError("checkpoint " + path + ": parameter count mismatch");
  for (int i = 0; i < model.params_.count(); ++i) {
    ParamTensor& p = model.params_[i];
    const auto& pj = params[i];
    if (pj.at("name").get<std::string>() != p.name ||
        pj.at("shape").get<std::vector<int>>() != p.shape)
      throw ValidationError("checkpoint " + path + ": tensor mismatch at '" + p.name + "'");
    const auto values = pj.at("values").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != p.size())
      throw ValidationError("checkpoint " + path + ": bad value count for '" + p.name + "'");
    for (int k = 0; k < p.size(); ++k) p.values[k] = values[k];
  }
  if (j.contains("normalization")) {
    SpectralStats stats;
    const auto& nj = j["normalization"];
    const auto mean = nj.at("spectral_mean").get<std::vector<double>>();
    const auto sd = nj.at("spectral_sd").get<std::vector<double>>();
    for (int c = 0; c < 7; ++c) {
      stats.mean[c] = mean.at(c);
      stats.sd[c] = sd.at(c);
    }
    model.spectral_stats_ = stats;
  }
  if (j.contains("feature_scaler")) {
    const auto mean = j["feature_scaler"].at("mean").get<std::vector<double>>();
    const auto inv_sd = j["feature_scaler"].at("inv_sd").get<std::vector<double>>();
    FeatureScaler scaler;
    scaler.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    scaler.inv_sd = Eigen::Map<const Eigen::VectorXd>(inv_sd.data(), inv_sd.size());
    model.set_feature_scaler(scaler);
  }
  return model;
}

}  // namespace ppl
