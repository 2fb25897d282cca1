#include "ppl/nn_ops.hpp"

#include "ppl/errors.hpp"

namespace ppl {

MatRM conv1d_same(const MatRM& input, const ParamTensor& kernels, const ParamTensor& bias) {
  if (kernels.shape.size() != 3) throw ValidationError("conv1d_same: kernels must be [F, C, W]");
  const int filters = kernels.shape[0];
  const int channels = kernels.shape[1];
  const int width = kernels.shape[2];
  if (width % 2 == 0) throw ValidationError("conv1d_same: even kernel width, center undefined");
  if (channels != input.rows()) throw ValidationError("conv1d_same: channel count mismatch");
  const int T = static_cast<int>(input.cols());
  if (T < 1) throw ValidationError("conv1d_same: empty input");
  const int half = (width - 1) / 2;

  // zero-padded copy so the inner loops stay branch-free
  MatRM padded = MatRM::Zero(channels, T + width - 1);
  padded.block(0, half, channels, T) = input;

  MatRM out(filters, T);
  for (int f = 0; f < filters; ++f) {
    out.row(f).setConstant(bias.values[f]);
    for (int c = 0; c < channels; ++c) {
      const double* krow = kernels.values.data() + (f * channels + c) * width;
      for (int w = 0; w < width; ++w) {
        out.row(f) += krow[w] * padded.row(c).segment(w, T);
      }
    }
  }
  return out;
}

Eigen::VectorXd maxpool_time(const MatRM& feat, std::vector<int>* argmax) {
  const int filters = static_cast<int>(feat.rows());
  const int T = static_cast<int>(feat.cols());
  if (T < 1) throw ValidationError("maxpool_time: empty input");
  Eigen::VectorXd out(filters);
  if (argmax != nullptr) argmax->assign(filters, 0);
  for (int f = 0; f < filters; ++f) {
    int best = 0;
    double best_v = feat(f, 0);
    for (int t = 1; t < T; ++t) {
      if (feat(f, t) > best_v) {  // ties keep the earliest index
        best_v = feat(f, t);
        best = t;
      }
    }
    out[f] = best_v;
    if (argmax != nullptr) (*argmax)[f] = best;
  }
  return out;
}

double mse_masked(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                  const std::vector<std::uint8_t>& mask, Eigen::VectorXd* d_pred) {
  const int n = static_cast<int>(pred.size());
  if (target.size() != n || static_cast<int>(mask.size()) != n)
    throw ValidationError("mse_masked: length mismatch");
  long count = 0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double d = pred[i] - target[i];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw ValidationError("mse_masked: all-false mask");
  if (d_pred != nullptr) {
    d_pred->setZero(n);
    for (int i = 0; i < n; ++i) {
      if (mask[i]) (*d_pred)[i] = 2.0 * (pred[i] - target[i]) / count;
    }
  }
  return sum / count;
}

void dropout_inplace(Eigen::VectorXd& x, double p, bool training, Rng& rng,
                     Eigen::VectorXd* mask) {
  if (p < 0.0 || p >= 1.0) throw ValidationError("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) {
    if (mask != nullptr) mask->setOnes(x.size());
    return;
  }
  const double scale = 1.0 / (1.0 - p);
  if (mask != nullptr) mask->resize(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double keep = rng.uniform() < p ? 0.0 : scale;
    x[i] *= keep;
    if (mask != nullptr) (*mask)[i] = keep;
  }
}

}  // namespace ppl
