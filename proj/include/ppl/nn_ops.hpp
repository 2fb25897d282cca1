#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ppl/contours.hpp"
#include "ppl/rng.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

// Zero-padded "same" cross-correlation:
//   out[f, t] = bias[f] + sum_{c,w} input[c, t + w - (W-1)/2] * kernels[f, c, w]
// kernels has shape [F, C, W] with W odd.
MatRM conv1d_same(const MatRM& input, const ParamTensor& kernels, const ParamTensor& bias);

// out[f] = max_t feat[f, t]; optional argmax (first maximum) for backprop.
Eigen::VectorXd maxpool_time(const MatRM& feat, std::vector<int>* argmax = nullptr);

// Mean of (pred - target)^2 over masked-true entries; if d_pred is given it
// receives 2 (pred - target) / n on those entries and 0 elsewhere.
double mse_masked(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                  const std::vector<std::uint8_t>& mask, Eigen::VectorXd* d_pred = nullptr);

// Inverted dropout: in training each entry is zeroed with probability p and
// survivors are scaled by 1/(1-p); in eval it is the identity. The kept mask
// (scale applied) is written to `mask` when non-null so backprop can reuse it.
void dropout_inplace(Eigen::VectorXd& x, double p, bool training, Rng& rng,
                     Eigen::VectorXd* mask = nullptr);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace ppl
