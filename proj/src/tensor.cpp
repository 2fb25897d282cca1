#include "ppl/tensor.hpp"

#include <cmath>

#include "ppl/errors.hpp"

namespace ppl {

void init_param(ParamTensor& p, InitScheme scheme, Rng& rng) {
  const int n = p.size();
  if (scheme == InitScheme::Zeros) {
    p.values.setZero();
    return;
  }
  int fan_out = p.shape.empty() ? 1 : p.shape[0];
  int fan_in = 1;
  for (std::size_t i = 1; i < p.shape.size(); ++i) fan_in *= p.shape[i];
  if (p.shape.size() > 2) {
    int width = 1;
    for (std::size_t i = 2; i < p.shape.size(); ++i) width *= p.shape[i];
    fan_out *= width;
  }
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (int i = 0; i < n; ++i) p.values[i] = rng.uniform(-a, a);
}

ParamTensor& ParamSet::add(const std::string& name, std::vector<int> shape, InitScheme scheme,
                           Rng& rng) {
  ParamTensor p;
  p.name = name;
  p.shape = std::move(shape);
  int n = 1;
  for (int d : p.shape) n *= d;
  p.values.resize(n);
  p.grad = Eigen::VectorXd::Zero(n);
  init_param(p, scheme, rng);
  tensors_.push_back(std::move(p));
  return tensors_.back();
}

int ParamSet::total_size() const {
  int n = 0;
  for (const auto& p : tensors_) n += p.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : tensors_) p.grad.setZero();
}

double ParamSet::grad_norm() const {
  double ss = 0.0;
  for (const auto& p : tensors_) ss += p.grad.squaredNorm();
  return std::sqrt(ss);
}

void ParamSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : tensors_) p.grad *= scale;
  }
}

bool ParamSet::grads_finite() const {
  for (const auto& p : tensors_) {
    if (!p.grad.allFinite()) return false;
  }
  return true;
}

void AdamWState::reset(const ParamSet& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto& p : params.tensors()) {
    m.push_back(Eigen::VectorXd::Zero(p.size()));
    v.push_back(Eigen::VectorXd::Zero(p.size()));
  }
}

void adamw_step(ParamSet& params, AdamWState& state) {
  if (state.m.size() != static_cast<std::size_t>(params.count())) state.reset(params);
  if (!params.grads_finite())
    throw NumericalError("adamw_step: non-finite gradient at step " + std::to_string(state.t + 1));

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (int i = 0; i < params.count(); ++i) {
    ParamTensor& p = params[i];
    Eigen::VectorXd& m = state.m[i];
    Eigen::VectorXd& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * p.grad;
    v = state.beta2 * v + (1.0 - state.beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = m / bc1;
    const auto v_hat = v / bc2;
    p.values -= state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps) +
                            state.weight_decay * p.values.array())
                    .matrix();
  }
}

}  // namespace ppl
