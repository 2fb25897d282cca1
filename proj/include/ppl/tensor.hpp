#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ppl/rng.hpp"

namespace ppl {

// Flat parameter storage with a shape tag; models view slices through
// Eigen::Map. Keeping values and gradient side by side makes the optimizer,
// the finite-difference checker and checkpointing uniform.
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  Eigen::VectorXd values;
  Eigen::VectorXd grad;

  int size() const { return static_cast<int>(values.size()); }

  Eigen::Map<Eigen::MatrixXd> mat(int rows, int cols) {
    return Eigen::Map<Eigen::MatrixXd>(values.data(), rows, cols);
  }
  Eigen::Map<const Eigen::MatrixXd> mat(int rows, int cols) const {
    return Eigen::Map<const Eigen::MatrixXd>(values.data(), rows, cols);
  }
  Eigen::Map<Eigen::MatrixXd> grad_mat(int rows, int cols) {
    return Eigen::Map<Eigen::MatrixXd>(grad.data(), rows, cols);
  }
};

enum class InitScheme { XavierUniform, Zeros };

// Xavier-uniform samples U(-a, a) with a = sqrt(6 / (fan_in + fan_out));
// fan_in is the product of all trailing dimensions, fan_out the leading one
// (times the kernel width for conv shapes).
void init_param(ParamTensor& p, InitScheme scheme, Rng& rng);

class ParamSet {
 public:
  ParamTensor& add(const std::string& name, std::vector<int> shape, InitScheme scheme, Rng& rng);
  ParamTensor& operator[](int i) { return tensors_[i]; }
  const ParamTensor& operator[](int i) const { return tensors_[i]; }
  int count() const { return static_cast<int>(tensors_.size()); }
  int total_size() const;

  void zero_grad();
  double grad_norm() const;
  void clip_grad_norm(double max_norm);
  bool grads_finite() const;

  std::vector<ParamTensor>& tensors() { return tensors_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }

 private:
  std::vector<ParamTensor> tensors_;
};

// Decoupled weight decay: theta -= lr * (m_hat / (sqrt(v_hat) + eps)
//                                        + weight_decay * theta).
struct AdamWState {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long t = 0;
  std::vector<Eigen::VectorXd> m, v;

  void reset(const ParamSet& params);
};

// Throws NumericalError on non-finite gradients.
void adamw_step(ParamSet& params, AdamWState& state);

}  // namespace ppl
