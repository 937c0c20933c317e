#pragma once

#include <cstdint>
#include <vector>

#include "mpscl/tensor.hpp"

namespace mpscl {

// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double lr, double momentum,
              double weight_decay);

  void step();
  void zero_grad();

  std::vector<Tensor>& params() { return params_; }
  std::vector<std::vector<double>>& velocity() { return velocity_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

// Standard bias-corrected Adam.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  std::vector<Tensor>& params() { return params_; }
  std::vector<std::vector<double>>& first_moment() { return m_; }
  std::vector<std::vector<double>>& second_moment() { return v_; }
  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

}  // namespace mpscl
