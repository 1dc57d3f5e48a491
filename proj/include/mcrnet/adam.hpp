#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mcrnet/tensor.hpp"

namespace mcrnet {

template <typename Scalar>
struct AdamConfig {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

// Bias-corrected Adam over a fixed parameter set. Moment buffers are keyed
// by position, so the parameter list must not change between steps.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Parameter<Scalar>*> params, AdamConfig<Scalar> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    slots_.reserve(params_.size());
    for (auto* p : params_) {
      slots_.push_back({Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()),
                        Matrix<Scalar>::Zero(p->value.rows(), p->value.cols())});
    }
  }

  // One update from the gradients currently stored on the parameters.
  void step() {
    ++t_;
    const Scalar c1 = Scalar(1) - std::pow(cfg_.beta1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(cfg_.beta2, Scalar(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<Scalar>& p = *params_[i];
      require(p.grad.rows() == slots_[i].m.rows() &&
                  p.grad.cols() == slots_[i].m.cols(),
              "adam: gradient shape changed for " + p.name);
      Slot& s = slots_[i];
      s.m = cfg_.beta1 * s.m + (Scalar(1) - cfg_.beta1) * p.grad;
      s.v = cfg_.beta2 * s.v +
            (Scalar(1) - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
      Matrix<Scalar> mhat = s.m / c1;
      Matrix<Scalar> vhat = s.v / c2;
      p.value.array() -=
          cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  std::int64_t step_count() const { return t_; }
  const AdamConfig<Scalar>& config() const { return cfg_; }
  void set_lr(Scalar lr) { cfg_.lr = lr; }

 private:
  struct Slot {
    Matrix<Scalar> m, v;
  };

  std::vector<Parameter<Scalar>*> params_;
  AdamConfig<Scalar> cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace mcrnet
