#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mcrnet/tensor.hpp"

namespace mcrnet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  Index worst_row = -1;
  Index worst_col = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  bool pass = false;
};

// Compares reverse-mode gradients of a scalar-valued program against central
// finite differences, parameter entry by parameter entry. The program must be
// a pure function of the parameter values (evaluation mode, fixed inputs).
template <typename Scalar>
GradCheckReport grad_check(
    const std::function<Tensor<Scalar>(Tape<Scalar>&)>& program,
    const std::vector<Parameter<Scalar>*>& params, Scalar step = Scalar(1e-5),
    double tolerance = 1e-5) {
  auto eval = [&]() -> Scalar {
    Tape<Scalar> tape;
    Tensor<Scalar> loss = program(tape);
    require(loss.rows() == 1 && loss.cols() == 1,
            "grad_check: program must return a scalar");
    return loss.item();
  };

  for (auto* p : params) p->zero_grad();
  std::vector<Matrix<Scalar>> analytic;
  {
    Tape<Scalar> tape;
    Tensor<Scalar> loss = program(tape);
    require(std::isfinite(static_cast<double>(loss.item())),
            "grad_check: non-finite loss at the base point");
    tape.backward(loss);
    for (auto* p : params) analytic.push_back(p->grad);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<Scalar>& p = *params[k];
    for (Index r = 0; r < p.value.rows(); ++r) {
      for (Index c = 0; c < p.value.cols(); ++c) {
        const Scalar saved = p.value(r, c);
        p.value(r, c) = saved + step;
        const Scalar f_plus = eval();
        p.value(r, c) = saved - step;
        const Scalar f_minus = eval();
        p.value(r, c) = saved;
        if (!std::isfinite(static_cast<double>(f_plus)) ||
            !std::isfinite(static_cast<double>(f_minus))) {
          throw std::runtime_error(
              "grad_check: non-finite evaluation while perturbing " + p.name);
        }
        const double num =
            static_cast<double>(f_plus - f_minus) / (2.0 * double(step));
        const double ana = static_cast<double>(analytic[k](r, c));
        const double denom =
            std::max({std::abs(ana), std::abs(num), 1e-8});
        const double rel = std::abs(ana - num) / denom;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_param = p.name;
          report.worst_row = r;
          report.worst_col = c;
          report.analytic = ana;
          report.numeric = num;
        }
      }
    }
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace mcrnet
