#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "keyhead/tensor.hpp"

namespace keyhead {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;

  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

// Central-difference gradient check. `forward` must be a deterministic,
// side-effect-free evaluation of the scalar loss from the current
// parameter values. Analytic gradients come from one tape backward pass;
// numeric ones from (f(p+h) - f(p-h)) / 2h with forward-only evaluations,
// so the check never reuses the code path it is verifying.
//
// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
// finite-difference noise on near-zero gradients from dominating.
template <class Real>
GradCheckReport check_gradients(const std::vector<std::pair<std::string, Tensor<Real>*>>& params,
                                const std::function<Tensor<Real>()>& forward,
                                double step = 1e-5, double floor = 1e-3) {
  GradCheckReport report;

  Tape<Real> tape;
  {
    typename Tape<Real>::Scope scope(tape);
    for (auto& [name, p] : params) p->zero_grad();
    Tensor<Real> loss = forward();
    tape.backward(loss);
  }
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) analytic.push_back(p->grad());

  NoGradScope<Real> no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<Real>* p = params[pi].second;
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const Real saved = p->data()[i];
      p->data()[i] = saved + static_cast<Real>(step);
      double up = static_cast<double>(forward().at(0));
      p->data()[i] = saved - static_cast<Real>(step);
      double down = static_cast<double>(forward().at(0));
      p->data()[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double a = static_cast<double>(analytic[pi][i]);
      double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = params[pi].first;
        report.worst_index = i;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
      }
    }
  }
  return report;
}

}  // namespace keyhead
