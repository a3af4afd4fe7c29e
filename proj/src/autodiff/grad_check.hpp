#ifndef GADA_AUTODIFF_GRAD_CHECK_HPP
#define GADA_AUTODIFF_GRAD_CHECK_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "autodiff/param_store.hpp"
#include "autodiff/tape.hpp"

namespace gada::ad {

// Builds a scalar loss on `tape` from the bound parameters. Must be
// deterministic: any randomness is frozen by the caller.
using LossBuilder = std::function<Var(Tape& tape, const Bound& params)>;

struct GradMismatch {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct CheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double max_abs_analytic = 0.0;
  std::vector<GradMismatch> failures;
  ParamStore analytic;
  bool passed() const noexcept { return failures.empty(); }
};

// Relative error with a floor on the denominator so coordinates whose true
// gradient is ~0 are judged on absolute scale:
//   |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Compares reverse-mode gradients against central differences
// (f(p+h) - f(p-h)) / 2h on every scalar of every parameter.
CheckReport grad_check(const LossBuilder& build, const ParamStore& params, double h, double tol,
                       double floor = 1e-6);

// Loss value only (no backward), for callers that need f at a point.
double evaluate_loss(const LossBuilder& build, const ParamStore& params);

}  // namespace gada::ad

#endif  // GADA_AUTODIFF_GRAD_CHECK_HPP
