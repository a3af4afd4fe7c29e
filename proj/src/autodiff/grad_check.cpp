#include "autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace gada::ad {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double evaluate_loss(const LossBuilder& build, const ParamStore& params) {
  Tape tape;
  const Bound bound = bind(tape, params, false);
  const Var loss = build(tape, bound);
  return loss.value().item();
}

CheckReport grad_check(const LossBuilder& build, const ParamStore& params, double h, double tol,
                       double floor) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");
  CheckReport report;
  {
    Tape tape;
    const Bound bound = bind(tape, params, true);
    report.analytic = backward(build(tape, bound), bound);
  }

  ParamStore probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    auto& entry = probe.entry(p);
    const Tensor& grad = report.analytic.entry(p).value;
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value[i];
      entry.value[i] = saved + h;
      const double up = evaluate_loss(build, probe);
      entry.value[i] = saved - h;
      const double down = evaluate_loss(build, probe);
      entry.value[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad[i];
      const double rel = relative_error(analytic, numeric, floor);
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic - numeric));
      report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(analytic));
      if (!(rel < tol)) report.failures.push_back({entry.name, i, analytic, numeric, rel});
    }
  }
  return report;
}

}  // namespace gada::ad
