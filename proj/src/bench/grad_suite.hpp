#ifndef GADA_BENCH_GRAD_SUITE_HPP
#define GADA_BENCH_GRAD_SUITE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace gada::bench {

struct GradCase {
  std::string name;
  std::size_t trials = 0;
  std::size_t checked = 0;  // scalar coordinates compared, over all trials
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = false;
};

struct BlockCase {
  std::string name;
  double max_abs_grad = 0.0;  // over all trials and blocked coordinates
  bool passed = false;
};

struct GradSuiteOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 7;
  double h = 1e-5;
  double tol = 1e-4;
  double block_tol = 1e-12;
};

struct GradSuiteReport {
  GradSuiteOptions options;
  std::vector<GradCase> cases;
  std::vector<BlockCase> blocking;
  double seconds = 0.0;
  bool passed() const;
};

// Reverse-mode against central differences for every loss on small random
// networks (2-d input, 8-unit feature and hidden layers, K = 4 so 5 logits),
// inputs uniform on [-2, 2], plus the gradient-blocking contracts.
GradSuiteReport run_grad_suite(const GradSuiteOptions& options = {});

std::string grad_suite_text(const GradSuiteReport& report);

}  // namespace gada::bench

#endif  // GADA_BENCH_GRAD_SUITE_HPP
