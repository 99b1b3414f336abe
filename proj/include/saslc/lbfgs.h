// Limited-memory BFGS with backtracking Armijo line search.

#ifndef SASLC_LBFGS_H_
#define SASLC_LBFGS_H_

#include <functional>
#include <span>
#include <vector>

namespace saslc {

// Returns f(x) and writes the gradient into `grad`.
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  int max_iters = 100;
  double grad_tol = 1e-5;  // on the infinity norm
  int history = 7;
  int max_backtracks = 40;
  double armijo_c = 1e-4;
};

struct LbfgsResult {
  int iterations = 0;
  double initial_value = 0.0;
  double value = 0.0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  // Set when no step satisfying sufficient decrease was found; x holds the
  // best point seen.
  bool line_search_failed = false;
  // Objective after each accepted step, starting with the initial value.
  std::vector<double> values;
};

// Minimizes in place starting from x. Every accepted step satisfies the
// Armijo condition, so the objective sequence is non-increasing.
LbfgsResult minimize_lbfgs(const ObjectiveFn& f, std::vector<double>& x,
                           const LbfgsOptions& opts);

}  // namespace saslc

#endif  // SASLC_LBFGS_H_
