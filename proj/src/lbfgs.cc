#include "saslc/lbfgs.h"

#include <algorithm>
#include <cmath>
#include <deque>

namespace saslc {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns -H g.
std::vector<double> search_direction(const std::deque<Correction>& mem,
                                     std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * dot(mem[i].s, q);
    for (std::size_t d = 0; d < q.size(); ++d) q[d] -= alpha[i] * mem[i].y[d];
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * dot(mem[i].y, q);
    for (std::size_t d = 0; d < q.size(); ++d) q[d] += (alpha[i] - beta) * mem[i].s[d];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

LbfgsResult minimize_lbfgs(const ObjectiveFn& f, std::vector<double>& x,
                           const LbfgsOptions& opts) {
  const std::size_t n = x.size();
  LbfgsResult res;
  std::vector<double> g(n), g_new(n), x_new(n);
  double fx = f(x, g);
  res.initial_value = fx;
  res.values.push_back(fx);
  res.grad_inf_norm = inf_norm(g);
  if (res.grad_inf_norm < opts.grad_tol) {
    res.converged = true;
    res.value = fx;
    return res;
  }

  std::deque<Correction> mem;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    std::vector<double> dir = search_direction(mem, g);
    double slope = dot(dir, g);
    if (!(slope < 0.0)) {
      // Curvature memory went bad; restart from steepest descent.
      mem.clear();
      for (std::size_t d = 0; d < n; ++d) dir[d] = -g[d];
      slope = dot(dir, g);
    }
    double step = 1.0;
    if (mem.empty()) step = std::min(1.0, 1.0 / std::max(1e-12, inf_norm(g)));

    bool accepted = false;
    double f_new = fx;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      for (std::size_t d = 0; d < n; ++d) x_new[d] = x[d] + step * dir[d];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + opts.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    Correction c{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t d = 0; d < n; ++d) {
      c.s[d] = x_new[d] - x[d];
      c.y[d] = g_new[d] - g[d];
    }
    const double sy = dot(c.s, c.y);
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.iterations = iter + 1;
    res.values.push_back(fx);
    if (sy > 1e-12 * std::sqrt(dot(c.s, c.s) * dot(c.y, c.y))) {
      c.rho = 1.0 / sy;
      mem.push_back(std::move(c));
      if (static_cast<int>(mem.size()) > opts.history) mem.pop_front();
    }
    res.grad_inf_norm = inf_norm(g);
    if (res.grad_inf_norm < opts.grad_tol) {
      res.converged = true;
      break;
    }
  }
  res.value = fx;
  return res;
}

}  // namespace saslc
