#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace hypolab {

struct LbfgsOptions {
  int max_iterations = 400;
  int history = 10;
  double gradient_tolerance = 1e-9;  // on the inf-norm, relative to max(1, |f|)
  double function_tolerance = 1e-14; // relative decrease over one iteration
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with backtracking Armijo steps. `objective(x, grad)`
/// returns f(x) and writes the gradient.
template <class Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, Eigen::VectorXd x, const LbfgsOptions& opts = {}) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n), dir(n);
  double f = objective(x, g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  LbfgsResult out;
  int stalls = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it;
    if (!std::isfinite(f)) break;
    if (g.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = -g;
    const size_t k = s_hist.size();
    std::vector<double> alpha(k);
    for (size_t i = k; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (k > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (size_t i = 0; i < k; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = (k == 0) ? std::min(1.0, 1.0 / std::max(1e-300, g.lpNorm<Eigen::Infinity>())) : 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double decrease = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (decrease <= opts.function_tolerance * std::max(1.0, std::abs(f))) {
      if (++stalls >= 3) {
        out.converged = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }
  out.x = std::move(x);
  out.value = f;
  return out;
}

}  // namespace hypolab
