#pragma once

#include "hypolab/error.hpp"
#include "hypolab/linalg.hpp"
#include "hypolab/models.hpp"
#include "hypolab/optimize.hpp"
#include "hypolab/parallel.hpp"
#include "hypolab/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hypolab {

inline constexpr double kCapInfinity = 1e3;
inline constexpr double kTolGrad = 1e-3;
inline constexpr double kTolEq = 1e-6;
inline constexpr double kTolH = 1e-6;

inline double tol_dist(double value) { return 0.01 * (1.0 + value); }
inline double tol_gap(double value) { return 0.02 * (1.0 + value); }

// ---------------------------------------------------------------------------
// Controls

/// Piecewise-constant control in frame coordinates on [0, 1]: row k is
/// u_k = (<xi, X_1>, ..., <xi, X_m>) on step k.
struct ControlPath {
  int n_steps = 0;
  Eigen::MatrixXd controls;

  double dt() const { return 1.0 / n_steps; }
  int num_controls() const { return static_cast<int>(controls.cols()); }

  static ControlPath constant(int n_steps, const Vec& u) {
    ControlPath c;
    c.n_steps = n_steps;
    c.controls.resize(n_steps, u.size());
    for (int k = 0; k < n_steps; ++k) c.controls.row(k) = u.transpose();
    return c;
  }
};

inline double energy(const ControlPath& c) {
  if (c.n_steps == 0) return 0.0;
  return c.controls.rowwise().squaredNorm().sum() * c.dt();
}

/// Sum of |u_k| dt.
inline double path_length(const ControlPath& c) {
  if (c.n_steps == 0) return 0.0;
  return c.controls.rowwise().norm().sum() * c.dt();
}

/// Time reversal: the reversed path runs backwards along the same curve.
inline ControlPath reversed(const ControlPath& c) {
  ControlPath r = c;
  for (int k = 0; k < c.n_steps; ++k) r.controls.row(k) = -c.controls.row(c.n_steps - 1 - k);
  return r;
}

/// Arc-length resampling onto the same grid. Each new step averages the unit
/// directions it covers, so |u| <= length and energy never increases.
inline ControlPath constant_speed(const ControlPath& c) {
  const int n = c.n_steps;
  const double length = path_length(c);
  ControlPath out = c;
  if (n == 0 || length <= 0) return out;
  out.controls.setZero();
  const double dt = c.dt();
  const double seg = length / n;
  int j = 0;
  double filled = 0;  // arc length already assigned to new step j
  for (int k = 0; k < n; ++k) {
    const double speed = c.controls.row(k).norm();
    double remaining = speed * dt;
    if (remaining <= 0) continue;
    const Eigen::RowVectorXd dir = c.controls.row(k) / speed;
    while (remaining > 0 && j < n) {
      const double take = std::min(remaining, seg - filled);
      out.controls.row(j) += dir * take;
      filled += take;
      remaining -= take;
      if (filled >= seg * (1 - 1e-12)) {
        ++j;
        filled = 0;
      }
    }
    if (j >= n && remaining > 0) out.controls.row(n - 1) += dir * remaining;
  }
  out.controls *= static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Horizontal paths

struct Trajectory {
  std::vector<Vec> points;
  std::optional<int> exit_index;  // first point outside the domain
};

namespace detail {

inline Vec flow_rhs(const SubRiemannianStructure& s, const Vec& x, const Eigen::VectorXd& u) {
  Vec v = Vec::Zero(s.dim);
  for (int l = 0; l < s.num_fields(); ++l)
    if (u(l) != 0.0) v += u(l) * s.fields[static_cast<size_t>(l)](x);
  return v;
}

inline Vec rk4_step(const SubRiemannianStructure& s, const Vec& x, const Eigen::VectorXd& u, double h) {
  const Vec k1 = flow_rhs(s, x, u);
  const Vec k2 = flow_rhs(s, x + 0.5 * h * k1, u);
  const Vec k3 = flow_rhs(s, x + 0.5 * h * k2, u);
  const Vec k4 = flow_rhs(s, x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// gamma' = sum_l u_l X_l(gamma), one RK4 step per control step.
inline Trajectory integrate_control(const SubRiemannianStructure& s, const Vec& x0, const ControlPath& c) {
  require_in_domain(s, x0, "integrate_control");
  Trajectory t;
  t.points.reserve(static_cast<size_t>(c.n_steps) + 1);
  t.points.push_back(x0);
  Vec x = x0;
  for (int k = 0; k < c.n_steps; ++k) {
    x = detail::rk4_step(s, x, c.controls.row(k).transpose(), c.dt());
    t.points.push_back(x);
    if (!t.exit_index && !s.contains(x)) t.exit_index = k + 1;
  }
  return t;
}

/// Penalty on the discrete trajectory: returns its value and accumulates
/// d(penalty)/d(state_k) into grads (pre-sized, zeroed).
using TrajectoryPenalty = std::function<double(const std::vector<Vec>& states, std::vector<Vec>& grads)>;

namespace detail {

/// Discrete optimal-control objective  dt sum |u_k|^2 + penalty(states)
/// with the exact reverse-mode gradient through the RK4 steps.
class ControlObjective {
 public:
  ControlObjective(const SubRiemannianStructure& s, Vec x0, int n_steps)
      : s_(s), x0_(std::move(x0)), n_(n_steps), m_(s.num_fields()), d_(s.dim) {}

  int size() const { return n_ * m_; }

  std::vector<Vec> forward(const Eigen::VectorXd& u) const {
    std::vector<Vec> states;
    states.reserve(static_cast<size_t>(n_) + 1);
    states.push_back(x0_);
    const double h = 1.0 / n_;
    for (int k = 0; k < n_; ++k) states.push_back(rk4_step(s_, states.back(), u.segment(k * m_, m_), h));
    return states;
  }

  /// Value and gradient; optionally the costate at x0 (gradient of the
  /// penalty with respect to the initial point through the dynamics).
  double evaluate(const Eigen::VectorXd& u, Eigen::VectorXd& grad, const TrajectoryPenalty& penalty,
                  Vec* costate0 = nullptr) const {
    const double h = 1.0 / n_;
    const auto states = forward(u);
    std::vector<Vec> pgrad(states.size(), Vec::Zero(d_));
    const double pen = penalty(states, pgrad);
    double value = h * u.squaredNorm() + pen;
    grad.resize(u.size());
    Vec lam = pgrad.back();
    for (int k = n_ - 1; k >= 0; --k) {
      const Eigen::VectorXd uk = u.segment(k * m_, m_);
      const Vec& x = states[static_cast<size_t>(k)];
      const Mat g1 = s_.frame(x);
      const Vec k1 = g1 * uk;
      const Vec x2 = x + 0.5 * h * k1;
      const Mat g2 = s_.frame(x2);
      const Vec k2 = g2 * uk;
      const Vec x3 = x + 0.5 * h * k2;
      const Mat g3 = s_.frame(x3);
      const Vec k3 = g3 * uk;
      const Vec x4 = x + h * k3;
      const Mat g4 = s_.frame(x4);

      Vec dk1 = (h / 6.0) * lam;
      Vec dk2 = (h / 3.0) * lam;
      Vec dk3 = (h / 3.0) * lam;
      const Vec dk4 = (h / 6.0) * lam;
      Vec lx = lam;
      Eigen::VectorXd du = g4.transpose() * dk4;
      const Vec lx4 = jt_times(x4, uk, dk4);
      lx += lx4;
      dk3 += h * lx4;
      du += g3.transpose() * dk3;
      const Vec lx3 = jt_times(x3, uk, dk3);
      lx += lx3;
      dk2 += 0.5 * h * lx3;
      du += g2.transpose() * dk2;
      const Vec lx2 = jt_times(x2, uk, dk2);
      lx += lx2;
      dk1 += 0.5 * h * lx2;
      du += g1.transpose() * dk1;
      lx += jt_times(x, uk, dk1);
      grad.segment(k * m_, m_) = 2.0 * h * uk + du;
      lam = lx + pgrad[static_cast<size_t>(k)];
    }
    if (costate0) *costate0 = lam;
    return value;
  }

 private:
  // (sum_l u_l DX_l(x))^T v
  Vec jt_times(const Vec& x, const Eigen::VectorXd& u, const Vec& v) const {
    Vec out = Vec::Zero(d_);
    for (int l = 0; l < m_; ++l) {
      if (u(l) == 0.0) continue;
      const Mat j = s_.fields[static_cast<size_t>(l)].jacobian_at(x);
      out.noalias() += u(l) * (j.transpose() * v);
    }
    return out;
  }

  const SubRiemannianStructure& s_;
  Vec x0_;
  int n_, m_, d_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Distances

struct DistanceOptions {
  int n_steps = 64;
  int restarts = 8;
  std::vector<double> penalties = {1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  double tol_end = 1e-4;
  int max_iterations = 300;  // per penalty stage
  bool reparametrize = true;
  bool refine = true;
  std::uint64_t seed = 0xC0FFEE;
  int workers = 1;

  /// Cheap mode used for ball membership.
  static DistanceOptions cheap() {
    DistanceOptions o;
    o.n_steps = 24;
    o.restarts = 2;
    o.max_iterations = 150;
    o.reparametrize = false;
    o.refine = false;
    return o;
  }
};

struct DistanceResult {
  double value = 0;
  std::optional<ControlPath> witness;
  std::optional<double> dual_bound;
  std::optional<double> gap;
  bool converged = false;
  int restarts_used = 0;
  double terminal_gap = 0;
  Vec initial_covector;          // costate seed for normal-geodesic shooting
  bool refined = false;          // value replaced by a shot geodesic
  bool refine_converged = false;
  double hamiltonian_drift = 0;  // relative variation of H along the shot
  std::optional<Vec> via_point;  // touch point for through-set distances
  std::optional<double> set_lower_bound;  // d(x,A) + d(y,A)
  // x -> via and via -> y geodesic legs, through-set distances only
  std::optional<ControlPath> first_leg, second_leg;
  double first_leg_length = 0, second_leg_length = 0;

  void set_dual_bound(double bound) {
    dual_bound = bound;
    gap = value - bound;
  }
};

/// Closed set A = {level >= 0}.
struct ClosedSet {
  ScalarFn level;
  std::vector<Vec> projection_hint;
  PointFn level_gradient;  // optional

  bool contains(const Vec& x) const { return level(x) >= 0.0; }

  Vec gradient(const Vec& x) const {
    if (level_gradient) return level_gradient(x);
    return central_gradient(level, x, 1e-6 * std::max(1.0, x.norm()));
  }
};

/// {x : x_axis >= threshold}
inline ClosedSet half_space(int dim, int axis, double threshold) {
  ClosedSet a;
  a.level = [axis, threshold](const Vec& x) { return x(axis) - threshold; };
  a.level_gradient = [dim, axis](const Vec&) { return unit_vec(dim, axis); };
  Vec hint = Vec::Zero(dim);
  hint(axis) = threshold;
  a.projection_hint.push_back(hint);
  return a;
}

/// {x : |x - center| >= radius}
inline ClosedSet ball_complement(const Vec& center, double radius) {
  ClosedSet a;
  a.level = [center, radius](const Vec& x) { return (x - center).norm() - radius; };
  return a;
}

/// Complement of the open box (lo, hi): penetration depth beyond the faces.
inline double box_outside_depth(const Vec& lo, const Vec& hi, const Vec& x) {
  double depth = -kInf;
  for (int k = 0; k < x.size(); ++k) depth = std::max({depth, lo(k) - x(k), x(k) - hi(k)});
  return depth;
}

inline ClosedSet box_complement(const Vec& lo, const Vec& hi) {
  ClosedSet a;
  a.level = [lo, hi](const Vec& x) { return box_outside_depth(lo, hi, x); };
  return a;
}

/// Open region U = {outside_depth < 0}; outside_depth is >= 0 off U and
/// measures how far beyond the boundary a point lies.
struct OpenRegion {
  ScalarFn outside_depth;
  bool contains(const Vec& x) const { return outside_depth(x) < 0.0; }
  ClosedSet complement() const { return ClosedSet{outside_depth, {}, {}}; }
};

inline OpenRegion open_box(const Vec& lo, const Vec& hi) {
  return OpenRegion{[lo, hi](const Vec& x) { return box_outside_depth(lo, hi, x); }};
}

inline OpenRegion open_ball(const Vec& center, double radius) {
  return OpenRegion{[center, radius](const Vec& x) { return (x - center).norm() - radius; }};
}

/// Root of the level function along its gradient line through z, by
/// bracketing and bisection.
inline Vec project_to_boundary(const ClosedSet& a, const Vec& z) {
  const double l0 = a.level(z);
  if (l0 == 0.0) return z;
  Vec dir = a.gradient(z);
  if (dir.norm() == 0.0) return z;
  dir /= dir.norm();
  const double sign = l0 < 0 ? 1.0 : -1.0;
  double lo = 0, hi = std::max(std::abs(l0), 1e-6);
  int grow = 0;
  while ((a.level(z + sign * hi * dir) < 0) == (l0 < 0) && grow++ < 60) hi *= 2;
  if (grow > 60) return z;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((a.level(z + sign * mid * dir) < 0) == (l0 < 0))
      lo = mid;
    else
      hi = mid;
  }
  return z + sign * hi * dir;
}

namespace detail {

/// Least-squares constant control moving x toward target in one unit of time.
inline Eigen::VectorXd aimed_control(const SubRiemannianStructure& s, const Vec& from, const Vec& to) {
  const Mat g = s.frame(from);
  const Eigen::MatrixXd dense = g;
  const Eigen::VectorXd rhs = (to - from);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(rhs);
}

/// Random piecewise-linear control perturbation with 5 knots.
inline Eigen::VectorXd random_pl_controls(int n_steps, int m, double scale, std::uint64_t seed, std::uint64_t id) {
  const CounterRng rng(seed, id);
  constexpr int kKnots = 5;
  Eigen::MatrixXd knots(kKnots, m);
  std::vector<double> z(static_cast<size_t>(m));
  for (int j = 0; j < kKnots; ++j) {
    rng.normals(static_cast<std::uint32_t>(j), m, z, static_cast<std::uint32_t>(Stream::kSeeding));
    for (int l = 0; l < m; ++l) knots(j, l) = scale * z[static_cast<size_t>(l)];
  }
  Eigen::VectorXd u(n_steps * m);
  for (int k = 0; k < n_steps; ++k) {
    const double pos = (k + 0.5) / n_steps * (kKnots - 1);
    const int j = std::min(kKnots - 2, static_cast<int>(pos));
    const double w = pos - j;
    u.segment(k * m, m) = ((1 - w) * knots.row(j) + w * knots.row(j + 1)).transpose();
  }
  return u;
}

inline Eigen::VectorXd tile(const Eigen::VectorXd& u, int n_steps) {
  Eigen::VectorXd out(n_steps * u.size());
  for (int k = 0; k < n_steps; ++k) out.segment(k * u.size(), u.size()) = u;
  return out;
}

struct SolveOutcome {
  Eigen::VectorXd u;
  double energy = kInf;
  double violation = kInf;
  double objective = kInf;
  Vec costate0;
  int restart = 0;
};

using PenaltyFactory = std::function<TrajectoryPenalty(double rho)>;
using ViolationFn = std::function<double(const std::vector<Vec>& states)>;

inline SolveOutcome solve_schedule(const ControlObjective& obj, Eigen::VectorXd u, const DistanceOptions& opts,
                                   const PenaltyFactory& make_penalty, const ViolationFn& violation,
                                   const std::vector<double>& schedule) {
  LbfgsOptions lo;
  lo.max_iterations = opts.max_iterations;
  SolveOutcome out;
  for (double rho : schedule) {
    const auto pen = make_penalty(rho);
    auto f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) { return obj.evaluate(v, g, pen); };
    u = minimize_lbfgs(f, u, lo).x;
  }
  Eigen::VectorXd g;
  const auto pen = make_penalty(schedule.back());
  out.objective = obj.evaluate(u, g, pen, &out.costate0);
  const auto states = obj.forward(u);
  out.violation = violation(states);
  out.energy = u.squaredNorm() / (static_cast<double>(states.size()) - 1.0);
  out.u = std::move(u);
  return out;
}

}  // namespace detail

namespace detail {

/// Multi-start penalty solve; `seed_controls(r)` gives restart r's start.
/// Reduction: smallest energy among feasible restarts, ties by index.
inline SolveOutcome multistart(const SubRiemannianStructure& s, const Vec& x, const DistanceOptions& opts,
                               const PenaltyFactory& make_penalty, const ViolationFn& violation,
                               const std::function<Eigen::VectorXd(int)>& seed_controls, int restarts,
                               bool stop_early_below = false, double early_threshold = 0) {
  const ControlObjective obj(s, x, opts.n_steps);
  auto run = [&](int r) {
    SolveOutcome o = solve_schedule(obj, seed_controls(r), opts, make_penalty, violation, opts.penalties);
    o.restart = r;
    return o;
  };
  std::vector<SolveOutcome> outcomes;
  if (stop_early_below) {
    for (int r = 0; r < restarts; ++r) {
      outcomes.push_back(run(r));
      const auto& o = outcomes.back();
      if (o.violation <= opts.tol_end && o.energy <= early_threshold) break;
    }
  } else {
    outcomes = parallel_map<SolveOutcome>(static_cast<size_t>(restarts), opts.workers,
                                          [&](size_t r) { return run(static_cast<int>(r)); });
  }
  const SolveOutcome* best = nullptr;
  for (const auto& o : outcomes) {
    const bool feasible = o.violation <= opts.tol_end;
    if (!best) {
      best = &o;
      continue;
    }
    const bool best_feasible = best->violation <= opts.tol_end;
    if (feasible && !best_feasible) best = &o;
    else if (feasible == best_feasible) {
      const double key = feasible ? o.energy : o.objective;
      const double best_key = feasible ? best->energy : best->objective;
      if (key < best_key) best = &o;
    }
  }
  SolveOutcome out = *best;
  out.restart = static_cast<int>(outcomes.size());
  return out;
}

inline ControlPath to_control_path(const Eigen::VectorXd& u, int n_steps, int m) {
  ControlPath c;
  c.n_steps = n_steps;
  c.controls.resize(n_steps, m);
  for (int k = 0; k < n_steps; ++k) c.controls.row(k) = u.segment(k * m, m).transpose();
  return c;
}

inline Eigen::VectorXd flatten(const ControlPath& c) {
  Eigen::VectorXd u(c.n_steps * c.num_controls());
  for (int k = 0; k < c.n_steps; ++k) u.segment(k * c.num_controls(), c.num_controls()) = c.controls.row(k).transpose();
  return u;
}

/// Penalty weights are divided by scale^2, scale = min(1, problem size), so
/// short targets are not traded for the zero control at the first stages.
inline double penalty_weight(double scale) {
  const double sc = std::clamp(scale, 1e-3, 1.0);
  return 1.0 / (sc * sc);
}

inline PenaltyFactory endpoint_penalty(const Vec& y, double weight) {
  return [y, weight](double rho_base) -> TrajectoryPenalty {
    const double rho = rho_base * weight;
    return [y, rho](const std::vector<Vec>& states, std::vector<Vec>& grads) {
      const Vec e = states.back() - y;
      grads.back() += 2.0 * rho * e;
      return rho * e.squaredNorm();
    };
  };
}

inline ViolationFn endpoint_violation(const Vec& y) {
  return [y](const std::vector<Vec>& states) { return (states.back() - y).norm(); };
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Normal geodesics

struct GeodesicShot {
  Vec endpoint;
  double hamiltonian = 0;        // H at the start
  double hamiltonian_drift = 0;  // max relative deviation of H along the flow
  std::vector<Vec> points;
};

/// Integrates x' = sum <p,X_l> X_l, p' = -sum <p,X_l> DX_l^T p on [0, 1].
inline GeodesicShot shoot_geodesic(const SubRiemannianStructure& s, const Vec& x0, const Vec& p0, int n_steps = 200,
                                   bool keep_points = false) {
  const int d = s.dim;
  auto hamiltonian = [&](const Vec& x, const Vec& p) {
    double h = 0;
    for (const auto& f : s.fields) {
      const double a = p.dot(f(x));
      h += a * a;
    }
    return 0.5 * h;
  };
  auto rhs = [&](const Vec& x, const Vec& p, Vec& dx, Vec& dp) {
    dx = Vec::Zero(d);
    dp = Vec::Zero(d);
    for (const auto& f : s.fields) {
      const Vec v = f(x);
      const double a = p.dot(v);
      dx += a * v;
      dp -= a * (f.jacobian_at(x).transpose() * p);
    }
  };
  GeodesicShot shot;
  Vec x = x0, p = p0;
  shot.hamiltonian = hamiltonian(x, p);
  if (keep_points) shot.points.push_back(x);
  const double h = 1.0 / n_steps;
  Vec ax, ap, bx, bp, cx, cp, ex, ep;
  for (int k = 0; k < n_steps; ++k) {
    rhs(x, p, ax, ap);
    rhs(x + 0.5 * h * ax, p + 0.5 * h * ap, bx, bp);
    rhs(x + 0.5 * h * bx, p + 0.5 * h * bp, cx, cp);
    rhs(x + h * cx, p + h * cp, ex, ep);
    x += (h / 6.0) * (ax + 2 * bx + 2 * cx + ex);
    p += (h / 6.0) * (ap + 2 * bp + 2 * cp + ep);
    const double hk = hamiltonian(x, p);
    shot.hamiltonian_drift =
        std::max(shot.hamiltonian_drift, std::abs(hk - shot.hamiltonian) / std::max(shot.hamiltonian, 1e-300));
    if (keep_points) shot.points.push_back(x);
    if (!x.allFinite() || !p.allFinite()) break;
  }
  shot.endpoint = x;
  return shot;
}

/// Damped Newton on the endpoint map of normal geodesics, seeded by the
/// witness costate. Replaces the value when the shot lands on y and is no
/// longer than the primal value (up to tol_dist / 10).
inline DistanceResult shoot_refine(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                   const DistanceResult& result, int n_steps = 200) {
  if (!result.witness) throw ArgumentError("shoot_refine: witness required");
  DistanceResult out = result;
  out.refine_converged = false;
  const int d = s.dim;
  Vec p = result.initial_covector.size() == d ? result.initial_covector : Vec(Vec::Zero(d));
  if (p.norm() == 0.0) {
    // Seed from the first control: p with G(x)^T p = u_0.
    const Mat g = s.frame(x);
    const Eigen::MatrixXd gt = g.transpose();
    const Eigen::VectorXd u0 = result.witness->controls.row(0).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    p = Vec(svd.solve(u0));
  }
  auto residual = [&](const Vec& q) { return Vec(shoot_geodesic(s, x, q, n_steps).endpoint - y); };
  Vec r = residual(p);
  double rn = r.allFinite() ? r.norm() : kInf;
  const double target = 1e-10 * (1.0 + y.norm());
  for (int it = 0; it < 40 && rn > target; ++it) {
    const double eps = 1e-6 * std::max(1.0, p.norm());
    Eigen::MatrixXd jac(d, d);
    for (int j = 0; j < d; ++j) {
      Vec pp = p, pm = p;
      pp(j) += eps;
      pm(j) -= eps;
      jac.col(j) = (residual(pp) - residual(pm)) / (2 * eps);
    }
    if (!jac.allFinite()) break;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-9);
    const Eigen::VectorXd rr = r;
    const Vec step = Vec(svd.solve(-rr));
    double alpha = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Vec trial = p + alpha * step;
      const Vec rt = residual(trial);
      if (rt.allFinite() && rt.norm() < rn) {
        p = trial;
        r = rt;
        rn = rt.norm();
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  if (!(rn <= 1e-8 * (1.0 + y.norm()))) return out;
  const auto shot = shoot_geodesic(s, x, p, n_steps);
  const double value = std::sqrt(2.0 * shot.hamiltonian);
  out.refine_converged = true;
  out.hamiltonian_drift = shot.hamiltonian_drift;
  if (value <= result.value + 0.1 * tol_dist(result.value)) {
    out.value = value;
    out.refined = true;
    out.initial_covector = p;
    out.terminal_gap = rn;
    out.converged = true;
  }
  return out;
}

namespace detail {

inline double seed_scale(double estimate) { return 0.5 * std::max(1.0, estimate); }

/// Polishes a control at the final penalty level; used after reparametrizing.
inline Eigen::VectorXd polish(const ControlObjective& obj, Eigen::VectorXd u, const DistanceOptions& opts,
                              const PenaltyFactory& make_penalty) {
  LbfgsOptions lo;
  lo.max_iterations = opts.max_iterations;
  const auto pen = make_penalty(opts.penalties.back());
  auto f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) { return obj.evaluate(v, g, pen); };
  return minimize_lbfgs(f, std::move(u), lo).x;
}

inline DistanceResult finish(const SubRiemannianStructure& s, const Vec& x, const DistanceOptions& opts,
                             const PenaltyFactory& make_penalty, const ViolationFn& violation, SolveOutcome best) {
  const ControlObjective obj(s, x, opts.n_steps);
  const int m = s.num_fields();
  const double h = 1.0 / opts.n_steps;
  DistanceResult res;
  if (opts.reparametrize) {
    const auto c = constant_speed(to_control_path(best.u, opts.n_steps, m));
    Eigen::VectorXd u = polish(obj, flatten(c), opts, make_penalty);
    const double viol = violation(obj.forward(u));
    const double en = h * u.squaredNorm();
    if (viol <= std::max(opts.tol_end, best.violation) && en <= best.energy * (1 + 1e-9) + 1e-14) {
      Eigen::VectorXd g;
      best.objective = obj.evaluate(u, g, make_penalty(opts.penalties.back()), &best.costate0);
      best.u = std::move(u);
      best.energy = en;
      best.violation = viol;
    }
  }
  res.value = std::sqrt(best.energy);
  res.witness = to_control_path(best.u, opts.n_steps, m);
  res.terminal_gap = best.violation;
  res.converged = best.violation <= opts.tol_end;
  res.restarts_used = best.restart;
  res.initial_covector = -0.5 * best.costate0;
  return res;
}

}  // namespace detail

/// Sub-Riemannian distance by penalized energy minimization over controls.
inline DistanceResult distance(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                               const DistanceOptions& opts = {}) {
  require_in_domain(s, x, "distance");
  require_in_domain(s, y, "distance");
  const int m = s.num_fields();
  const Eigen::VectorXd aimed = detail::aimed_control(s, x, y);
  const double scale = detail::seed_scale((y - x).norm());
  auto seeds = [&](int r) -> Eigen::VectorXd {
    Eigen::VectorXd u = detail::tile(aimed, opts.n_steps);
    if (r > 0) u += detail::random_pl_controls(opts.n_steps, m, scale, opts.seed, static_cast<std::uint64_t>(r));
    return u;
  };
  const auto pen = detail::endpoint_penalty(y, detail::penalty_weight((y - x).norm()));
  const auto viol = detail::endpoint_violation(y);
  auto best = detail::multistart(s, x, opts, pen, viol, seeds, opts.restarts);
  auto res = detail::finish(s, x, opts, pen, viol, std::move(best));
  if (opts.refine && res.value > 0) res = shoot_refine(s, x, y, res);
  return res;
}

/// Ball membership test d(x, y) <= r in cheap mode; stops at the first
/// restart that certifies membership.
inline bool within_distance(const SubRiemannianStructure& s, const Vec& x, const Vec& y, double r,
                            const DistanceOptions& opts) {
  const int m = s.num_fields();
  const Eigen::VectorXd aimed = detail::aimed_control(s, x, y);
  const double scale = detail::seed_scale((y - x).norm());
  auto seeds = [&](int k) -> Eigen::VectorXd {
    Eigen::VectorXd u = detail::tile(aimed, opts.n_steps);
    if (k > 0) u += detail::random_pl_controls(opts.n_steps, m, scale, opts.seed, static_cast<std::uint64_t>(k));
    return u;
  };
  const auto best = detail::multistart(s, x, opts, detail::endpoint_penalty(y, detail::penalty_weight((y - x).norm())), detail::endpoint_violation(y), seeds,
                                       opts.restarts, true, r * r);
  return best.violation <= opts.tol_end && best.energy <= r * r;
}

/// d(x, A) with the endpoint pushed into A by the penalty max(0, -level)^2.
inline DistanceResult distance_to_set(const SubRiemannianStructure& s, const Vec& x, const ClosedSet& a,
                                      const DistanceOptions& opts = {}) {
  require_in_domain(s, x, "distance_to_set");
  if (a.contains(x)) {
    DistanceResult r;
    r.converged = true;
    return r;
  }
  const int m = s.num_fields();
  Vec grad = a.gradient(x);
  if (grad.norm() < 1e-3) grad.setZero();  // kink or flat spot: no usable direction
  const double guess = grad.norm() > 0 ? std::abs(a.level(x)) / grad.norm() : std::abs(a.level(x));
  auto seeds = [&](int r) -> Eigen::VectorXd {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(opts.n_steps * m);
    if (!a.projection_hint.empty()) {
      const auto& hint = a.projection_hint[static_cast<size_t>(r) % a.projection_hint.size()];
      u = detail::tile(detail::aimed_control(s, x, hint), opts.n_steps);
    } else if (grad.norm() > 0) {
      u = detail::tile(detail::aimed_control(s, x, x + guess * grad / grad.norm()), opts.n_steps);
    }
    if (r > 0) u += detail::random_pl_controls(opts.n_steps, m, detail::seed_scale(guess), opts.seed,
                                               static_cast<std::uint64_t>(r));
    return u;
  };
  const double weight = detail::penalty_weight(guess);
  detail::PenaltyFactory pen = [&a, weight](double rho_base) -> TrajectoryPenalty {
    const double rho = rho_base * weight;
    return [&a, rho](const std::vector<Vec>& states, std::vector<Vec>& grads) {
      const double short_by = std::max(0.0, -a.level(states.back()));
      if (short_by > 0) grads.back() += -2.0 * rho * short_by * a.gradient(states.back());
      return rho * short_by * short_by;
    };
  };
  detail::ViolationFn viol = [&a](const std::vector<Vec>& states) { return std::max(0.0, -a.level(states.back())); };
  auto best = detail::multistart(s, x, opts, pen, viol, seeds, opts.restarts);
  return detail::finish(s, x, opts, pen, viol, std::move(best));
}

namespace detail {

/// Paths from x to y that touch {level >= 0} at some step.
inline DistanceResult touching_path(const SubRiemannianStructure& s, const Vec& x, const ClosedSet& a, const Vec& y,
                                    const DistanceOptions& opts, int* touch_index) {
  const int m = s.num_fields();
  const int n = opts.n_steps;
  std::vector<Vec> hints = a.projection_hint;
  if (hints.empty()) {
    const Vec grad = a.gradient(x);
    if (grad.norm() > 0) hints.push_back(project_to_boundary(a, x));
  }
  const double scale = seed_scale((y - x).norm() + (hints.empty() ? 1.0 : (hints.front() - x).norm()));
  auto seeds = [&](int r) -> Eigen::VectorXd {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n * m);
    if (!hints.empty()) {
      const Vec& z = hints[static_cast<size_t>(r) % hints.size()];
      const Eigen::VectorXd out_leg = 2.0 * aimed_control(s, x, z);
      const Eigen::VectorXd back_leg = 2.0 * aimed_control(s, z, y);
      for (int k = 0; k < n; ++k) u.segment(k * m, m) = k < n / 2 ? out_leg : back_leg;
    } else {
      u = tile(aimed_control(s, x, y), n);
    }
    if (r > 0) u += random_pl_controls(n, m, scale, opts.seed, static_cast<std::uint64_t>(r));
    return u;
  };
  auto max_level = [&a](const std::vector<Vec>& states, int& arg) {
    double best = -kInf;
    for (size_t k = 0; k < states.size(); ++k) {
      const double l = a.level(states[k]);
      if (l > best) {
        best = l;
        arg = static_cast<int>(k);
      }
    }
    return best;
  };
  const double weight = penalty_weight(std::min((y - x).norm(), hints.empty() ? 1.0 : (hints.front() - x).norm()) +
                                      (hints.empty() ? 0.0 : (hints.front() - y).norm()));
  PenaltyFactory pen = [&a, y, max_level, weight](double rho_base) -> TrajectoryPenalty {
    const double rho = rho_base * weight;
    return [&a, y, rho, max_level](const std::vector<Vec>& states, std::vector<Vec>& grads) {
      const Vec e = states.back() - y;
      grads.back() += 2.0 * rho * e;
      int arg = 0;
      const double short_by = std::max(0.0, -max_level(states, arg));
      if (short_by > 0) grads[static_cast<size_t>(arg)] += -2.0 * rho * short_by * a.gradient(states[static_cast<size_t>(arg)]);
      return rho * (e.squaredNorm() + short_by * short_by);
    };
  };
  ViolationFn viol = [y, max_level](const std::vector<Vec>& states) {
    int arg = 0;
    return std::max((states.back() - y).norm(), std::max(0.0, -max_level(states, arg)));
  };
  auto best = multistart(s, x, opts, pen, viol, seeds, opts.restarts);
  DistanceOptions no_reparam = opts;
  no_reparam.reparametrize = false;  // resampling would move the touch step
  auto res = finish(s, x, no_reparam, pen, viol, std::move(best));
  if (touch_index) {
    const ControlObjective obj(s, x, n);
    int arg = 0;
    max_level(obj.forward(flatten(*res.witness)), arg);
    *touch_index = arg;
  }
  return res;
}

}  // namespace detail

/// d(x, A, y) = inf_{z in A} d(x, z) + d(z, y): a joint touching-path solve,
/// then the via point projected onto the boundary of A and the two legs
/// re-solved; the smaller consistent value is reported.
inline DistanceResult distance_through_set(const SubRiemannianStructure& s, const Vec& x, const ClosedSet& a,
                                           const Vec& y, const DistanceOptions& opts = {}) {
  require_in_domain(s, x, "distance_through_set");
  require_in_domain(s, y, "distance_through_set");
  int touch = 0;
  DistanceResult res = detail::touching_path(s, x, a, y, opts, &touch);
  const auto traj = integrate_control(s, x, *res.witness);
  Vec z = traj.points[static_cast<size_t>(touch)];
  if (!a.contains(z)) z = project_to_boundary(a, z);
  if (!a.contains(z)) z = project_to_boundary(a, z) + 1e-12 * a.gradient(z);
  res.via_point = z;
  if (s.contains(z)) {
    DistanceOptions leg = opts;
    leg.restarts = std::max(2, opts.restarts / 2);
    const auto first = distance(s, x, z, leg);
    const auto second = distance(s, z, y, leg);
    const double via = first.value + second.value;
    if (first.witness && second.witness) {
      res.first_leg = first.witness;
      res.second_leg = second.witness;
      res.first_leg_length = first.value;
      res.second_leg_length = second.value;
    }
    if (first.converged && second.converged && via < res.value) {
      res.value = via;
      res.converged = true;
    }
  }
  const double dxa = distance_to_set(s, x, a, opts).value;
  const double dya = distance_to_set(s, y, a, opts).value;
  res.set_lower_bound = dxa + dya;
  return res;
}

struct MinEnergyResult {
  double energy = 0;
  bool converged = false;
};

/// Smallest energy of paths from x to y that penetrate at least delta_probe
/// beyond the boundary of U.
inline MinEnergyResult min_energy_outside(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                          const OpenRegion& u, double delta_probe, const DistanceOptions& opts = {}) {
  if (!u.contains(x) || !u.contains(y)) throw ArgumentError("min_energy_outside: endpoints must lie in U");
  ClosedSet beyond;
  beyond.level = [u, delta_probe](const Vec& z) { return u.outside_depth(z) - delta_probe; };
  int touch = 0;
  const auto res = detail::touching_path(s, x, beyond, y, opts, &touch);
  return {res.value * res.value, res.converged};
}

// ---------------------------------------------------------------------------
// Distance to infinity and the Hsu condition

struct ExhaustionBox {
  Vec lo, hi;
  double boundary_margin = 0;  // distance kept from the deleted set
};

/// Nested boxes centred at x with half-widths 0.5 * 2^k and boundary margins
/// 0.01 * 4^-k.
inline std::vector<ExhaustionBox> default_exhaustion(const Vec& x, int levels = 12) {
  std::vector<ExhaustionBox> out;
  for (int k = 0; k < levels; ++k) {
    const double half = 0.5 * std::pow(2.0, k);
    out.push_back({x.array() - half, x.array() + half, 0.01 * std::pow(4.0, -k)});
  }
  return out;
}

struct InfinityDistance {
  double value = 0;  // +inf when the sequence passes cap_inf
  std::vector<double> sequence;
};

inline InfinityDistance distance_to_infinity(const SubRiemannianStructure& s, const Vec& x,
                                             const std::vector<ExhaustionBox>& exhaustion,
                                             const DistanceOptions& opts = {}) {
  require_in_domain(s, x, "distance_to_infinity");
  InfinityDistance out;
  double sup = 0;
  for (const auto& box : exhaustion) {
    ClosedSet a;
    const bool bounded = s.has_boundary();
    a.level = [&s, box, bounded](const Vec& z) {
      double l = box_outside_depth(box.lo, box.hi, z);
      if (bounded) l = std::max(l, box.boundary_margin - s.gap(z));
      return l;
    };
    const double v = distance_to_set(s, x, a, opts).value;
    out.sequence.push_back(v);
    const double prev = sup;
    sup = std::max(sup, v);
    if (sup > kCapInfinity) {
      out.value = kInf;
      return out;
    }
    if (out.sequence.size() >= 2 && std::abs(sup - prev) <= 0.1 * tol_dist(sup)) break;
  }
  out.value = sup;
  return out;
}

struct HsuMembership {
  bool in_S = false;
  double d = 0;
  double dx_inf = 0;
  double dy_inf = 0;
};

/// Membership of (x, y) in S = {d(x,y) <= d(x,inf) + d(y,inf)}, decided at
/// tolerance tol_dist(d).
inline HsuMembership hsu_condition(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                   const std::vector<ExhaustionBox>& ex_x, const std::vector<ExhaustionBox>& ex_y,
                                   const DistanceOptions& opts = {}) {
  HsuMembership h;
  h.d = distance(s, x, y, opts).value;
  h.dx_inf = distance_to_infinity(s, x, ex_x, opts).value;
  h.dy_inf = distance_to_infinity(s, y, ex_y, opts).value;
  h.in_S = h.d <= h.dx_inf + h.dy_inf + tol_dist(h.d);
  return h;
}

inline HsuMembership hsu_condition(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                   const DistanceOptions& opts = {}) {
  return hsu_condition(s, x, y, default_exhaustion(x), default_exhaustion(y), opts);
}

// ---------------------------------------------------------------------------
// Dual certificates

struct DualCertificate {
  ScalarFn w_minus;
  ScalarFn w_plus;                // equal to w_minus when certifying d(x,y) or d(x,A)
  std::vector<Vec> grid;          // gradient check points
  std::vector<Vec> set_samples;   // points of A for the matching condition
  double max_gradient_norm2 = 0;  // filled by the check
  bool admissible = false;        // filled by the check
};

namespace detail {

inline double max_horizontal_gradient2(const SubRiemannianStructure& s, const ScalarFn& w, const std::vector<Vec>& grid) {
  double best = 0;
  for (const auto& p : grid) {
    if (!s.contains(p)) continue;
    const Vec g = central_gradient(w, p, kJacobianStep);
    best = std::max(best, cometric_pair(s, p, g, g));
  }
  return best;
}

}  // namespace detail

/// Lower bound w+(y) - w-(x) from an admissible pair (both a(grad w, grad w)
/// <= 1 + tol_grad on the grid, |w+ - w-| <= tol_eq on the set samples).
/// Non-admissible certificates give bound 0.
inline double dual_certificate_check(const SubRiemannianStructure& s, DualCertificate& cert, const Vec& x,
                                     const Vec& y) {
  if (cert.grid.empty()) throw ArgumentError("dual_certificate_check: empty gradient grid");
  const ScalarFn& wm = cert.w_minus;
  const ScalarFn& wp = cert.w_plus ? cert.w_plus : cert.w_minus;
  cert.max_gradient_norm2 = std::max(detail::max_horizontal_gradient2(s, wm, cert.grid),
                                     detail::max_horizontal_gradient2(s, wp, cert.grid));
  bool ok = cert.max_gradient_norm2 <= 1.0 + kTolGrad;
  for (const auto& z : cert.set_samples) ok = ok && std::abs(wp(z) - wm(z)) <= kTolEq;
  cert.admissible = ok;
  if (!ok) return 0.0;
  return std::max(0.0, wp(y) - wm(x));
}

/// Lower bound w(x) on d(x, A) from w with a(grad w, grad w) <= 1 and w = 0 on A.
inline double dual_certificate_check_set(const SubRiemannianStructure& s, DualCertificate& cert, const Vec& x) {
  if (cert.grid.empty()) throw ArgumentError("dual_certificate_check: empty gradient grid");
  cert.max_gradient_norm2 = detail::max_horizontal_gradient2(s, cert.w_minus, cert.grid);
  bool ok = cert.max_gradient_norm2 <= 1.0 + kTolGrad;
  for (const auto& z : cert.set_samples) ok = ok && std::abs(cert.w_minus(z)) <= kTolEq;
  cert.admissible = ok;
  return ok ? std::max(0.0, cert.w_minus(x)) : 0.0;
}

/// Regular grid over a box, `per_axis` points per coordinate.
inline std::vector<Vec> box_grid(const Vec& lo, const Vec& hi, int per_axis) {
  const int d = static_cast<int>(lo.size());
  long total = 1;
  for (int k = 0; k < d; ++k) total *= per_axis;
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(total));
  for (long idx = 0; idx < total; ++idx) {
    Vec p(d);
    long rem = idx;
    for (int k = 0; k < d; ++k) {
      const int i = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      p(k) = per_axis == 1 ? 0.5 * (lo(k) + hi(k)) : lo(k) + (hi(k) - lo(k)) * i / (per_axis - 1);
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ball volumes and derived diagnostics

struct BallVolume {
  double volume = 0;
  double stderr = 0;
  int n_samples = 0;
  int inside = 0;
};

struct VolumeOptions {
  int n_samples = 2000;
  std::uint64_t seed = 0xC0FFEE;
  int workers = 1;
  DistanceOptions membership = DistanceOptions::cheap();
};

/// Monte Carlo nu-volume of B(x, r). Samples fill a box aligned with the
/// bracket-adapted frame at x, with half-width k_i r^{w_i} along a direction
/// of bracket length w_i; k_i grows until no member of the ball lies within
/// 10% of a face.
inline BallVolume ball_volume(const SubRiemannianStructure& s, const Vec& x, double r, const VolumeOptions& opts = {}) {
  if (!(r > 0)) throw ArgumentError("ball_volume: radius must be positive");
  if (opts.n_samples < 1) throw ArgumentError("ball_volume: need at least one sample");
  require_in_domain(s, x, "ball_volume");
  const auto frame = adapted_frame(s, x);
  const int d = s.dim;
  std::vector<double> kappa(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) kappa[static_cast<size_t>(i)] = frame.weights[static_cast<size_t>(i)] == 1 ? 1.2 : 0.25;
  const double det = std::abs(Eigen::MatrixXd(frame.basis).determinant());
  const size_t n = static_cast<size_t>(opts.n_samples);

  std::vector<Vec> unit(n);
  for (size_t i = 0; i < n; ++i) {
    const CounterRng rng(opts.seed, i);
    Vec p(d);
    for (int k = 0; k < d; k += 2) {
      const auto u = rng.uniform2(static_cast<std::uint32_t>(k / 2), static_cast<std::uint32_t>(Stream::kSeeding));
      p(k) = 2 * u[0] - 1;
      if (k + 1 < d) p(k + 1) = 2 * u[1] - 1;
    }
    unit[i] = p;
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    Vec half(d);
    for (int k = 0; k < d; ++k) half(k) = kappa[static_cast<size_t>(k)] * std::pow(r, frame.weights[static_cast<size_t>(k)]);
    std::vector<Vec> pts(n);
    for (size_t i = 0; i < n; ++i) {
      pts[i] = x + frame.basis * unit[i].cwiseProduct(half);
      if (!s.contains(pts[i])) throw DomainError("ball_volume: sampling box leaves the domain");
    }
    const auto inside = parallel_map<char>(n, opts.workers, [&](size_t i) -> char {
      DistanceOptions o = opts.membership;
      o.seed = derive_seed(opts.seed, i);
      o.workers = 1;
      return within_distance(s, x, pts[i], r, o) ? 1 : 0;
    });
    bool grew = false;
    for (int k = 0; k < d; ++k) {
      double edge = 0;
      for (size_t i = 0; i < n; ++i)
        if (inside[i]) edge = std::max(edge, std::abs(unit[i](k)));
      if (edge > 0.9) {
        kappa[static_cast<size_t>(k)] *= 1.5;
        grew = true;
      }
    }
    if (grew) continue;
    const double box = det * half.prod() * std::pow(2.0, d);
    double sum = 0, sum2 = 0;
    int count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (!inside[i]) continue;
      const double w = s.nu_density(pts[i]);
      sum += w;
      sum2 += w * w;
      ++count;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    BallVolume out;
    out.volume = box * mean;
    out.stderr = box * std::sqrt(var / n);
    out.n_samples = opts.n_samples;
    out.inside = count;
    return out;
  }
  throw InsufficientSamples("ball_volume: sampling box failed to contain the ball");
}

struct DimensionEstimate {
  double slope = 0;
  std::vector<double> radii;
  std::vector<BallVolume> volumes;
};

/// Least-squares slope of log nu(B(x, r)) against log r.
inline DimensionEstimate dimension_estimate(const SubRiemannianStructure& s, const Vec& x,
                                            const std::vector<double>& r_grid, const VolumeOptions& opts = {}) {
  if (r_grid.size() < 4) throw ArgumentError("dimension_estimate: need at least 4 radii");
  for (size_t i = 1; i < r_grid.size(); ++i)
    if (!(r_grid[i] < r_grid[i - 1])) throw ArgumentError("dimension_estimate: radii must decrease");
  DimensionEstimate out;
  out.radii = r_grid;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < r_grid.size(); ++i) {
    VolumeOptions o = opts;
    o.seed = derive_seed(opts.seed, i);
    const auto v = ball_volume(s, x, r_grid[i], o);
    if (!(v.volume > 0)) throw InsufficientSamples("dimension_estimate: empty ball estimate");
    out.volumes.push_back(v);
    lx.push_back(std::log(r_grid[i]));
    ly.push_back(std::log(v.volume));
  }
  out.slope = ls_slope(lx, ly);
  return out;
}

inline double doubling_ratio(const SubRiemannianStructure& s, const Vec& x, double r, const VolumeOptions& opts = {}) {
  VolumeOptions o1 = opts, o2 = opts;
  o1.seed = derive_seed(opts.seed, 1);
  o2.seed = derive_seed(opts.seed, 2);
  const auto small = ball_volume(s, x, r, o1);
  const auto large = ball_volume(s, x, 2 * r, o2);
  if (!(small.volume > 0)) throw InsufficientSamples("doubling_ratio: empty ball estimate");
  return large.volume / small.volume;
}

/// Slope of log d(x, x + h dir) against log h.
inline double chart_exponent(const SubRiemannianStructure& s, const Vec& x, const Vec& direction,
                             const std::vector<double>& h_grid, const DistanceOptions& opts = {}) {
  if (h_grid.size() < 2) throw ArgumentError("chart_exponent: need at least 2 steps");
  std::vector<double> lx, ly;
  for (double h : h_grid) {
    if (!(h > 0)) throw ArgumentError("chart_exponent: steps must be positive");
    const auto r = distance(s, x, x + h * direction / direction.norm(), opts);
    lx.push_back(std::log(h));
    ly.push_back(std::log(r.value));
  }
  return ls_slope(lx, ly);
}

}  // namespace hypolab
