#pragma once

#include "hypolab/error.hpp"
#include "hypolab/linalg.hpp"
#include "hypolab/metric.hpp"
#include "hypolab/models.hpp"
#include "hypolab/sde.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace hypolab {

enum class KernelKind { kFull, kDirichlet, kThrough, kHitting };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::kFull: return "full";
    case KernelKind::kDirichlet: return "dirichlet";
    case KernelKind::kThrough: return "through";
    case KernelKind::kHitting: return "hitting";
  }
  return "?";
}

struct KernelEstimate {
  KernelKind kind = KernelKind::kFull;
  double t = 0;
  double value = 0;
  double stderr = 0;  // one-sided (one-hit level) when there are no hits
  double r_kde = 0;
  double bias_bound = 0;  // max |FD curvature| r^2 / 2
  std::size_t n_paths = 0;
  std::size_t hits = 0;
  double pre_clip_value = 0;
};

struct KernelOptions {
  std::size_t n_paths = 100000;
  double r_kde = 0;  // 0: default_kde_radius
  std::uint64_t seed = 0xC0FFEE;
  int workers = 1;
  int n_steps = 0;  // 0: default_sde_steps
  bool estimate_bias = true;
  std::optional<Tilt> tilt;  // Girsanov proposal, see Tilt
};

inline double default_kde_radius(double t, int dim) { return 0.4 * std::sqrt(t / dim); }

inline double unit_ball_volume(int dim) {
  return std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
}

/// nu-volume of the chart-Euclidean ball B(y, r): exact for Lebesgue,
/// midpoint quadrature of the density otherwise.
inline double chart_ball_nu_volume(const SubRiemannianStructure& s, const Vec& y, double r) {
  const int d = s.dim;
  if (s.is_lebesgue()) return unit_ball_volume(d) * std::pow(r, d);
  const int per_axis = std::max(6, static_cast<int>(std::pow(2e5, 1.0 / d)));
  long total = 1;
  for (int k = 0; k < d; ++k) total *= per_axis;
  const double cell = std::pow(2 * r / per_axis, d);
  double sum = 0;
  Vec p(d);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int k = 0; k < d; ++k) {
      p(k) = -r + (2 * r) * ((rem % per_axis) + 0.5) / per_axis;
      rem /= per_axis;
    }
    if (p.norm() >= r) continue;
    const Vec z = y + p;
    if (s.contains(z)) sum += s.nu_density(z);
  }
  return sum * cell;
}

/// Closed-form Euclidean heat kernel of (1/2) Laplacian.
inline double gaussian_heat_kernel(double t, const Vec& x, const Vec& y) {
  const int d = static_cast<int>(x.size());
  return std::exp(-(y - x).squaredNorm() / (2 * t)) / std::pow(2 * std::numbers::pi * t, d / 2.0);
}

namespace detail {

struct WeightedCount {
  double sum = 0, sum2 = 0;
  std::size_t hits = 0;
  void add(double w) {
    sum += w;
    sum2 += w * w;
    ++hits;
  }
  void merge(const WeightedCount& o) {
    sum += o.sum;
    sum2 += o.sum2;
    hits += o.hits;
  }
  double mean(std::size_t n) const { return n ? sum / n : 0.0; }
  double stderr(std::size_t n) const {
    if (!n) return 0.0;
    const double m = mean(n);
    return std::sqrt(std::max(sum2 / n - m * m, 0.0) / n);
  }
};

// Category 0: every surviving path; 1: paths that never entered A;
// 2: paths that entered A. Ball 0 is centred at y, balls 2j+1 / 2j+2 at
// y +- 2r e_j (curvature probes).
struct KernelTally {
  std::array<std::vector<WeightedCount>, 3> land;
  WeightedCount hit;
  WeightedCount restart;  // REPPK sums
  std::size_t n = 0;
  void ensure(std::size_t balls) {
    for (auto& v : land)
      if (v.size() < balls) v.resize(balls);
  }
  void merge(const KernelTally& o) {
    ensure(o.land[0].size());
    for (int c = 0; c < 3; ++c)
      for (std::size_t b = 0; b < o.land[static_cast<size_t>(c)].size(); ++b)
        land[static_cast<size_t>(c)][b].merge(o.land[static_cast<size_t>(c)][b]);
    hit.merge(o.hit);
    restart.merge(o.restart);
    n += o.n;
  }
};

using RestartKernel = std::function<double(double tau, const Vec& z, const Vec& y)>;

struct PassSpec {
  double t = 0;
  Vec x, y;
  double r = 0;
  std::optional<ClosedSet> monitor;
  bool stop_at_hit = false;
  bool landing = true;
  RestartKernel restart;
};

inline KernelTally kernel_pass(const SubRiemannianStructure& s, const PassSpec& spec, const KernelOptions& opts) {
  SimulateOptions so;
  so.monitor = spec.monitor;
  so.stop_at_hit = spec.stop_at_hit;
  so.record_states = false;
  so.tilt = opts.tilt;
  const Simulator sim(s, spec.t, opts.n_steps > 0 ? opts.n_steps : default_sde_steps(spec.t), so);
  const int d = s.dim;
  const std::size_t balls = opts.estimate_bias ? static_cast<std::size_t>(2 * d + 1) : 1;
  const double r2 = spec.r * spec.r;
  return accumulate_paths<KernelTally>(opts.n_paths, opts.workers, [&](std::uint64_t id, KernelTally& tally) {
    tally.ensure(balls);
    ++tally.n;
    const auto p = sim.run(spec.x, opts.seed, id);
    const double w = opts.tilt ? std::exp(p.log_weight) : 1.0;
    const bool hit = p.hit_index.has_value();
    if (hit) {
      tally.hit.add(w);
      if (spec.restart && p.hit_time < spec.t) tally.restart.add(w * spec.restart(spec.t - p.hit_time, p.hit_state, spec.y));
    }
    if (!spec.landing || p.killed) return;
    const Vec off = p.final_state - spec.y;
    const size_t cat = hit ? 2 : 1;
    auto land = [&](std::size_t b) {
      tally.land[0][b].add(w);
      tally.land[cat][b].add(w);
    };
    if (off.squaredNorm() < r2) land(0);
    if (balls > 1) {
      for (int j = 0; j < d; ++j) {
        Vec plus = off, minus = off;
        plus(j) -= 2 * spec.r;
        minus(j) += 2 * spec.r;
        if (plus.squaredNorm() < r2) land(static_cast<size_t>(2 * j + 1));
        if (minus.squaredNorm() < r2) land(static_cast<size_t>(2 * j + 2));
      }
    }
  });
}

inline std::vector<double> ball_volumes(const SubRiemannianStructure& s, const Vec& y, double r, bool sides) {
  std::vector<double> v{chart_ball_nu_volume(s, y, r)};
  if (!sides) return v;
  for (int j = 0; j < s.dim; ++j) {
    for (double sign : {1.0, -1.0}) {
      Vec c = y;
      c(j) += sign * 2 * r;
      v.push_back(s.is_lebesgue() ? v[0] : chart_ball_nu_volume(s, c, r));
    }
  }
  return v;
}

/// Estimate from one landing category, with the curvature bias bound.
inline KernelEstimate category_estimate(const KernelTally& tally, std::size_t cat, const std::vector<double>& vol,
                                        KernelKind kind, double t, double r) {
  KernelEstimate e;
  e.kind = kind;
  e.t = t;
  e.r_kde = r;
  e.n_paths = tally.n;
  const auto& c = tally.land[cat];
  e.hits = c[0].hits;
  e.value = c[0].mean(tally.n) / vol[0];
  e.stderr = e.hits ? c[0].stderr(tally.n) / vol[0] : 1.0 / (static_cast<double>(tally.n) * vol[0]);
  e.pre_clip_value = e.value;
  if (c.size() > 1) {
    double curv = 0;
    for (std::size_t j = 0; 2 * j + 2 < c.size(); ++j) {
      const double plus = c[2 * j + 1].mean(tally.n) / vol[2 * j + 1];
      const double minus = c[2 * j + 2].mean(tally.n) / vol[2 * j + 2];
      curv = std::max(curv, std::abs(plus - 2 * e.value + minus) / (4 * r * r));
    }
    e.bias_bound = curv * r * r / 2;
  }
  return e;
}

inline double resolve_radius(const KernelOptions& opts, double t, int dim) {
  const double r = opts.r_kde > 0 ? opts.r_kde : default_kde_radius(t, dim);
  if (!(r > 0)) throw ArgumentError("kernel: r_kde must be positive");
  return r;
}

inline void check_kernel_args(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                              const KernelOptions& opts, const char* what) {
  if (!(t > 0)) throw ArgumentError(std::string(what) + ": t must be positive");
  if (opts.n_paths == 0) throw ArgumentError(std::string(what) + ": n_paths must be positive");
  require_in_domain(s, x, what);
  require_in_domain(s, y, what);
}

}  // namespace detail

/// Ball-counting estimate of p(t, x, y) with respect to nu.
inline KernelEstimate estimate_kernel(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                      const KernelOptions& opts = {}) {
  detail::check_kernel_args(s, t, x, y, opts, "estimate_kernel");
  detail::PassSpec spec{t, x, y, detail::resolve_radius(opts, t, s.dim), std::nullopt, false, true, {}};
  const auto tally = detail::kernel_pass(s, spec, opts);
  return detail::category_estimate(tally, 0, detail::ball_volumes(s, y, spec.r, opts.estimate_bias),
                                   KernelKind::kFull, t, spec.r);
}

/// p, p_U and p(t, x, A, y) for U = M \ A from one set of paths.
struct KernelTriplet {
  KernelEstimate full, dirichlet, through;
  bool coupling_holds = true;  // p_U <= p on this run
};

inline KernelTriplet kernel_triplet(const SubRiemannianStructure& s, double t, const Vec& x, const ClosedSet& a,
                                    const Vec& y, const KernelOptions& opts = {}) {
  detail::check_kernel_args(s, t, x, y, opts, "through_kernel");
  if (a.contains(x)) throw ArgumentError("through_kernel: x lies in A");
  detail::PassSpec spec{t, x, y, detail::resolve_radius(opts, t, s.dim), a, false, true, {}};
  const auto tally = detail::kernel_pass(s, spec, opts);
  const auto vol = detail::ball_volumes(s, y, spec.r, opts.estimate_bias);
  KernelTriplet out;
  out.full = detail::category_estimate(tally, 0, vol, KernelKind::kFull, t, spec.r);
  out.dirichlet = detail::category_estimate(tally, 1, vol, KernelKind::kDirichlet, t, spec.r);
  out.through = detail::category_estimate(tally, 2, vol, KernelKind::kThrough, t, spec.r);
  out.through.pre_clip_value = out.full.value - out.dirichlet.value;
  out.through.value = std::max(0.0, out.through.pre_clip_value);
  out.coupling_holds = out.dirichlet.value <= out.full.value && tally.land[1][0].hits <= tally.land[0][0].hits;
  return out;
}

/// Dirichlet kernel of the open region U (paths killed on leaving U).
inline KernelEstimate estimate_kernel_dirichlet(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                                const OpenRegion& u, const KernelOptions& opts = {}) {
  // y outside U is allowed and gives 0
  if (!u.contains(x)) throw ArgumentError("estimate_kernel_dirichlet: x must lie in U");
  return kernel_triplet(s, t, x, u.complement(), y, opts).dirichlet;
}

inline KernelEstimate through_kernel(const SubRiemannianStructure& s, double t, const Vec& x, const ClosedSet& a,
                                     const Vec& y, const KernelOptions& opts = {}) {
  if (a.contains(y)) throw ArgumentError("through_kernel: y lies in A");
  return kernel_triplet(s, t, x, a, y, opts).through;
}

/// p(t, x, A): fraction of paths entering A before t.
inline KernelEstimate hitting_probability(const SubRiemannianStructure& s, double t, const Vec& x, const ClosedSet& a,
                                          const KernelOptions& opts = {}) {
  detail::check_kernel_args(s, t, x, x, opts, "hitting_probability");
  if (a.contains(x)) throw ArgumentError("hitting_probability: x lies in A");
  detail::PassSpec spec{t, x, x, 1.0, a, true, false, {}};
  const auto tally = detail::kernel_pass(s, spec, opts);
  KernelEstimate e;
  e.kind = KernelKind::kHitting;
  e.t = t;
  e.n_paths = tally.n;
  e.hits = tally.hit.hits;
  e.value = std::min(1.0, tally.hit.mean(tally.n));
  e.stderr = e.hits ? tally.hit.stderr(tally.n) : 1.0 / static_cast<double>(tally.n);
  e.pre_clip_value = e.value;
  return e;
}

/// Kernel of the doubled manifold across A: p + p_D when x and y lie on the
/// same copy (equal signs), p - p_D otherwise (D = M \ A).
inline KernelEstimate reflected_kernel(const SubRiemannianStructure& s, double t, int x_sign, int y_sign,
                                       const Vec& x, const Vec& y, const ClosedSet& a,
                                       const KernelOptions& opts = {}) {
  if (std::abs(x_sign) != 1 || std::abs(y_sign) != 1) throw ArgumentError("reflected_kernel: signs must be +-1");
  const bool same_copy = x_sign == y_sign;
  if (a.contains(y)) throw ArgumentError("reflected_kernel: y lies in A");
  detail::check_kernel_args(s, t, x, y, opts, "reflected_kernel");
  if (a.contains(x)) throw ArgumentError("reflected_kernel: x lies in A");
  detail::PassSpec spec{t, x, y, detail::resolve_radius(opts, t, s.dim), a, false, true, {}};
  const auto tally = detail::kernel_pass(s, spec, opts);
  const auto vol = detail::ball_volumes(s, y, spec.r, false);
  if (!same_copy) return detail::category_estimate(tally, 2, vol, KernelKind::kThrough, t, spec.r);
  // per-path value 2 w on paths avoiding A, w on paths through A
  const auto& avoid = tally.land[1][0];
  const auto& through = tally.land[2][0];
  const double n = static_cast<double>(tally.n);
  const double mean = (2 * avoid.sum + through.sum) / n;
  const double m2 = (4 * avoid.sum2 + through.sum2) / n;
  KernelEstimate e;
  e.kind = KernelKind::kFull;
  e.t = t;
  e.r_kde = spec.r;
  e.n_paths = tally.n;
  e.hits = avoid.hits + through.hits;
  e.value = mean / vol[0];
  e.stderr = std::sqrt(std::max(m2 - mean * mean, 0.0) / n) / vol[0];
  e.pre_clip_value = e.value;
  return e;
}

/// Restart estimator of p(t, x, A, y): E[1{T < t} q(t - T, B_T, y)] for a
/// kernel q of the same diffusion.
inline KernelEstimate through_kernel_restart(const SubRiemannianStructure& s, double t, const Vec& x,
                                             const ClosedSet& a, const Vec& y, const detail::RestartKernel& kernel,
                                             const KernelOptions& opts = {}) {
  detail::check_kernel_args(s, t, x, y, opts, "through_kernel_restart");
  if (a.contains(x)) throw ArgumentError("through_kernel_restart: x lies in A");
  if (!kernel) throw ArgumentError("through_kernel_restart: kernel callback required");
  detail::PassSpec spec{t, x, y, 1.0, a, true, false, kernel};
  const auto tally = detail::kernel_pass(s, spec, opts);
  KernelEstimate e;
  e.kind = KernelKind::kThrough;
  e.t = t;
  e.n_paths = tally.n;
  e.hits = tally.restart.hits;
  e.value = tally.restart.mean(tally.n);
  e.stderr = tally.restart.stderr(tally.n);
  e.pre_clip_value = e.value;
  return e;
}

// ---------------------------------------------------------------------------
// Small-time audits

/// Weighted least squares of lhs = L + a t log(1/t) + b t.
struct SmallTimeFit {
  double limit = 0, limit_stderr = 0, a = 0, b = 0;
};

inline SmallTimeFit fit_small_time(const std::vector<double>& t, const std::vector<double>& lhs,
                                   const std::vector<double>& lhs_stderr) {
  const auto n = static_cast<Eigen::Index>(t.size());
  if (n < 3 || lhs.size() != t.size() || lhs_stderr.size() != t.size())
    throw InsufficientSamples("audit: need at least 3 usable grid points");
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd yv(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = t[static_cast<size_t>(i)];
    x(i, 0) = 1;
    x(i, 1) = ti * std::log(1 / ti);
    x(i, 2) = ti;
    yv(i) = lhs[static_cast<size_t>(i)];
    const double se = std::max(lhs_stderr[static_cast<size_t>(i)], 1e-6);
    w(i) = 1 / (se * se);
  }
  const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
  const Eigen::VectorXd xtwy = x.transpose() * w.asDiagonal() * yv;
  const Eigen::MatrixXd cov = xtwx.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd beta = cov * xtwy;
  SmallTimeFit f;
  f.limit = beta(0);
  f.a = beta(1);
  f.b = beta(2);
  f.limit_stderr = std::sqrt(std::max(cov(0, 0), 0.0));
  return f;
}

struct AuditPoint {
  double t = 0;
  double estimate = 0;
  double stderr = 0;
  std::size_t hits = 0;
  double lhs = 0;         // t log(estimate)
  double lhs_stderr = 0;  // delta method
  double rhs = 0;         // finite-t exponent of the bound
  double margin = 0;      // rhs - lhs
  double r_kde = 0;
  double bias_bound = 0;
  std::optional<double> implied_constant;
  std::string binding_radius;  // which term fixes the volume radius
};

struct BoundAudit {
  std::string kind;  // varadhan / hitting / through
  std::vector<double> t_grid;
  std::vector<AuditPoint> points;  // grid points that produced hits
  std::vector<double> dropped_t;
  double rhs = 0;  // limit of the bound
  SmallTimeFit fit;
  double extrapolated_limit = 0;
  double margin = 0;  // rhs - extrapolated_limit
  double distance = 0;  // d(x,y), d(x,A) or the through-distance used in rhs
  double lambda = 0;    // sector constant, through audits
  std::optional<HsuMembership> hsu;
  std::optional<double> implied_constant;  // max over the grid
};

struct AuditOptions {
  std::vector<double> t_grid;
  KernelOptions kernel;
  double kde_scale = 0.4;  // r_kde = kde_scale * t
  bool tilt = false;       // Girsanov proposal along the distance witness
  std::size_t min_hits = 1;
  bool check_hsu = true;
  bool implied_constants = true;
  VolumeOptions volume{400, 0xC0FFEE, 1, DistanceOptions::cheap()};
  DistanceOptions distance;
  std::optional<std::pair<Vec, Vec>> sector_box;  // default: hull of x, y grown by 1
};

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
  if (grid.size() < 3) throw ArgumentError("audit: t_grid needs at least 3 points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw ArgumentError("audit: t_grid must be positive");
    if (i && !(grid[i] < grid[i - 1])) throw ArgumentError("audit: t_grid must be decreasing");
  }
}

inline void finish_audit(BoundAudit& audit) {
  std::vector<double> t, lhs, se;
  for (const auto& p : audit.points) {
    t.push_back(p.t);
    lhs.push_back(p.lhs);
    se.push_back(p.lhs_stderr);
  }
  audit.fit = fit_small_time(t, lhs, se);
  audit.extrapolated_limit = audit.fit.limit;
  audit.margin = audit.rhs - audit.extrapolated_limit;
  for (const auto& p : audit.points)
    if (p.implied_constant)
      audit.implied_constant = std::max(audit.implied_constant.value_or(0.0), *p.implied_constant);
}

inline bool add_point(BoundAudit& audit, const KernelEstimate& e, std::size_t min_hits, double rhs_t) {
  if (e.hits < min_hits || !(e.value > 0)) {
    audit.dropped_t.push_back(e.t);
    return false;
  }
  AuditPoint p;
  p.t = e.t;
  p.estimate = e.value;
  p.stderr = e.stderr;
  p.hits = e.hits;
  p.lhs = e.t * std::log(e.value);
  p.lhs_stderr = e.t * e.stderr / e.value;
  p.rhs = rhs_t;
  p.margin = rhs_t - p.lhs;
  p.r_kde = e.r_kde;
  p.bias_bound = e.bias_bound;
  audit.points.push_back(p);
  return true;
}

inline std::optional<Tilt> one_leg(const DistanceResult& d) {
  if (!d.witness) return std::nullopt;
  return Tilt(*d.witness);
}

// Leg one until A is entered, leg two re-timed over what is left. A single
// plan through A flips direction at a fixed time, and the likelihood ratio
// then blows up as t shrinks.
inline std::optional<Tilt> two_leg(const DistanceResult& d) {
  const double total = d.first_leg_length + d.second_leg_length;
  if (d.first_leg && d.second_leg && total > 0 && d.first_leg_length > 0)
    return Tilt(*d.first_leg, d.first_leg_length / total, *d.second_leg);
  return one_leg(d);
}

inline KernelOptions audit_kernel_options(const AuditOptions& opts, double t, std::size_t index,
                                          const std::optional<Tilt>& proposal) {
  KernelOptions k = opts.kernel;
  k.seed = derive_seed(opts.kernel.seed, index);
  k.r_kde = opts.kde_scale * t;
  if (opts.tilt) k.tilt = proposal;
  return k;
}

}  // namespace detail

/// Varadhan audit: t log p(t,x,y) against -d(x,y)^2/2.
inline BoundAudit varadhan_audit(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                 const AuditOptions& opts) {
  detail::check_grid(opts.t_grid);
  BoundAudit audit;
  audit.kind = "varadhan";
  audit.t_grid = opts.t_grid;
  const auto dist = distance(s, x, y, opts.distance);
  audit.distance = dist.value;
  audit.rhs = -0.5 * dist.value * dist.value;
  for (std::size_t i = 0; i < opts.t_grid.size(); ++i) {
    const double t = opts.t_grid[i];
    const auto e = estimate_kernel(s, t, x, y, detail::audit_kernel_options(opts, t, i, detail::one_leg(dist)));
    detail::add_point(audit, e, opts.min_hits, audit.rhs);
  }
  if (opts.check_hsu) audit.hsu = hsu_condition(s, x, y, opts.distance);
  detail::finish_audit(audit);
  return audit;
}

/// Hitting audit: t log p(t,x,A) against -d(x,A)^2/2, with the implied
/// constant C = p sqrt(nu(B(x, t/d))) exp(d^2/2t).
inline BoundAudit hitting_bound_audit(const SubRiemannianStructure& s, const Vec& x, const ClosedSet& a,
                                      const AuditOptions& opts) {
  detail::check_grid(opts.t_grid);
  BoundAudit audit;
  audit.kind = "hitting";
  audit.t_grid = opts.t_grid;
  const auto dist = distance_to_set(s, x, a, opts.distance);
  const double d = dist.value;
  audit.distance = d;
  audit.rhs = -0.5 * d * d;
  if (!opts.tilt) {
    // one run to the largest t; nested events make the curve monotone
    const auto& k = opts.kernel;
    const double tmax = opts.t_grid.front();
    const auto hs = hitting_time_samples(s, x, a, tmax, k.n_paths, derive_seed(k.seed, 0), k.workers,
                                         k.n_steps > 0 ? k.n_steps : default_sde_steps(tmax));
    for (double t : opts.t_grid) {
      KernelEstimate e;
      e.kind = KernelKind::kHitting;
      e.t = t;
      e.n_paths = hs.n_paths();
      const double p = hs.cdf(t);
      e.hits = static_cast<std::size_t>(std::llround(p * static_cast<double>(e.n_paths)));
      e.value = p;
      e.stderr = std::sqrt(std::max(p * (1 - p), 0.0) / static_cast<double>(e.n_paths));
      detail::add_point(audit, e, opts.min_hits, audit.rhs);
    }
  } else {
    for (std::size_t i = 0; i < opts.t_grid.size(); ++i) {
      const double t = opts.t_grid[i];
      const auto e = hitting_probability(s, t, x, a, detail::audit_kernel_options(opts, t, i, detail::one_leg(dist)));
      detail::add_point(audit, e, opts.min_hits, audit.rhs);
    }
  }
  if (opts.implied_constants && d > 0) {
    for (std::size_t i = 0; i < audit.points.size(); ++i) {
      auto& p = audit.points[i];
      VolumeOptions vo = opts.volume;
      vo.seed = derive_seed(opts.volume.seed, i);
      const double vol = ball_volume(s, x, p.t / d, vo).volume;
      p.binding_radius = "t/d(x,A)";
      if (vol > 0) p.implied_constant = p.estimate * std::sqrt(vol) * std::exp(d * d / (2 * p.t));
    }
  }
  detail::finish_audit(audit);
  return audit;
}

/// Through-kernel audit. sector=false compares with -(d(x,A)+d(y,A))^2/2;
/// sector=true with -d(x,A,y)^2/2, the finite-t exponent carrying
/// + lambda^2 t / 2 with lambda from sector_bound.
inline BoundAudit through_bound_audit(const SubRiemannianStructure& s, const Vec& x, const ClosedSet& a, const Vec& y,
                                      bool sector, const AuditOptions& opts) {
  detail::check_grid(opts.t_grid);
  BoundAudit audit;
  audit.kind = sector ? "through-sector" : "through-hsu";
  audit.t_grid = opts.t_grid;
  const auto through = distance_through_set(s, x, a, y, opts.distance);
  const double dxa = distance_to_set(s, x, a, opts.distance).value;
  const double dya = distance_to_set(s, y, a, opts.distance).value;
  const double dist = sector ? through.value : dxa + dya;
  audit.distance = dist;
  audit.rhs = -0.5 * dist * dist;
  if (sector) {
    Vec lo = x.cwiseMin(y).array() - 1.0, hi = x.cwiseMax(y).array() + 1.0;
    if (opts.sector_box) std::tie(lo, hi) = *opts.sector_box;
    audit.lambda = std::sqrt(sector_bound(s, lo, hi, 4096));
  }
  const auto proposal = detail::two_leg(through);
  for (std::size_t i = 0; i < opts.t_grid.size(); ++i) {
    const double t = opts.t_grid[i];
    const auto trip = kernel_triplet(s, t, x, a, y, detail::audit_kernel_options(opts, t, i, proposal));
    detail::add_point(audit, trip.through, opts.min_hits, audit.rhs + 0.5 * audit.lambda * audit.lambda * t);
  }
  if (opts.implied_constants && through.value > 0) {
    const double dx_inf = distance_to_infinity(s, x, default_exhaustion(x), opts.distance).value;
    const double dy_inf = distance_to_infinity(s, y, default_exhaustion(y), opts.distance).value;
    const double rx = std::min(dx_inf, dxa), ry = std::min(dy_inf, dya);
    for (std::size_t i = 0; i < audit.points.size(); ++i) {
      auto& p = audit.points[i];
      const std::array<std::pair<double, const char*>, 4> terms = {
          {{p.t / through.value, "t/d(x,A,y)"}, {std::sqrt(p.t / 4), "sqrt(t/4)"}, {rx / 4, "r(x,A)/4"}, {ry / 4, "r(y,A)/4"}}};
      const auto* best = &terms[0];
      for (const auto& term : terms)
        if (term.first < best->first) best = &term;
      const double r = best->first;
      p.binding_radius = best->second;
      if (!(r > 0) || !std::isfinite(r)) continue;
      VolumeOptions vo = opts.volume;
      vo.seed = derive_seed(opts.volume.seed, 2 * i);
      const double vx = ball_volume(s, x, r, vo).volume;
      vo.seed = derive_seed(opts.volume.seed, 2 * i + 1);
      const double vy = ball_volume(s, y, r, vo).volume;
      const double d2 = through.value * through.value;
      if (vx > 0 && vy > 0)
        p.implied_constant = p.estimate * std::sqrt(vx * vy) *
                             std::exp(d2 / (2 * p.t) - audit.lambda * audit.lambda * p.t / 2);
    }
  }
  detail::finish_audit(audit);
  return audit;
}

}  // namespace hypolab
