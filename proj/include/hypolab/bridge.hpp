#pragma once

#include "hypolab/error.hpp"
#include "hypolab/linalg.hpp"
#include "hypolab/metric.hpp"
#include "hypolab/models.hpp"
#include "hypolab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hypolab {

using UnitPath = std::vector<Vec>;  // chart points at s = k / n

struct BridgeEnsemble {
  double t = 0;
  Vec x, y;
  std::vector<UnitPath> accepted;
  // Likelihood ratios dP/dQ of the accepted proposals; all 1 without a tilt.
  std::vector<double> weights;
  std::vector<std::uint64_t> path_ids;
  double acceptance_rate = 0;
  double pilot_rate = 0;
  std::size_t proposals = 0;
  double terminal_tol = 0;
  std::uint64_t seed = 0;
  int n_steps = 0;
  bool tilted = false;

  std::size_t size() const { return accepted.size(); }
  /// Kish effective sample size of the weights.
  double effective_size() const {
    double s = 0, s2 = 0;
    for (double w : weights) {
      s += w;
      s2 += w * w;
    }
    return s2 > 0 ? s * s / s2 : 0.0;
  }
};

struct BridgeOptions {
  std::size_t n_target = 2000;
  double terminal_tol = 0;  // 0: 0.3 sqrt(t)
  double rate_min = 1e-4;
  std::size_t pilot_paths = 4000;
  std::size_t max_proposals = 50'000'000;
  int n_steps = 0;  // 0: default_sde_steps
  std::uint64_t seed = 0xC0FFEE;
  int workers = 1;
  DistanceOptions distance;  // witness for the tilted sampler
};

inline double default_terminal_tol(double t) { return 0.3 * std::sqrt(t); }

namespace detail {

struct BridgeBatch {
  std::vector<UnitPath> paths;
  std::vector<double> weights;
  std::vector<std::uint64_t> ids;
  std::size_t proposals = 0;
  void merge(const BridgeBatch& o) {
    paths.insert(paths.end(), o.paths.begin(), o.paths.end());
    weights.insert(weights.end(), o.weights.begin(), o.weights.end());
    ids.insert(ids.end(), o.ids.begin(), o.ids.end());
    proposals += o.proposals;
  }
};

/// Proposals with ids [first, first + count); accepted ones in id order.
inline BridgeBatch propose(const Simulator& sim, const Vec& x, const Vec& y, double tol, std::uint64_t seed,
                           std::uint64_t first, std::size_t count, int workers, bool keep_paths) {
  const double tol2 = tol * tol;
  return accumulate_paths<BridgeBatch>(count, workers, [&](std::uint64_t i, BridgeBatch& b) {
    ++b.proposals;
    auto p = sim.run(x, seed, first + i);
    if (p.killed || (p.final_state - y).squaredNorm() >= tol2) return;
    if (keep_paths) b.paths.push_back(std::move(p.states));
    b.weights.push_back(std::exp(p.log_weight));
    b.ids.push_back(first + i);
  });
}

inline BridgeEnsemble sample_bridge(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                    const BridgeOptions& opts, std::optional<Tilt> tilt) {
  if (!(t > 0)) throw ArgumentError("bridge: t must be positive");
  if (opts.n_target == 0) throw ArgumentError("bridge: n_target must be positive");
  require_in_domain(s, x, "bridge");
  require_in_domain(s, y, "bridge");
  BridgeEnsemble ens;
  ens.t = t;
  ens.x = x;
  ens.y = y;
  ens.seed = opts.seed;
  ens.terminal_tol = opts.terminal_tol > 0 ? opts.terminal_tol : default_terminal_tol(t);
  ens.n_steps = opts.n_steps > 0 ? opts.n_steps : default_sde_steps(t);
  ens.tilted = tilt.has_value();
  SimulateOptions so;
  so.tilt = std::move(tilt);
  const Simulator sim(s, t, ens.n_steps, so);

  auto batch = propose(sim, x, y, ens.terminal_tol, opts.seed, 0, opts.pilot_paths, opts.workers, true);
  ens.pilot_rate = static_cast<double>(batch.ids.size()) / static_cast<double>(opts.pilot_paths);
  if (ens.pilot_rate < opts.rate_min)
    throw InfeasibleError("bridge: pilot acceptance rate " + std::to_string(ens.pilot_rate) + " is below " +
                          std::to_string(opts.rate_min) + "; use a larger t or the tilted sampler");
  // rounds sized from the pilot rate only, so the id ranges do not depend on workers
  const double rate = std::max(ens.pilot_rate, opts.rate_min);
  std::uint64_t next = opts.pilot_paths;
  while (batch.ids.size() < opts.n_target) {
    if (batch.proposals >= opts.max_proposals)
      throw InfeasibleError("bridge: proposal budget exhausted before n_target acceptances");
    const double missing = static_cast<double>(opts.n_target - batch.ids.size());
    const auto count = static_cast<std::size_t>(
        std::min(static_cast<double>(opts.max_proposals - batch.proposals), std::ceil(1.2 * missing / rate) + 64));
    batch.merge(propose(sim, x, y, ens.terminal_tol, opts.seed, next, count, opts.workers, true));
    next += count;
  }
  const std::size_t n = opts.n_target;
  ens.accepted.assign(std::make_move_iterator(batch.paths.begin()),
                      std::make_move_iterator(batch.paths.begin() + static_cast<std::ptrdiff_t>(n)));
  ens.weights.assign(batch.weights.begin(), batch.weights.begin() + static_cast<std::ptrdiff_t>(n));
  ens.path_ids.assign(batch.ids.begin(), batch.ids.begin() + static_cast<std::ptrdiff_t>(n));
  // proposals up to and including the last kept id
  ens.proposals = static_cast<std::size_t>(ens.path_ids.back()) + 1;
  ens.acceptance_rate = static_cast<double>(n) / static_cast<double>(ens.proposals);
  return ens;
}

}  // namespace detail

/// Forward paths of duration t kept when they end within terminal_tol of y.
/// The recorded grid k t / n is reported as s = k / n.
inline BridgeEnsemble sample_bridge_rejection(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                              const BridgeOptions& opts = {}) {
  return detail::sample_bridge(s, t, x, y, opts, std::nullopt);
}

/// As sample_bridge_rejection with the witness control of d(x, y) added as a
/// drift. Accepted paths carry dP/dQ; the weights are constant on the
/// terminal event only when the witness control is constant.
inline BridgeEnsemble sample_bridge_tilted(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                           const BridgeOptions& opts = {},
                                           std::optional<ControlPath> witness = std::nullopt) {
  if (!witness && (y - x).norm() > 0) {
    auto d = distance(s, x, y, opts.distance);
    if (!d.witness) throw InfeasibleError("bridge: no distance witness for the tilt");
    witness = std::move(d.witness);
  }
  std::optional<Tilt> tilt;
  if (witness && witness->controls.cwiseAbs().maxCoeff() > 0) tilt = Tilt(*witness);
  return detail::sample_bridge(s, t, x, y, opts, std::move(tilt));
}

/// Pilot-only acceptance rate (no feasibility check).
inline double bridge_pilot_rate(const SubRiemannianStructure& s, double t, const Vec& x, const Vec& y,
                                const BridgeOptions& opts, std::optional<Tilt> tilt = std::nullopt) {
  SimulateOptions so;
  so.tilt = std::move(tilt);
  so.record_states = false;
  const Simulator sim(s, t, opts.n_steps > 0 ? opts.n_steps : default_sde_steps(t), so);
  const double tol = opts.terminal_tol > 0 ? opts.terminal_tol : default_terminal_tol(t);
  const auto b = detail::propose(sim, x, y, tol, opts.seed, 0, opts.pilot_paths, opts.workers, false);
  return static_cast<double>(b.ids.size()) / static_cast<double>(opts.pilot_paths);
}

/// Constant-speed distance witness integrated from x and interpolated to the
/// unit grid with n_steps intervals.
inline UnitPath geodesic_on_grid(const SubRiemannianStructure& s, const Vec& x, const ControlPath& witness,
                                 int n_steps) {
  if (n_steps <= 0) throw ArgumentError("geodesic_on_grid: n_steps must be positive");
  const auto traj = integrate_control(s, x, constant_speed(witness));
  const auto& pts = traj.points;
  const int m = static_cast<int>(pts.size()) - 1;
  UnitPath out;
  out.reserve(static_cast<size_t>(n_steps) + 1);
  for (int k = 0; k <= n_steps; ++k) {
    const double pos = static_cast<double>(k) * m / n_steps;
    const int j = std::min(m - 1, static_cast<int>(pos));
    const double f = pos - j;
    out.push_back((1 - f) * pts[static_cast<size_t>(j)] + f * pts[static_cast<size_t>(j) + 1]);
  }
  return out;
}

inline UnitPath geodesic_on_grid(const SubRiemannianStructure& s, const Vec& x, const Vec& y, int n_steps,
                                 const DistanceOptions& opts = {}) {
  if ((y - x).norm() == 0) return UnitPath(static_cast<size_t>(n_steps) + 1, x);
  const auto d = distance(s, x, y, opts);
  if (!d.witness) throw InfeasibleError("geodesic_on_grid: no distance witness");
  return geodesic_on_grid(s, x, *d.witness, n_steps);
}

struct TubeDiagnostic {
  double rho = 0;
  double fraction_inside = 0;
  double stderr = 0;  // binomial, with the effective sample size when weighted
  std::vector<double> quantile_levels{0.5, 0.9, 0.99};
  std::vector<double> sup_deviation_quantiles;
  std::size_t n_paths = 0;
  double effective_size = 0;
};

/// Share of bridge paths with max_s |omega_s - gamma_s| < rho, weighted by
/// the (self-normalised) likelihood ratios.
inline TubeDiagnostic concentration_diagnostic(const BridgeEnsemble& ens, const UnitPath& gamma, double rho) {
  if (ens.accepted.empty()) throw ArgumentError("concentration_diagnostic: empty ensemble");
  if (!(rho > 0)) throw ArgumentError("concentration_diagnostic: rho must be positive");
  const std::size_t grid = ens.accepted.front().size();
  if (gamma.size() != grid) throw ArgumentError("concentration_diagnostic: gamma is on a different grid");
  TubeDiagnostic out;
  out.rho = rho;
  out.n_paths = ens.size();
  out.effective_size = ens.effective_size();
  std::vector<std::pair<double, double>> dev;  // (sup deviation, weight)
  dev.reserve(ens.size());
  double total = 0, inside = 0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    double sup = 0;
    for (std::size_t k = 0; k < grid; ++k) sup = std::max(sup, (ens.accepted[i][k] - gamma[k]).norm());
    const double w = ens.weights[i];
    dev.emplace_back(sup, w);
    total += w;
    if (sup < rho) inside += w;
  }
  out.fraction_inside = total > 0 ? inside / total : 0.0;
  const double p = out.fraction_inside;
  out.stderr = out.effective_size > 0 ? std::sqrt(p * (1 - p) / out.effective_size) : 0.0;
  std::sort(dev.begin(), dev.end());
  for (double q : out.quantile_levels) {
    double acc = 0;
    double value = dev.back().first;
    for (const auto& [d, w] : dev) {
      acc += w;
      if (acc >= q * total) {
        value = d;
        break;
      }
    }
    out.sup_deviation_quantiles.push_back(value);
  }
  return out;
}

struct MarginalMoments {
  Vec mean;
  Mat covariance;
  double effective_size = 0;
};

/// Weighted mean and covariance of the bridge at s = k / n_steps.
inline MarginalMoments marginal_moments(const BridgeEnsemble& ens, std::size_t k) {
  if (ens.size() < 2) throw ArgumentError("marginal_moments: need at least two paths");
  if (k >= ens.accepted.front().size()) throw ArgumentError("marginal_moments: grid index out of range");
  const int d = static_cast<int>(ens.accepted.front()[k].size());
  MarginalMoments m;
  m.mean = Vec::Zero(d);
  m.covariance = Mat::Zero(d, d);
  double total = 0, total2 = 0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    m.mean += ens.weights[i] * ens.accepted[i][k];
    total += ens.weights[i];
    total2 += ens.weights[i] * ens.weights[i];
  }
  m.mean /= total;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vec c = ens.accepted[i][k] - m.mean;
    m.covariance += ens.weights[i] * c * c.transpose();
  }
  // unbiased for reliability weights
  m.covariance /= total - total2 / total;
  m.effective_size = total * total / total2;
  return m;
}

struct StrongMinimality {
  bool is_strong = false;
  double margin = 0;  // min energy of paths leaving U, minus d(x,y)^2
  double energy_outside = 0;
  double distance = 0;
  bool converged = false;
};

inline StrongMinimality strong_minimality_report(const SubRiemannianStructure& s, const Vec& x, const Vec& y,
                                                 const OpenRegion& u, double delta_probe,
                                                 const DistanceOptions& opts = {}) {
  StrongMinimality r;
  r.distance = distance(s, x, y, opts).value;
  const auto out = min_energy_outside(s, x, y, u, delta_probe, opts);
  r.energy_outside = out.energy;
  r.converged = out.converged;
  r.margin = out.energy - r.distance * r.distance;
  r.is_strong = r.margin > tol_gap(r.distance * r.distance);
  return r;
}

}  // namespace hypolab
