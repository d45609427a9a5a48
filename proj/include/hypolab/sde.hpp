#pragma once

#include "hypolab/error.hpp"
#include "hypolab/linalg.hpp"
#include "hypolab/metric.hpp"
#include "hypolab/models.hpp"
#include "hypolab/parallel.hpp"
#include "hypolab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace hypolab {

/// Default grid: dt <= 1/400 and at least 200 steps.
inline int default_sde_steps(double t_final) {
  return std::max(200, static_cast<int>(std::ceil(400.0 * t_final)));
}

struct SamplePath {
  std::vector<double> times;
  std::vector<Vec> states;  // empty unless recorded
  Vec final_state;          // last simulated state (the exit state if killed)
  bool killed = false;
  std::optional<int> exit_index;
  std::optional<int> hit_index;
  double hit_time = 0;  // interpolated entry time into the monitored set
  Vec hit_state;        // interpolated entry point, on the boundary of A
  double log_weight = 0;  // log dP/dQ when a tilt is active
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;

  bool alive() const { return !killed; }
  bool hit() const { return hit_index.has_value(); }
};

/// Girsanov proposal: extra drift sum h_l X_l. Before A is entered,
/// h(tau) = u(tau / span) / span with span = split * t (the last row of u
/// is held past the span). Once the monitored set is entered at T,
/// after_hit takes over, stretched over [T, t].
struct Tilt {
  ControlPath plan;
  double split = 1.0;
  std::optional<ControlPath> after_hit;

  Tilt() = default;
  Tilt(ControlPath u) : plan(std::move(u)) {}  // NOLINT: a plain control is a one-leg tilt
  Tilt(ControlPath first, double split_fraction, ControlPath second)
      : plan(std::move(first)), split(split_fraction), after_hit(std::move(second)) {}
};

struct SimulateOptions {
  std::optional<ClosedSet> kill_region;  // path is killed on entering it
  std::optional<ClosedSet> monitor;      // first entry recorded as T
  bool stop_at_hit = false;
  bool record_states = true;
  // paths carry log dP/dQ when set
  std::optional<Tilt> tilt;
};

/// Stochastic Heun stepper for dB = sum X_l(B) o dW^l + X_0(B) dt.
///
/// Killing: the model domain kills on leaving it or on coming closer than
/// 2 sqrt(dt lambda_max(a)) to the deleted set. kill_region and monitor are
/// tested at the grid points and, between grid points, by the Brownian
/// bridge crossing probability exp(-2 l_k l_{k+1} / (a(dl, dl) dt)).
class Simulator {
 public:
  Simulator(const SubRiemannianStructure& s, double t_final, int n_steps, SimulateOptions opts = {})
      : s_(s), t_(t_final), n_(n_steps), opts_(std::move(opts)), drift_(hormander_drift(s)) {
    if (!(t_final > 0)) throw ArgumentError("simulate: t_final must be positive");
    if (n_steps <= 0) throw ArgumentError("simulate: n_steps must be positive");
    if (opts_.tilt) {
      const auto& tl = *opts_.tilt;
      if (tl.plan.num_controls() != s.num_fields() || (tl.after_hit && tl.after_hit->num_controls() != s.num_fields()))
        throw ArgumentError("simulate: tilt control has the wrong width");
      if (!(tl.split > 0 && tl.split <= 1)) throw ArgumentError("simulate: tilt split must lie in (0, 1]");
    }
    dt_ = t_ / n_;
    sqrt_dt_ = std::sqrt(dt_);
  }

  double dt() const { return dt_; }
  int n_steps() const { return n_; }
  const SimulateOptions& options() const { return opts_; }

  SamplePath run(const Vec& x0, std::uint64_t seed, std::uint64_t path_id) const {
    require_in_domain(s_, x0, "simulate");
    if (opts_.kill_region && opts_.kill_region->contains(x0))
      throw DomainError("simulate: start point lies in the kill region");
    const int m = s_.num_fields();
    const CounterRng rng(seed, path_id);
    SamplePath path;
    path.seed = seed;
    path.path_id = path_id;
    if (opts_.record_states) {
      path.times.reserve(static_cast<size_t>(n_) + 1);
      path.states.reserve(static_cast<size_t>(n_) + 1);
      path.times.push_back(0.0);
      path.states.push_back(x0);
    }
    if (opts_.monitor && opts_.monitor->contains(x0)) {
      path.hit_index = 0;
      path.hit_time = 0;
      path.hit_state = x0;
    }
    Vec x = x0;
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1> dw(m), h(m);
    double kill_level = opts_.kill_region ? opts_.kill_region->level(x) : 0.0;
    double mon_level = opts_.monitor ? opts_.monitor->level(x) : 0.0;
    for (int k = 0; k < n_; ++k) {
      rng.normals(static_cast<std::uint32_t>(k), m, dw, static_cast<std::uint32_t>(Stream::kGaussian));
      dw *= sqrt_dt_;
      if (opts_.tilt) {
        h = tilt_at(k, path);
        path.log_weight -= h.dot(dw) + 0.5 * h.squaredNorm() * dt_;
        dw += h * dt_;
      }
      const Vec f0 = increment(x, dw);
      const Vec pred = x + f0;
      const double tk = k * dt_;
      const double tk1 = (k + 1) * dt_;
      if (!usable(pred)) {
        kill(path, k + 1, pred, tk1);
        return path;
      }
      const Vec next = x + 0.5 * (f0 + increment(pred, dw));
      if (!usable(next)) {
        kill(path, k + 1, next, tk1);
        return path;
      }
      std::optional<std::array<double, 2>> u;
      auto crossing_uniforms = [&]() -> const std::array<double, 2>& {
        if (!u) u = rng.uniform2(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(Stream::kCrossing));
        return *u;
      };
      // monitored set first, so hit_index <= exit_index on a shared step
      if (opts_.monitor && !path.hit_index) {
        const double l1 = opts_.monitor->level(next);
        const auto entry = crossing(*opts_.monitor, x, mon_level, l1, [&] { return crossing_uniforms()[1]; });
        if (entry) {
          path.hit_index = k + 1;
          path.hit_time = tk + *entry * dt_;
          Vec z = x + *entry * (next - x);
          if (!opts_.monitor->contains(z)) z = project_to_boundary(*opts_.monitor, z);
          path.hit_state = z;
        }
        mon_level = l1;
      }
      if (opts_.kill_region) {
        const double l1 = opts_.kill_region->level(next);
        if (crossing(*opts_.kill_region, x, kill_level, l1, [&] { return crossing_uniforms()[0]; })) {
          kill(path, k + 1, next, tk1);
          return path;
        }
        kill_level = l1;
      }
      x = next;
      if (opts_.record_states) {
        path.times.push_back(tk1);
        path.states.push_back(x);
      }
      if (opts_.stop_at_hit && path.hit_index) {
        path.final_state = x;
        return path;
      }
    }
    path.final_state = x;
    return path;
  }

 private:
  Vec increment(const Vec& x, const Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>& dw) const {
    Vec v = Vec::Zero(s_.dim);
    for (int l = 0; l < s_.num_fields(); ++l) v += dw(l) * s_.fields[static_cast<size_t>(l)](x);
    if (!drift_.vanishes) v += dt_ * drift_.drift_vector(x);
    return v;
  }

  Vec tilt_at(int k, const SamplePath& path) const {
    const auto& tl = *opts_.tilt;
    const double s = (k + 0.5) * dt_;
    auto row = [](const ControlPath& c, double tau) {
      const int j = std::clamp(static_cast<int>(tau * c.n_steps), 0, c.n_steps - 1);
      return Vec(c.controls.row(j).transpose());
    };
    if (tl.after_hit && path.hit_index) {
      const double rest = std::max(t_ - path.hit_time, dt_);
      return row(*tl.after_hit, (s - path.hit_time) / rest) / rest;
    }
    const double span = tl.split * t_;
    return row(tl.plan, s / span) / span;
  }

  bool usable(const Vec& x) const {
    if (!x.allFinite() || !s_.contains(x)) return false;
    if (!s_.has_boundary()) return true;
    const Mat a = cometric(s_, x);
    const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(a, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    return s_.gap(x) >= 2.0 * std::sqrt(dt_ * std::max(lmax, 0.0));
  }

  /// Fraction of the step at which the set is entered, if it is.
  template <class Uniform>
  std::optional<double> crossing(const ClosedSet& a, const Vec& x0, double l0, double l1,
                                 Uniform&& uniform) const {
    if (l1 >= 0) return l0 < 0 ? std::clamp(l0 / (l0 - l1), 0.0, 1.0) : 0.0;
    const Vec g = a.gradient(x0);
    const double var = cometric_pair(s_, x0, g, g);
    if (!(var > 0)) return std::nullopt;
    const double p = std::exp(-2.0 * l0 * l1 / (var * dt_));
    if (uniform() < p) return l0 / (l0 + l1);
    return std::nullopt;
  }

  void kill(SamplePath& path, int index, const Vec& where, double t) const {
    path.killed = true;
    path.exit_index = index;
    path.final_state = where;
    if (opts_.record_states) {
      path.times.push_back(t);
      path.states.push_back(where);
    }
  }

  const SubRiemannianStructure& s_;
  double t_;
  int n_;
  SimulateOptions opts_;
  DriftDecomposition drift_;
  double dt_ = 0, sqrt_dt_ = 0;
};

inline SamplePath simulate(const SubRiemannianStructure& s, const Vec& x0, double t_final, int n_steps,
                           std::uint64_t seed, std::uint64_t path_id = 0, const SimulateOptions& opts = {}) {
  return Simulator(s, t_final, n_steps, opts).run(x0, seed, path_id);
}

/// Per-path accumulation in fixed chunks of kPathChunk, merged in path_id
/// order. `Tally` needs a default constructor and merge(const Tally&).
template <class Tally, class PerPath>
Tally accumulate_paths(std::size_t n_paths, int workers, PerPath&& per_path) {
  const std::size_t chunks = (n_paths + kPathChunk - 1) / kPathChunk;
  const auto parts = parallel_map<Tally>(chunks, workers, [&](std::size_t c) {
    Tally t;
    const std::size_t end = std::min(n_paths, (c + 1) * kPathChunk);
    for (std::size_t i = c * kPathChunk; i < end; ++i) per_path(static_cast<std::uint64_t>(i), t);
    return t;
  });
  Tally total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

struct HittingSamples {
  std::vector<double> times;  // T ^ t_final per path, path_id order
  std::vector<char> hit;      // T <= t_final
  double t_final = 0;

  std::size_t n_paths() const { return times.size(); }
  std::size_t hits() const { return static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1)); }
  double probability() const { return n_paths() ? static_cast<double>(hits()) / n_paths() : 0.0; }
  double stderr() const {
    const double p = probability();
    return n_paths() ? std::sqrt(std::max(p * (1 - p), 0.0) / n_paths()) : 0.0;
  }
  /// Empirical P(T <= t).
  double cdf(double t) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < times.size(); ++i) c += (hit[i] && times[i] <= t) ? 1 : 0;
    return n_paths() ? static_cast<double>(c) / n_paths() : 0.0;
  }
};

/// Samples of T ^ t_final with T the first entry time into A (paths killed
/// by the model domain before reaching A count as not hitting).
inline HittingSamples hitting_time_samples(const SubRiemannianStructure& s, const Vec& x0, const ClosedSet& a,
                                           double t_final, std::size_t n_paths, std::uint64_t seed, int workers = 1,
                                           int n_steps = 0) {
  if (a.contains(x0)) throw ArgumentError("hitting_time_samples: start point lies in A");
  SimulateOptions o;
  o.monitor = a;
  o.stop_at_hit = true;
  o.record_states = false;
  const Simulator sim(s, t_final, n_steps > 0 ? n_steps : default_sde_steps(t_final), o);
  struct Tally {
    std::vector<double> times;
    std::vector<char> hit;
    void merge(const Tally& t) {
      times.insert(times.end(), t.times.begin(), t.times.end());
      hit.insert(hit.end(), t.hit.begin(), t.hit.end());
    }
  };
  const auto tally = accumulate_paths<Tally>(n_paths, workers, [&](std::uint64_t id, Tally& t) {
    const auto p = sim.run(x0, seed, id);
    const bool h = p.hit_index.has_value();
    t.times.push_back(h ? p.hit_time : t_final);
    t.hit.push_back(h ? 1 : 0);
  });
  HittingSamples out;
  out.times = tally.times;
  out.hit = tally.hit;
  out.t_final = t_final;
  return out;
}

}  // namespace hypolab
