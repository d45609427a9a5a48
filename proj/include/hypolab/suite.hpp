#pragma once
// Acceptance battery: one function per criterion, shared by `hypolab
// audit-all` and the acceptance test binary.

#include "hypolab/harness.hpp"
#include "hypolab/reference.hpp"

#include <exception>
#include <set>

namespace hypolab::suite {

using harness::json;
using harness::format_number;

struct SuiteSettings {
  std::string name;
  std::size_t kernel_paths = 1000000;  // point estimates, hitting, through
  std::size_t audit_paths = 200000;    // per grid point
  std::size_t through_audit_paths = 200000;
  std::size_t restart_paths = 200000;
  int volume_samples = 800;
  std::size_t bridge_paths = 2000;
  std::size_t covariance_paths = 8000;
  std::set<int> determinism_subset;  // criteria rerun at a second worker count

  static SuiteSettings quick() {
    SuiteSettings s;
    s.name = "quick";
    s.kernel_paths = 200000;
    s.audit_paths = 100000;
    s.through_audit_paths = 100000;
    s.restart_paths = 100000;
    s.volume_samples = 500;
    s.bridge_paths = 2000;
    s.determinism_subset = {1, 4};
    return s;
  }
  static SuiteSettings full() {
    SuiteSettings s;
    s.name = "full";
    s.determinism_subset = {1, 2, 4, 6, 7};
    return s;
  }
};

inline std::optional<SuiteSettings> settings_for(const std::string& name) {
  if (name == "quick") return SuiteSettings::quick();
  if (name == "full") return SuiteSettings::full();
  return std::nullopt;
}

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::vector<std::string> checks;  // "PASS name: ..." lines
  std::vector<json> records;
  double worst_margin = kInf;

  std::string jsonl() const {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
  }
};

inline const char* criterion_title(int id) {
  static const char* const titles[] = {
      "",
      "Euclidean distance exactness and metric properties",
      "Heisenberg distances and dual certificate",
      "Ball-volume growth and doubling",
      "Heat-kernel point estimates",
      "Varadhan limits on the default grids",
      "Hitting probabilities and the hitting bound",
      "Through-kernel, restart identity and coupling",
      "Bridge concentration around the minimiser",
      "Determinism across worker counts",
  };
  return id >= 1 && id <= 9 ? titles[id] : "unknown criterion";
}

/// Collects checks and records for one criterion. Margins are positive when
/// a check passes.
class Criterion {
 public:
  explicit Criterion(int id) {
    r_.id = id;
    r_.title = criterion_title(id);
    r_.pass = true;
  }

  void record(json j) {
    j["criterion"] = r_.id;
    r_.records.push_back(std::move(j));
  }

  void within(const std::string& name, double value, double target, double tol) {
    const double margin = tol - std::abs(value - target);
    add(name, margin >= 0, margin,
        format_number(value) + " vs " + format_number(target) + " tol " + format_number(tol),
        json{{"value", harness::number(value)}, {"target", target}, {"tol", tol}});
  }
  void at_least(const std::string& name, double value, double threshold) {
    const double margin = value - threshold;
    add(name, margin >= 0, margin, format_number(value) + " >= " + format_number(threshold),
        json{{"value", harness::number(value)}, {"threshold", threshold}});
  }
  void holds(const std::string& name, bool ok, const std::string& detail) {
    add(name, ok, ok ? 0.0 : -1.0, detail, json{{"detail", detail}});
  }
  void error(const std::string& what) { holds("completed", false, what); }

  CriterionResult finish() && { return std::move(r_); }

 private:
  void add(const std::string& name, bool ok, double margin, const std::string& detail, json extra) {
    r_.pass = r_.pass && ok;
    if (std::isfinite(margin)) r_.worst_margin = std::min(r_.worst_margin, margin);
    r_.checks.push_back(std::string(ok ? "PASS " : "FAIL ") + name + ": " + detail + "  margin " +
                        format_number(margin));
    extra["check"] = name;
    extra["pass"] = ok;
    extra["margin"] = harness::number(margin);
    record(std::move(extra));
  }
  CriterionResult r_;
};

struct RunContext {
  const SuiteSettings& settings;
  std::uint64_t seed;
  int workers;
};

namespace detail {

inline KernelOptions kernel_opts(const RunContext& c, std::size_t n, std::uint64_t tag) {
  KernelOptions k;
  k.n_paths = n;
  k.seed = derive_seed(c.seed, tag);
  k.workers = c.workers;
  return k;
}

inline DistanceOptions distance_opts(const RunContext& c) {
  DistanceOptions o;
  o.seed = c.seed;
  o.workers = c.workers;
  return o;
}

inline AuditOptions audit_opts(const RunContext& c, std::vector<double> grid, std::size_t n, bool tilt,
                               std::uint64_t tag) {
  AuditOptions o;
  o.t_grid = std::move(grid);
  o.kernel = kernel_opts(c, n, tag);
  o.tilt = tilt;
  o.distance = distance_opts(c);
  o.volume.seed = derive_seed(c.seed, tag + 1);
  o.volume.workers = c.workers;
  return o;
}

inline json estimate_record(const std::string& label, const KernelEstimate& e) {
  json j = harness::detail::estimate_json(e);
  j["case"] = label;
  return j;
}

inline json audit_record(const std::string& label, const BoundAudit& a) {
  json pts = json::array();
  for (const auto& p : a.points)
    pts.push_back(json{{"t", p.t},
                       {"estimate", p.estimate},
                       {"stderr", p.stderr},
                       {"lhs", p.lhs},
                       {"rhs", p.rhs},
                       {"margin", p.margin}});
  return json{{"case", label},
              {"audit", a.kind},
              {"rhs", a.rhs},
              {"distance", a.distance},
              {"extrapolated_limit", a.extrapolated_limit},
              {"limit_stderr", a.fit.limit_stderr},
              {"points", pts},
              {"dropped_t", a.dropped_t}};
}

inline void estimate_check(Criterion& c, const std::string& name, const KernelEstimate& e, double expected) {
  c.within(name, e.value, expected, 3 * e.stderr + e.bias_bound);
}

}  // namespace detail

// 1 ---------------------------------------------------------------------------

inline CriterionResult distance_exactness(const RunContext& rc) {
  Criterion c(1);
  const auto e2 = make_model("euclidean:2");
  const auto opts = detail::distance_opts(rc);
  const auto d = distance(e2, make_vec({0, 0}), make_vec({3, 4}), opts);
  c.record(json{{"case", "e2 (0,0)-(3,4)"}, {"value", d.value}, {"converged", d.converged}});
  c.within("d((0,0),(3,4)) = 5", d.value, 5.0, 1e-3);

  double worst_sym = kInf, worst_tri = kInf, worst_exact = kInf;
  const CounterRng rng(derive_seed(rc.seed, 101), 0);
  auto point = [&](std::uint32_t k) {
    const auto u = rng.uniform2(k, 0);
    return make_vec({4 * u[0] - 2, 4 * u[1] - 2});
  };
  for (std::uint32_t i = 0; i < 20; ++i) {
    const Vec x = point(3 * i), y = point(3 * i + 1), z = point(3 * i + 2);
    const double dxy = distance(e2, x, y, opts).value, dyx = distance(e2, y, x, opts).value;
    const double dyz = distance(e2, y, z, opts).value, dxz = distance(e2, x, z, opts).value;
    worst_sym = std::min(worst_sym, tol_dist(dxy) - std::abs(dxy - dyx));
    worst_tri = std::min(worst_tri, dxy + dyz + tol_dist(dxz) - dxz);
    worst_exact = std::min({worst_exact, tol_dist(dxy) - std::abs(dxy - (x - y).norm()),
                            tol_dist(dxz) - std::abs(dxz - (x - z).norm())});
    c.record(json{{"case", "triple"}, {"index", i}, {"dxy", dxy}, {"dyx", dyx}, {"dyz", dyz}, {"dxz", dxz}});
  }
  c.at_least("symmetry over 20 triples (worst slack)", worst_sym, 0);
  c.at_least("triangle inequality over 20 triples (worst slack)", worst_tri, 0);
  c.at_least("agreement with |x-y| (worst slack)", worst_exact, 0);
  return std::move(c).finish();
}

// 2 ---------------------------------------------------------------------------

inline CriterionResult heisenberg_distances(const RunContext& rc) {
  Criterion c(2);
  const auto h = make_model("heisenberg");
  const auto opts = detail::distance_opts(rc);
  const Vec o = Vec::Zero(3), y1 = make_vec({1, 0, 0});
  const double z = 1 / (4 * reference::kPi);
  const auto d1 = distance(h, o, y1, opts);
  const auto d2 = distance(h, o, make_vec({0, 0, z}), opts);
  const double oracle2 = reference::heisenberg_vertical_distance(z);
  c.record(json{{"case", "0-(1,0,0)"}, {"value", d1.value}, {"converged", d1.converged}});
  c.record(json{{"case", "0-(0,0,1/4pi)"}, {"value", d2.value}, {"oracle", oracle2}, {"converged", d2.converged}});
  c.within("d(0,(1,0,0)) = 1 (1%)", d1.value, 1.0, 0.01);
  c.within("d(0,(0,0,1/4pi)) vs isoperimetric circle (2%)", d2.value, oracle2, 0.02 * oracle2);

  DualCertificate cert;
  cert.w_minus = cert.w_plus = [](const Vec& p) { return p(0); };
  cert.grid = box_grid(make_vec({-1, -1, -1}), make_vec({2, 1, 1}), 7);
  const double bound = dual_certificate_check(h, cert, o, y1);
  c.record(json{{"case", "dual w = x1"},
                {"bound", bound},
                {"admissible", cert.admissible},
                {"max_gradient_norm2", cert.max_gradient_norm2}});
  c.at_least("dual bound for w = x1", bound, 0.999);
  c.holds("dual sandwich bound <= d", bound <= d1.value + tol_dist(d1.value),
          format_number(bound) + " <= " + format_number(d1.value));
  return std::move(c).finish();
}

// 3 ---------------------------------------------------------------------------

inline CriterionResult volume_growth(const RunContext& rc) {
  Criterion c(3);
  VolumeOptions vo;
  vo.n_samples = rc.settings.volume_samples;
  vo.seed = rc.seed;
  vo.workers = rc.workers;
  const std::vector<double> radii = {0.4, 0.3, 0.2, 0.1};
  struct Case {
    const char* label;
    const char* model;
    Vec x;
    double slope, tol, doubling_r;
  };
  const std::vector<Case> cases = {
      {"R^2", "euclidean:2", make_vec({0, 0}), 2, 0.15, 0.2},
      {"Heisenberg", "heisenberg", Vec::Zero(3), 4, 0.3, 0.4},
      {"Grushin origin", "grushin", make_vec({0, 0}), 3, 0.3, 0.2},
      {"Grushin off-line", "grushin", make_vec({1, 0}), 2, 0.3, 0.1},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& k = cases[i];
    const auto s = make_model(k.model);
    VolumeOptions o = vo;
    o.seed = derive_seed(rc.seed, 300 + i);
    const auto est = dimension_estimate(s, k.x, radii, o);
    const double q = doubling_ratio(s, k.x, k.doubling_r, o);
    const int n = homogeneous_dimension(s, k.x).N;
    json vols = json::array();
    for (const auto& v : est.volumes) vols.push_back(v.volume);
    c.record(json{{"case", k.label},
                  {"radii", radii},
                  {"volumes", vols},
                  {"slope", est.slope},
                  {"homogeneous_dimension", n},
                  {"doubling_radius", k.doubling_r},
                  {"doubling_ratio", q}});
    c.within(std::string(k.label) + " volume slope", est.slope, k.slope, k.tol);
    const double target = std::pow(2.0, n);
    c.within(std::string(k.label) + " doubling ratio / 2^N", q / target, 1.0, 0.25);
  }
  return std::move(c).finish();
}

// 4 ---------------------------------------------------------------------------

inline CriterionResult kernel_point_estimates(const RunContext& rc) {
  Criterion c(4);
  const std::size_t n = rc.settings.kernel_paths;
  const double g1 = reference::gaussian_kernel(1, 1.0, 0), g2 = reference::gaussian_kernel(2, 0.5, 1);
  c.within("closed form d=1 t=1", g1, 0.3989, 1e-4);
  c.within("closed form d=2 t=0.5 |x-y|=1", g2, 0.1171, 1e-4);

  const auto a = estimate_kernel(make_model("euclidean:1"), 1.0, make_vec({0}), make_vec({0}),
                                 detail::kernel_opts(rc, n, 401));
  c.record(detail::estimate_record("e1 t=1 0-0", a));
  detail::estimate_check(c, "p(1,0,0) on R", a, g1);

  const auto b = estimate_kernel(make_model("euclidean:2"), 0.5, make_vec({0, 0}), make_vec({1, 0}),
                                 detail::kernel_opts(rc, n, 402));
  c.record(detail::estimate_record("e2 t=0.5 |x-y|=1", b));
  detail::estimate_check(c, "p(0.5,x,y) on R^2", b, g2);

  const double gh = reference::heisenberg_kernel(0.25, 0.5, 0, 0);
  const auto e = estimate_kernel(make_model("heisenberg"), 0.25, Vec::Zero(3), make_vec({0.5, 0, 0}),
                                 detail::kernel_opts(rc, n, 403));
  json rec = detail::estimate_record("Heisenberg t=0.25 0-(0.5,0,0)", e);
  rec["oracle"] = gh;
  c.record(rec);
  detail::estimate_check(c, "Heisenberg p(0.25,0,(0.5,0,0)) vs quadrature", e, gh);
  return std::move(c).finish();
}

// 5 ---------------------------------------------------------------------------

inline CriterionResult varadhan(const RunContext& rc) {
  Criterion c(5);
  const std::size_t n = rc.settings.audit_paths;
  const std::vector<double> fine = {0.5, 0.35, 0.25, 0.175, 0.125};
  const auto e1 = varadhan_audit(make_model("euclidean:1"), make_vec({0}), make_vec({1}),
                                 detail::audit_opts(rc, fine, n, true, 501));
  c.record(detail::audit_record("R d=1", e1));
  c.within("R, d=1: limit vs -1/2", e1.extrapolated_limit, -0.5, 0.05);

  const auto e2 = varadhan_audit(make_model("euclidean:2"), make_vec({0, 0}), make_vec({2, 0}),
                                 detail::audit_opts(rc, {1.0, 0.7, 0.5, 0.35, 0.25}, n, true, 503));
  c.record(detail::audit_record("R^2 d=2", e2));
  c.within("R^2, d=2: limit vs -2", e2.extrapolated_limit, -2.0, 0.1);

  const auto h = varadhan_audit(make_model("heisenberg"), Vec::Zero(3), make_vec({1, 0, 0}),
                                detail::audit_opts(rc, fine, n, true, 505));
  c.record(detail::audit_record("Heisenberg 0-(1,0,0)", h));
  c.within("Heisenberg 0-(1,0,0): limit vs -1/2", h.extrapolated_limit, -0.5, 0.1);
  return std::move(c).finish();
}

// 6 ---------------------------------------------------------------------------

inline CriterionResult hitting(const RunContext& rc) {
  Criterion c(6);
  const auto e1 = make_model("euclidean:1");
  const auto a = half_space(1, 0, 1);
  const auto p = hitting_probability(e1, 1.0, make_vec({0}), a, detail::kernel_opts(rc, rc.settings.kernel_paths, 601));
  c.record(detail::estimate_record("R, A={z>=1}, t=1", p));
  c.within("P(T <= 1) vs reflection 0.3173", p.value, reference::reflection_hit(1, 1), 3 * p.stderr);

  const std::vector<double> grid = {0.5, 0.35, 0.25, 0.175, 0.125};
  const auto audit = hitting_bound_audit(e1, make_vec({0}), a, detail::audit_opts(rc, grid, rc.settings.audit_paths, false, 603));
  c.record(detail::audit_record("R, A={z>=1}", audit));
  c.within("R: limit of t log P vs -1/2", audit.extrapolated_limit, -0.5, 0.1);

  auto ho = detail::audit_opts(rc, grid, rc.settings.audit_paths, false, 605);
  ho.implied_constants = false;
  const auto hs = hitting_bound_audit(make_model("heisenberg"), Vec::Zero(3), half_space(3, 0, 1), ho);
  c.record(detail::audit_record("Heisenberg, A={x1>=1}", hs));
  double worst = kInf;
  for (const auto& pt : hs.points) worst = std::min(worst, pt.margin);
  c.holds("Heisenberg: every grid t produced hits", hs.dropped_t.empty(),
          std::to_string(hs.dropped_t.size()) + " grid points dropped");
  c.at_least("Heisenberg half-space: smallest margin", worst, -0.1);
  return std::move(c).finish();
}

// 7 ---------------------------------------------------------------------------

inline CriterionResult through(const RunContext& rc) {
  Criterion c(7);
  const auto e1 = make_model("euclidean:1");
  const Vec o = make_vec({0});
  const auto a = half_space(1, 0, 1);
  auto k = detail::kernel_opts(rc, rc.settings.kernel_paths, 701);
  k.r_kde = 0.05;
  const auto trip = kernel_triplet(e1, 0.5, o, a, o, k);
  c.record(detail::estimate_record("R images full", trip.full));
  c.record(detail::estimate_record("R images dirichlet", trip.dirichlet));
  c.record(detail::estimate_record("R images through", trip.through));
  const double phi2 = reference::gaussian_kernel(1, 0.5, 2);
  detail::estimate_check(c, "p(0.5,0,A,0) vs phi_0.5(2)", trip.through, phi2);

  const auto audit = through_bound_audit(e1, o, a, o, false,
                                         detail::audit_opts(rc, {0.5, 0.35, 0.25, 0.175},
                                                            rc.settings.through_audit_paths, true, 703));
  c.record(detail::audit_record("R images audit", audit));
  c.within("R images: limit vs -2", audit.extrapolated_limit, -2.0, 0.15);

  const auto restart = through_kernel_restart(
      e1, 0.5, o, a, o, [](double tau, const Vec& z, const Vec& w) { return gaussian_heat_kernel(tau, z, w); },
      detail::kernel_opts(rc, rc.settings.restart_paths, 705));
  c.record(detail::estimate_record("R images restart", restart));
  const double combined = std::hypot(restart.stderr, trip.through.stderr);
  c.within("restart vs direct through estimate", restart.value, trip.through.value,
           3 * combined + trip.through.bias_bound);

  // coupling on every run: the images triplet plus small runs elsewhere
  bool coupled = trip.coupling_holds;
  std::string where = coupled ? "" : "R images";
  const auto h = make_model("heisenberg");
  const auto e2 = make_model("euclidean:2");
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto th = kernel_triplet(h, 0.3, Vec::Zero(3), half_space(3, 0, 0.4), make_vec({0.2, 0, 0}),
                                   detail::kernel_opts(rc, 20000, 710 + i));
    const auto te = kernel_triplet(e2, 0.4, make_vec({0, 0}), half_space(2, 0, 0.5), make_vec({0.2, 0.1}),
                                   detail::kernel_opts(rc, 20000, 720 + i));
    c.record(json{{"case", "coupling"},
                  {"run", i},
                  {"heisenberg", {th.full.value, th.dirichlet.value}},
                  {"r2", {te.full.value, te.dirichlet.value}}});
    if (!th.coupling_holds) where += " heisenberg#" + std::to_string(i);
    if (!te.coupling_holds) where += " r2#" + std::to_string(i);
    coupled = coupled && th.coupling_holds && te.coupling_holds;
  }
  c.holds("coupling p_U <= p on all 9 runs", coupled, coupled ? "no violations" : "violated on" + where);
  return std::move(c).finish();
}

// 8 ---------------------------------------------------------------------------

inline CriterionResult bridges(const RunContext& rc) {
  Criterion c(8);
  const std::vector<double> grid = {0.5, 0.2, 0.1, 0.05};
  const double rho = 0.3;
  struct Case {
    const char* label;
    const char* model;
    Vec x, y, lo, hi;
    double threshold;
  };
  const std::vector<Case> cases = {
      {"R^2 0-(1,0)", "euclidean:2", make_vec({0, 0}), make_vec({1, 0}), make_vec({-0.5, -0.5}),
       make_vec({1.5, 0.5}), 0.95},
      {"Heisenberg 0-(1,0,0)", "heisenberg", Vec::Zero(3), make_vec({1, 0, 0}), make_vec({-0.5, -0.5, -0.5}),
       make_vec({1.5, 0.5, 0.5}), 0.9},
  };
  double worst_cov = kInf;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& k = cases[ci];
    const auto s = make_model(k.model);
    auto dopts = detail::distance_opts(rc);
    const auto witness = distance(s, k.x, k.y, dopts).witness.value();
    double prev = -1, prev_se = 0, last = 0;
    double worst_mono = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      BridgeOptions bo;
      bo.n_target = rc.settings.bridge_paths;
      bo.seed = derive_seed(rc.seed, 800 + 10 * ci + i);
      bo.workers = rc.workers;
      bo.distance = dopts;
      const auto ens = sample_bridge_tilted(s, grid[i], k.x, k.y, bo, witness);
      const auto gamma = geodesic_on_grid(s, k.x, witness, ens.n_steps);
      const auto diag = concentration_diagnostic(ens, gamma, rho);
      c.record(json{{"case", k.label},
                    {"t", grid[i]},
                    {"rho", rho},
                    {"fraction_inside", diag.fraction_inside},
                    {"stderr", diag.stderr},
                    {"quantiles", diag.sup_deviation_quantiles},
                    {"acceptance_rate", ens.acceptance_rate},
                    {"n_paths", ens.size()}});
      if (prev >= 0) worst_mono = std::min(worst_mono, diag.fraction_inside + 2 * std::hypot(diag.stderr, prev_se) - prev);
      prev = diag.fraction_inside;
      prev_se = diag.stderr;
      last = diag.fraction_inside;
    }
    c.at_least(std::string(k.label) + " fractions nondecreasing (2 stderr slack)", worst_mono, 0);
    c.at_least(std::string(k.label) + " fraction inside rho=0.3 at t=0.05", last, k.threshold);
    const auto sm = strong_minimality_report(s, k.x, k.y, open_box(k.lo, k.hi), 1e-3, dopts);
    c.record(json{{"case", k.label},
                  {"strong_minimality_margin", sm.margin},
                  {"energy_outside", sm.energy_outside},
                  {"distance", sm.distance},
                  {"is_strong", sm.is_strong}});
    c.at_least(std::string(k.label) + " strong-minimality margin", sm.margin, 0);
  }
  // Covariance against the exact bridge law s(1-s)t. A terminal ball of
  // radius tol adds about s^2 tol^2 / 4 per coordinate, so these ensembles
  // use a tighter ball than the tube runs (1.7% at s = 3/4).
  const auto e2 = make_model("euclidean:2");
  const Vec x = make_vec({0, 0}), y = make_vec({1, 0});
  const auto witness = distance(e2, x, y, detail::distance_opts(rc)).witness.value();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    BridgeOptions bo;
    bo.n_target = rc.settings.covariance_paths;
    bo.terminal_tol = 0.15 * std::sqrt(grid[i]);
    bo.seed = derive_seed(rc.seed, 850 + i);
    bo.workers = rc.workers;
    const auto ens = sample_bridge_tilted(e2, grid[i], x, y, bo, witness);
    json ratios = json::array();
    for (double sfrac : {0.25, 0.5, 0.75}) {
      const auto step = static_cast<std::size_t>(std::lround(sfrac * ens.n_steps));
      const auto m = marginal_moments(ens, step);
      const double target = sfrac * (1 - sfrac) * grid[i];
      for (int coord = 0; coord < 2; ++coord) {
        const double ratio = m.covariance(coord, coord) / target;
        ratios.push_back(ratio);
        worst_cov = std::min(worst_cov, 0.1 - std::abs(ratio - 1));
      }
    }
    c.record(json{{"case", "R^2 covariance"},
                  {"t", grid[i]},
                  {"terminal_tol", ens.terminal_tol},
                  {"n_paths", ens.size()},
                  {"effective_size", ens.effective_size()},
                  {"variance_ratios", ratios}});
  }
  c.at_least("R^2 bridge variance within 10% of s(1-s)t at s = 1/4, 1/2, 3/4 (worst slack)", worst_cov, 0);
  return std::move(c).finish();
}

// ---------------------------------------------------------------------------

struct SuiteReport {
  std::string suite;
  std::vector<CriterionResult> criteria;

  bool pass() const {
    for (const auto& c : criteria)
      if (!c.pass) return false;
    return true;
  }
  std::string jsonl() const {
    std::string out;
    for (const auto& c : criteria)
      if (c.id != 9) out += c.jsonl();
    return out;
  }
  std::string table() const {
    std::ostringstream os;
    os << "criterion  status  worst margin  title\n";
    for (const auto& c : criteria) {
      char line[256];
      std::snprintf(line, sizeof line, "%9d  %-6s  %12s  %s\n", c.id, c.pass ? "PASS" : "FAIL",
                    std::isfinite(c.worst_margin) ? format_number(c.worst_margin).c_str() : "-", c.title.c_str());
      os << line;
    }
    return os.str();
  }
};

using CriterionFn = CriterionResult (*)(const RunContext&);

inline const std::vector<std::pair<int, CriterionFn>>& battery() {
  static const std::vector<std::pair<int, CriterionFn>> b = {
      {1, distance_exactness}, {2, heisenberg_distances}, {3, volume_growth}, {4, kernel_point_estimates},
      {5, varadhan},           {6, hitting},              {7, through},       {8, bridges},
  };
  return b;
}

inline CriterionResult run_criterion(int id, CriterionFn fn, const RunContext& rc) {
  try {
    return fn(rc);
  } catch (const std::exception& e) {
    Criterion c(id);
    c.error(e.what());
    return std::move(c).finish();
  }
}

/// Criteria 1-8, then 9: the determinism subset rerun at another worker count
/// must reproduce its records byte for byte. `progress` sees each result.
inline SuiteReport run_suite(const SuiteSettings& settings, std::uint64_t seed, int workers,
                             const std::function<void(const CriterionResult&)>& progress = {}) {
  SuiteReport rep;
  rep.suite = settings.name;
  const RunContext rc{settings, seed, workers};
  for (const auto& [id, fn] : battery()) {
    rep.criteria.push_back(run_criterion(id, fn, rc));
    if (progress) progress(rep.criteria.back());
  }
  const int other = workers == 1 ? 4 : 1;
  const RunContext alt{settings, seed, other};
  Criterion det(9);
  for (const auto& [id, fn] : battery()) {
    if (!settings.determinism_subset.count(id)) continue;
    const auto again = run_criterion(id, fn, alt);
    const auto& first = rep.criteria[static_cast<size_t>(id - 1)];
    const bool same = again.jsonl() == first.jsonl();
    det.holds("criterion " + std::to_string(id) + " records at workers " + std::to_string(workers) + " and " +
                  std::to_string(other),
              same, same ? std::to_string(first.jsonl().size()) + " bytes identical" : "records differ");
  }
  rep.criteria.push_back(std::move(det).finish());
  if (progress) progress(rep.criteria.back());
  return rep;
}

}  // namespace hypolab::suite
