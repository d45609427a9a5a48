#include "hypolab/kernel.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hypolab;

namespace {

KernelOptions paths(std::size_t n, std::uint64_t seed = 0xC0FFEE) {
  KernelOptions o;
  o.n_paths = n;
  o.seed = seed;
  return o;
}

double tolerance(const KernelEstimate& e) { return 3 * e.stderr + e.bias_bound; }

}  // namespace

TEST(KernelOracles, FrozenValues) {
  EXPECT_NEAR(oracle::heisenberg_kernel(0.25, 0, 0, 0), 4.0, 1e-8);
  EXPECT_NEAR(oracle::heisenberg_kernel(1.0, 0, 0, 0), 0.25, 1e-9);
  EXPECT_NEAR(oracle::heisenberg_kernel(0.25, 0.5, 0, 0), 1.6757550685, 1e-8);
  EXPECT_NEAR(oracle::phi(1, 0), 0.398942, 1e-6);
  EXPECT_NEAR(oracle::gaussian_kernel(2, 0.5, 1), 0.117099, 1e-6);
  EXPECT_NEAR(oracle::phi(0.5, 2), 0.0103335, 1e-7);
  EXPECT_NEAR(oracle::phi(0.5, 0) - oracle::phi(0.5, 2), 0.553856, 1e-6);
  // Heisenberg scaling p_t(x, y, z) = t^-2 p_1(x/sqrt t, y/sqrt t, z/t)
  EXPECT_NEAR(oracle::heisenberg_kernel(0.25, 0.3, 0.1, 0.05),
              16 * oracle::heisenberg_kernel(1, 0.6, 0.2, 0.2), 1e-8);
}

TEST(Kernel, EuclideanPointEstimates) {
  auto e1 = make_model("euclidean:1");
  const auto a = estimate_kernel(e1, 1.0, make_vec({0}), make_vec({0}), paths(100000));
  EXPECT_NEAR(a.value, oracle::phi(1, 0), tolerance(a));
  EXPECT_EQ(a.kind, KernelKind::kFull);
  EXPECT_NEAR(a.r_kde, 0.4, 1e-12);

  auto e2 = make_model("euclidean:2");
  const auto b = estimate_kernel(e2, 0.5, make_vec({0, 0}), make_vec({1, 0}), paths(100000, 3));
  EXPECT_NEAR(b.value, oracle::gaussian_kernel(2, 0.5, 1), tolerance(b));
  EXPECT_GT(b.hits, 50u);
  EXPECT_GE(b.bias_bound, 0);
}

TEST(Kernel, HeisenbergMatchesQuadrature) {
  auto h = make_model("heisenberg");
  const auto e = estimate_kernel(h, 0.25, Vec::Zero(3), make_vec({0.5, 0, 0}), paths(100000));
  EXPECT_NEAR(e.value, oracle::heisenberg_kernel(0.25, 0.5, 0, 0), tolerance(e));
}

TEST(Kernel, ZeroHitsIsReported) {
  auto e1 = make_model("euclidean:1");
  const auto e = estimate_kernel(e1, 0.01, make_vec({0}), make_vec({5}), paths(2000));
  EXPECT_EQ(e.hits, 0u);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_GT(e.stderr, 0.0);
}

TEST(Kernel, Dirichlet) {
  auto e1 = make_model("euclidean:1");
  const Vec o = make_vec({0});
  auto u = OpenRegion{[](const Vec& x) { return x(0) - 1; }};
  const auto d = estimate_kernel_dirichlet(e1, 0.5, o, o, u, paths(200000));
  EXPECT_EQ(d.kind, KernelKind::kDirichlet);
  EXPECT_NEAR(d.value, oracle::phi(0.5, 0) - oracle::phi(0.5, 2), tolerance(d));

  // nothing reachable is removed: identical counts on identical noise
  const auto wide = estimate_kernel_dirichlet(e1, 0.5, o, o, open_ball(o, 100), paths(20000, 5));
  const auto full = estimate_kernel(e1, 0.5, o, o, paths(20000, 5));
  EXPECT_EQ(wide.hits, full.hits);
  EXPECT_DOUBLE_EQ(wide.value, full.value);

  const auto tiny = estimate_kernel_dirichlet(e1, 0.5, o, make_vec({0.5}), open_ball(o, 0.05), paths(20000));
  EXPECT_EQ(tiny.value, 0.0);
  EXPECT_THROW(estimate_kernel_dirichlet(e1, 0.5, make_vec({2}), o, u, paths(10)), ArgumentError);
}

TEST(Kernel, ThroughImages) {
  auto e1 = make_model("euclidean:1");
  const Vec o = make_vec({0});
  auto opts = paths(400000);
  opts.r_kde = 0.05;
  const auto trip = kernel_triplet(e1, 0.5, o, half_space(1, 0, 1), o, opts);
  EXPECT_TRUE(trip.coupling_holds);
  EXPECT_LE(trip.dirichlet.value, trip.full.value);
  EXPECT_GE(trip.through.pre_clip_value, 0);
  EXPECT_NEAR(trip.through.value, oracle::phi(0.5, 2), tolerance(trip.through));
  // the through count and the difference of counts agree exactly
  EXPECT_NEAR(trip.through.value, trip.full.value - trip.dirichlet.value, 1e-12 * trip.full.value);

  const auto none = through_kernel(e1, 0.5, o, half_space(1, 0, 50), o, paths(5000));
  EXPECT_EQ(none.value, 0.0);
  EXPECT_THROW(through_kernel(e1, 0.5, o, half_space(1, 0, 1), make_vec({2}), paths(10)), ArgumentError);
  EXPECT_THROW(through_kernel(e1, 0.5, make_vec({2}), half_space(1, 0, 1), o, paths(10)), ArgumentError);
}

TEST(Kernel, CouplingHoldsAcrossSeeds) {
  auto h = make_model("heisenberg");
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto trip = kernel_triplet(h, 0.3, Vec::Zero(3), half_space(3, 0, 0.4), make_vec({0.2, 0, 0}),
                                     paths(5000, seed));
    EXPECT_TRUE(trip.coupling_holds);
    EXPECT_LE(trip.dirichlet.value, trip.full.value);
  }
}

TEST(Kernel, RestartIdentity) {
  auto e1 = make_model("euclidean:1");
  const Vec o = make_vec({0});
  const auto a = half_space(1, 0, 1);
  auto opts = paths(400000, 11);
  opts.r_kde = 0.05;
  const auto direct = through_kernel(e1, 0.5, o, a, o, opts);
  const auto restart = through_kernel_restart(
      e1, 0.5, o, a, o, [](double tau, const Vec& z, const Vec& y) { return gaussian_heat_kernel(tau, z, y); },
      paths(100000, 12));
  EXPECT_NEAR(restart.value, oracle::phi(0.5, 2), 3 * restart.stderr);
  const double combined = std::hypot(direct.stderr, restart.stderr);
  EXPECT_NEAR(direct.value, restart.value, 3 * combined + direct.bias_bound);
}

TEST(Kernel, Reflected) {
  auto e1 = make_model("euclidean:1");
  const Vec o = make_vec({0});
  const auto a = half_space(1, 0, 1);
  auto opts = paths(200000, 4);
  opts.r_kde = 0.05;
  const auto opposite = reflected_kernel(e1, 0.5, -1, 1, o, o, a, opts);
  const auto through = through_kernel(e1, 0.5, o, a, o, opts);
  EXPECT_NEAR(opposite.value, through.value, 1e-12);
  EXPECT_NEAR(opposite.value, oracle::phi(0.5, 2), tolerance(opposite));

  const auto same = reflected_kernel(e1, 0.5, 1, 1, o, o, a, opts);
  const auto full = estimate_kernel(e1, 0.5, o, o, opts);
  EXPECT_GE(same.value, full.value);
  EXPECT_NEAR(same.value, 2 * oracle::phi(0.5, 0) - oracle::phi(0.5, 2), 3 * same.stderr + 0.01);
  EXPECT_THROW(reflected_kernel(e1, 0.5, 0, 1, o, o, a, opts), ArgumentError);
}

TEST(Kernel, NuSymmetry) {
  for (const char* name : {"heisenberg", "grushin"}) {
    auto s = make_model(name);
    const Vec x = s.dim == 3 ? make_vec({0, 0, 0}) : make_vec({0.2, 0.1});
    const Vec y = s.dim == 3 ? make_vec({0.3, 0.2, 0.1}) : make_vec({0.6, -0.2});
    const auto fwd = estimate_kernel(s, 0.5, x, y, paths(100000, 1));
    const auto back = estimate_kernel(s, 0.5, y, x, paths(100000, 2));
    EXPECT_LE(std::abs(fwd.value - back.value),
              3 * std::hypot(fwd.stderr, back.stderr) + 2 * std::max(fwd.bias_bound, back.bias_bound))
        << name;
  }
}

TEST(Kernel, BandwidthConsistency) {
  auto e2 = make_model("euclidean:2");
  auto wide = paths(50000, 8);
  wide.r_kde = 0.3;
  auto narrow = paths(200000, 9);
  narrow.r_kde = 0.15;
  const auto a = estimate_kernel(e2, 0.5, make_vec({0, 0}), make_vec({0.5, 0}), wide);
  const auto b = estimate_kernel(e2, 0.5, make_vec({0, 0}), make_vec({0.5, 0}), narrow);
  EXPECT_LT(std::abs(a.value - b.value), a.stderr + b.stderr + a.bias_bound + b.bias_bound);
}

TEST(Hitting, ReflectionAndMonotonicity) {
  auto e1 = make_model("euclidean:1");
  const auto a = half_space(1, 0, 1);
  const auto p = hitting_probability(e1, 1.0, make_vec({0}), a, paths(100000));
  EXPECT_EQ(p.kind, KernelKind::kHitting);
  EXPECT_NEAR(p.value, oracle::reflection_hit(1, 1), 3 * p.stderr);

  // same dt and seed: the events are nested
  double prev = 0;
  for (int k = 1; k <= 5; ++k) {
    auto o = paths(20000, 3);
    o.n_steps = 80 * k;
    const auto q = hitting_probability(e1, 0.2 * k, make_vec({0}), a, o);
    EXPECT_GE(q.value, prev);
    EXPECT_LE(q.value, 1.0);
    prev = q.value;
  }

  const auto near = hitting_probability(e1, 0.01, make_vec({0}), half_space(1, 0, 1e-3), paths(20000));
  EXPECT_GT(near.value, 0.97);
}

TEST(Fit, RecoversExactFamily) {
  const std::vector<double> t{0.5, 0.35, 0.25, 0.175, 0.125};
  std::vector<double> lhs, se(t.size(), 1e-3);
  for (double ti : t) lhs.push_back(-0.7 + 0.3 * ti * std::log(1 / ti) - 0.2 * ti);
  const auto f = fit_small_time(t, lhs, se);
  EXPECT_NEAR(f.limit, -0.7, 1e-9);
  EXPECT_NEAR(f.a, 0.3, 1e-8);
  EXPECT_NEAR(f.b, -0.2, 1e-8);
  EXPECT_THROW(fit_small_time({0.5, 0.25}, {-1, -1}, {1, 1}), InsufficientSamples);
}

TEST(Audit, VaradhanEuclidean) {
  auto e1 = make_model("euclidean:1");
  AuditOptions o;
  o.t_grid = {0.5, 0.35, 0.25, 0.175, 0.125};
  o.kernel = paths(100000);
  o.tilt = true;
  const auto audit = varadhan_audit(e1, make_vec({0}), make_vec({1}), o);
  EXPECT_EQ(audit.points.size(), 5u);
  EXPECT_NEAR(audit.rhs, -0.5, 1e-3);
  EXPECT_NEAR(audit.extrapolated_limit, -0.5, 0.05);
  ASSERT_TRUE(audit.hsu);
  EXPECT_TRUE(audit.hsu->in_S);
  for (const auto& p : audit.points) EXPECT_NEAR(p.margin, p.rhs - p.lhs, 1e-12);

  auto e2 = make_model("euclidean:2");
  o.t_grid = {1.0, 0.7, 0.5, 0.35, 0.25};
  const auto far = varadhan_audit(e2, make_vec({0, 0}), make_vec({2, 0}), o);
  EXPECT_NEAR(far.extrapolated_limit, -2.0, 0.1);
}

TEST(Audit, VaradhanHeisenberg) {
  auto h = make_model("heisenberg");
  AuditOptions o;
  o.t_grid = {0.5, 0.35, 0.25, 0.175, 0.125};
  o.kernel = paths(100000);
  o.tilt = true;
  const auto audit = varadhan_audit(h, Vec::Zero(3), make_vec({1, 0, 0}), o);
  EXPECT_NEAR(audit.distance, 1.0, 0.01);
  EXPECT_NEAR(audit.extrapolated_limit, -0.5, 0.1);
  // the estimates track the quadrature oracle
  for (const auto& p : audit.points)
    EXPECT_NEAR(p.estimate, oracle::heisenberg_kernel(p.t, 1, 0, 0), 4 * p.stderr + p.bias_bound) << p.t;
}

TEST(Audit, HittingBound) {
  auto e1 = make_model("euclidean:1");
  AuditOptions o;
  o.t_grid = {0.5, 0.35, 0.25, 0.175, 0.125};
  o.kernel = paths(100000);
  const auto audit = hitting_bound_audit(e1, make_vec({0}), half_space(1, 0, 1), o);
  EXPECT_NEAR(audit.extrapolated_limit, -0.5, 0.1);
  for (const auto& p : audit.points) {
    EXPECT_NEAR(p.estimate, oracle::reflection_hit(p.t, 1), 3 * p.stderr + 1e-4);
    ASSERT_TRUE(p.implied_constant);
    EXPECT_GT(*p.implied_constant, 0);
  }

  auto h = make_model("heisenberg");
  o.implied_constants = false;
  const auto hs = hitting_bound_audit(h, Vec::Zero(3), half_space(3, 0, 1), o);
  EXPECT_NEAR(hs.distance, 1.0, 0.01);
  for (const auto& p : hs.points) EXPECT_GE(p.margin, -0.1) << p.t;
  EXPECT_LE(hs.extrapolated_limit, -0.5 + 0.1);
}

TEST(Audit, ThroughBounds) {
  auto e1 = make_model("euclidean:1");
  AuditOptions o;
  o.t_grid = {0.5, 0.35, 0.25, 0.175};
  o.kernel = paths(100000);
  o.tilt = true;
  const auto images = through_bound_audit(e1, make_vec({0}), half_space(1, 0, 1), make_vec({0}), false, o);
  EXPECT_NEAR(images.rhs, -2.0, 0.01);
  EXPECT_NEAR(images.extrapolated_limit, -2.0, 0.15);
  for (const auto& p : images.points) EXPECT_FALSE(p.binding_radius.empty());

  auto e2 = make_model("euclidean:2");
  o.implied_constants = false;
  const auto sector = through_bound_audit(e2, make_vec({0, 0}), half_space(2, 0, 1), make_vec({0.5, 0}), true, o);
  EXPECT_EQ(sector.lambda, 0.0);
  EXPECT_NEAR(sector.rhs, -1.125, 0.02);
  EXPECT_GE(sector.margin, -0.1);
  for (const auto& p : sector.points) EXPECT_DOUBLE_EQ(p.rhs, sector.rhs);
}

TEST(Audit, Errors) {
  auto e1 = make_model("euclidean:1");
  AuditOptions o;
  o.kernel = paths(1000);
  o.t_grid = {0.5, 0.25};
  EXPECT_THROW(varadhan_audit(e1, make_vec({0}), make_vec({1}), o), ArgumentError);
  o.t_grid = {0.25, 0.5, 0.1};
  EXPECT_THROW(varadhan_audit(e1, make_vec({0}), make_vec({1}), o), ArgumentError);
  o.t_grid = {0.02, 0.015, 0.01};
  o.check_hsu = false;
  EXPECT_THROW(varadhan_audit(e1, make_vec({0}), make_vec({3}), o), InsufficientSamples);
}
