#include "hypolab/metric.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hypolab;

namespace {

constexpr double kPi = std::numbers::pi;

// Lifted circles of length L enclose area L^2/(4 pi); the smallest L on a
// fine grid whose circle reaches height z.
double isoperimetric_oracle(double z) {
  double best = kInf;
  for (int i = 1; i <= 200000; ++i) {
    const double len = 1e-5 * i;
    if (len * len / (4 * kPi) >= z) {
      best = len;
      break;
    }
  }
  return best;
}

// Unit-ball volume of the Heisenberg group: the ball is {|z| <= A(rho)}, with
// A(rho) the area cut off by a circular arc of length 1 over a chord rho.
double heisenberg_unit_ball_volume() {
  auto area = [](double rho) {
    if (rho >= 1) return 0.0;
    double lo = 1e-12, hi = kPi;  // sin(t)/t = rho, decreasing on (0, pi]
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::sin(mid) / mid > rho ? lo : hi) = mid;
    }
    const double th = 0.5 * (lo + hi);
    const double r = 1 / (2 * th);
    return r * r * (2 * th - std::sin(2 * th)) / 2;
  };
  const int n = 20000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double rho = (i + 0.5) / n;
    sum += 2 * area(rho) * 2 * kPi * rho / n;
  }
  return sum;
}

// Grushin: unit-speed normal geodesics from the origin are
// x = sin(l t)/l, y = (t/2 - sin(2 l t)/(4 l))/l; first time any of them
// reaches the unit circle.
double grushin_circle_oracle() {
  double best = kInf;
  for (int i = -400; i <= 400; ++i) {
    const double l = 0.05 * i;
    for (int k = 1; k <= 4000; ++k) {
      const double t = 1e-3 * k;
      const double x = l == 0 ? t : std::sin(l * t) / l;
      const double y = l == 0 ? 0 : (t / 2 - std::sin(2 * l * t) / (4 * l)) / l;
      if (x * x + y * y >= 1) {
        best = std::min(best, t);
        break;
      }
    }
  }
  return best;
}

// Shortest Euclidean path from x to y touching the boundary of the box
// pushed out by delta, by a dense scan of boundary points.
double reflected_path_energy(const Vec& x, const Vec& y, const Vec& lo, const Vec& hi, double delta) {
  double best = kInf;
  const Vec l = lo.array() - delta, h = hi.array() + delta;
  for (int i = 0; i <= 4000; ++i) {
    const double s = i / 4000.0;
    const Vec pts[] = {make_vec({l(0) + s * (h(0) - l(0)), l(1)}), make_vec({l(0) + s * (h(0) - l(0)), h(1)}),
                       make_vec({l(0), l(1) + s * (h(1) - l(1))}), make_vec({h(0), l(1) + s * (h(1) - l(1))})};
    for (const auto& z : pts) {
      const double len = (z - x).norm() + (y - z).norm();
      best = std::min(best, len * len);
    }
  }
  return best;
}

Vec random_point(CounterRng& rng, int dim, std::uint32_t step, double scale) {
  Vec p(dim);
  for (int k = 0; k < dim; k += 2) {
    const auto u = rng.uniform2(step * 8 + static_cast<std::uint32_t>(k), 0);
    p(k) = scale * (2 * u[0] - 1);
    if (k + 1 < dim) p(k + 1) = scale * (2 * u[1] - 1);
  }
  return p;
}

}  // namespace

TEST(Oracles, FrozenValues) {
  EXPECT_NEAR(isoperimetric_oracle(1 / (4 * kPi)), 1.0, 1e-4);
  EXPECT_NEAR(isoperimetric_oracle(0.01), std::sqrt(4 * kPi * 0.01), 1e-4);
  EXPECT_NEAR(heisenberg_unit_ball_volume(), 0.82588, 1e-4);
  EXPECT_NEAR(grushin_circle_oracle(), 1.0, 1e-3);
  EXPECT_NEAR(reflected_path_energy(make_vec({0, 0}), make_vec({1, 0}), make_vec({-0.5, -0.5}), make_vec({1.5, 0.5}), 0),
              2.0, 1e-6);
}

TEST(Control, IntegrateExamples) {
  auto e2 = make_model("euclidean:2");
  auto t = integrate_control(e2, make_vec({0, 0}), ControlPath::constant(16, make_vec({1, 0})));
  EXPECT_EQ(t.points.size(), 17u);
  EXPECT_NEAR((t.points.back() - make_vec({1, 0})).norm(), 0, 1e-12);

  auto h = make_model("heisenberg");
  t = integrate_control(h, Vec::Zero(3), ControlPath::constant(16, make_vec({1, 0})));
  EXPECT_NEAR((t.points.back() - make_vec({1, 0, 0})).norm(), 0, 1e-12);

  auto g = make_model("grushin");
  t = integrate_control(g, make_vec({0, 0}), ControlPath::constant(16, make_vec({0, 1})));
  EXPECT_NEAR(t.points.back().norm(), 0, 1e-12);
  EXPECT_FALSE(t.exit_index);
}

TEST(Control, ExitFlag) {
  auto disc = make_model("disc");
  const auto t = integrate_control(disc, make_vec({0, 0}), ControlPath::constant(20, make_vec({2.1, 0})));
  ASSERT_TRUE(t.exit_index);
  EXPECT_EQ(*t.exit_index, 10);
}

TEST(Control, Energy) {
  EXPECT_DOUBLE_EQ(energy(ControlPath::constant(7, make_vec({1, 0}))), 1.0);
  EXPECT_DOUBLE_EQ(energy(ControlPath::constant(5, make_vec({2, 0}))), 4.0);
  ControlPath alt = ControlPath::constant(10, make_vec({1, 0}));
  for (int k = 1; k < 10; k += 2) alt.controls(k, 0) = -1;
  EXPECT_DOUBLE_EQ(energy(alt), 1.0);
}

TEST(Control, ConstantSpeedAndCauchySchwarz) {
  CounterRng rng(3, 0);
  for (std::uint32_t trial = 0; trial < 10; ++trial) {
    ControlPath c;
    c.n_steps = 32;
    c.controls.resize(32, 2);
    for (int k = 0; k < 32; ++k) {
      const auto z = rng.normal2(trial * 64 + static_cast<std::uint32_t>(k), 0);
      c.controls(k, 0) = z[0];
      c.controls(k, 1) = z[1];
    }
    const double len = path_length(c);
    EXPECT_GE(energy(c), len * len - 1e-12);
    const auto cs = constant_speed(c);
    EXPECT_LE(energy(cs), energy(c) + 1e-12);
    EXPECT_GE(energy(cs), path_length(cs) * path_length(cs) - 1e-12);
  }
  const auto flat = ControlPath::constant(8, make_vec({0.6, 0.8}));
  EXPECT_NEAR(energy(flat), path_length(flat) * path_length(flat), 1e-14);

  // slowly turning control with varying speed: resampling keeps the length
  // and makes the speed nearly constant
  ControlPath smooth;
  smooth.n_steps = 64;
  smooth.controls.resize(64, 2);
  for (int k = 0; k < 64; ++k) {
    const double t = (k + 0.5) / 64, speed = 1 + 0.5 * std::sin(2 * kPi * t);
    smooth.controls.row(k) << speed * std::cos(t), speed * std::sin(t);
  }
  const auto cs = constant_speed(smooth);
  EXPECT_NEAR(path_length(cs), path_length(smooth), 1e-3);
  EXPECT_LT(energy(cs), energy(smooth));
  EXPECT_LT(cs.controls.rowwise().norm().maxCoeff() - cs.controls.rowwise().norm().minCoeff(), 1e-3);
}

TEST(Control, AdjointGradientMatchesDifferences) {
  auto s = make_model("heisenberg");
  const detail::ControlObjective obj(s, make_vec({0.1, -0.2, 0.05}), 12);
  const Vec y = make_vec({0.7, 0.3, 0.2});
  const TrajectoryPenalty pen = [&](const std::vector<Vec>& st, std::vector<Vec>& g) {
    const Vec e = st.back() - y;
    g.back() += 2 * 10 * e;
    g[5] += 2 * st[5];
    return 10 * e.squaredNorm() + st[5].squaredNorm();
  };
  Eigen::VectorXd u = detail::random_pl_controls(12, 2, 0.7, 5, 1), grad;
  obj.evaluate(u, grad, pen);
  Eigen::VectorXd tmp;
  for (int i = 0; i < u.size(); ++i) {
    Eigen::VectorXd up = u, um = u;
    up(i) += 1e-6;
    um(i) -= 1e-6;
    const double fd = (obj.evaluate(up, tmp, pen) - obj.evaluate(um, tmp, pen)) / 2e-6;
    EXPECT_NEAR(grad(i), fd, 1e-6 * (1 + std::abs(fd)));
  }
}

TEST(Distance, EuclideanExact) {
  auto e2 = make_model("euclidean:2");
  const auto r = distance(e2, make_vec({0, 0}), make_vec({3, 4}));
  EXPECT_NEAR(r.value, 5.0, 1e-3);
  EXPECT_TRUE(r.converged);
  ASSERT_TRUE(r.witness);
  EXPECT_EQ(r.witness->n_steps, 64);
}

TEST(Distance, HeisenbergExamples) {
  auto h = make_model("heisenberg");
  const auto horizontal = distance(h, Vec::Zero(3), make_vec({1, 0, 0}));
  EXPECT_NEAR(horizontal.value, 1.0, 0.01);
  const double z = 1 / (4 * kPi);
  const auto vertical = distance(h, Vec::Zero(3), make_vec({0, 0, z}));
  EXPECT_NEAR(vertical.value, isoperimetric_oracle(z), 0.02);
  for (double zz : {0.01, 0.05, 0.2})
    EXPECT_NEAR(distance(h, Vec::Zero(3), make_vec({0, 0, zz})).value, isoperimetric_oracle(zz), 0.02 * (1 + zz));
}

TEST(Distance, ZeroWhenEqual) {
  auto g = make_model("grushin");
  EXPECT_NEAR(distance(g, make_vec({0.3, 0.1}), make_vec({0.3, 0.1})).value, 0, 1e-6);
}

TEST(Distance, DomainErrors) {
  auto disc = make_model("disc");
  EXPECT_THROW(distance(disc, make_vec({0, 0}), make_vec({2, 0})), DomainError);
}

TEST(Shoot, EuclideanStraightLine) {
  auto e2 = make_model("euclidean:2");
  const auto shot = shoot_geodesic(e2, make_vec({0, 0}), make_vec({3, 4}));
  EXPECT_NEAR((shot.endpoint - make_vec({3, 4})).norm(), 0, 1e-12);

  DistanceOptions o;
  o.refine = false;
  auto base = distance(e2, make_vec({0, 0}), make_vec({3, 4}), o);
  base.initial_covector = make_vec({3.3, 3.6});  // perturbed seed
  base.value += 0.01;
  const auto refined = shoot_refine(e2, make_vec({0, 0}), make_vec({3, 4}), base);
  EXPECT_TRUE(refined.refine_converged);
  EXPECT_NEAR(refined.value, 5.0, 1e-6);
}

TEST(Shoot, HeisenbergHorizontal) {
  auto h = make_model("heisenberg");
  const auto r = distance(h, Vec::Zero(3), make_vec({1, 0, 0}));
  EXPECT_TRUE(r.refined);
  EXPECT_NEAR(r.value, 1.0, 1e-4);
  EXPECT_LE(r.hamiltonian_drift, kTolH);
}

TEST(Shoot, HamiltonianConservation) {
  auto h = make_model("heisenberg");
  const auto r = distance(h, Vec::Zero(3), make_vec({0.3, 0.2, 0.15}));
  ASSERT_TRUE(r.refine_converged);
  EXPECT_LE(r.hamiltonian_drift, kTolH);
  auto m = make_model("martinet");
  const auto rm = distance(m, make_vec({0.2, 0, 0}), make_vec({0.5, 0.4, 0.02}));
  if (rm.refine_converged) {
    EXPECT_LE(rm.hamiltonian_drift, kTolH);
  }
}

TEST(Distance, SymmetryAndTriangle) {
  CounterRng rng(11, 0);
  const char* models[] = {"euclidean:2", "heisenberg", "grushin", "euclidean:3"};
  DistanceOptions o;
  o.restarts = 4;
  for (std::uint32_t i = 0; i < 20; ++i) {
    auto s = make_model(models[i % 4]);
    const Vec x = random_point(rng, s.dim, 3 * i, 0.6);
    const Vec y = random_point(rng, s.dim, 3 * i + 1, 0.6);
    const Vec z = random_point(rng, s.dim, 3 * i + 2, 0.6);
    const double dxy = distance(s, x, y, o).value;
    const double dyx = distance(s, y, x, o).value;
    const double dyz = distance(s, y, z, o).value;
    const double dxz = distance(s, x, z, o).value;
    EXPECT_LE(std::abs(dxy - dyx), 2 * tol_dist(dxy)) << s.name;
    EXPECT_LE(dxz, dxy + dyz + 3 * tol_dist(dxz)) << s.name;
  }
}

TEST(Sets, DistanceToSetExamples) {
  auto e2 = make_model("euclidean:2");
  EXPECT_NEAR(distance_to_set(e2, make_vec({0, 0}), ball_complement(make_vec({0, 0}), 1)).value, 1, 1e-3);
  auto e1 = make_model("euclidean:1");
  EXPECT_NEAR(distance_to_set(e1, make_vec({0}), half_space(1, 0, 1)).value, 1, 1e-3);
  auto g = make_model("grushin");
  EXPECT_NEAR(distance_to_set(g, make_vec({0, 0}), ball_complement(make_vec({0, 0}), 1)).value,
              grushin_circle_oracle(), 0.02);
  EXPECT_EQ(distance_to_set(e2, make_vec({2, 0}), ball_complement(make_vec({0, 0}), 1)).value, 0.0);
}

TEST(Sets, ProjectToBoundary) {
  const auto a = ball_complement(make_vec({0, 0}), 1);
  const Vec z = project_to_boundary(a, make_vec({0.3, 0.4}));
  EXPECT_NEAR(z.norm(), 1, 1e-9);
  EXPECT_NEAR(z(1) / z(0), 4.0 / 3.0, 1e-6);
}

TEST(Sets, ThroughSetExamples) {
  auto e1 = make_model("euclidean:1");
  auto r = distance_through_set(e1, make_vec({0}), half_space(1, 0, 1), make_vec({0}));
  EXPECT_NEAR(r.value, 2, 0.02);
  auto e2 = make_model("euclidean:2");
  r = distance_through_set(e2, make_vec({0, 0}), half_space(2, 0, 1), make_vec({0.5, 0}));
  EXPECT_NEAR(r.value, 1.5, 0.015);
  ASSERT_TRUE(r.via_point);
  EXPECT_NEAR((*r.via_point - make_vec({1, 0})).norm(), 0, 0.05);
  auto h = make_model("heisenberg");
  r = distance_through_set(h, Vec::Zero(3), half_space(3, 0, 1), Vec::Zero(3));
  // via points (1, b, c): d(0, z) >= z_1 = 1 by the z_1 certificate, equality at (1,0,0)
  EXPECT_NEAR(r.value, 2, 0.04);
}

TEST(Sets, SetInequality) {
  auto e2 = make_model("euclidean:2");
  auto h = make_model("heisenberg");
  const auto r1 = distance_through_set(e2, make_vec({0, 0.3}), ball_complement(make_vec({0, 0}), 1), make_vec({0.2, -0.1}));
  EXPECT_LE(*r1.set_lower_bound, r1.value + 3 * tol_dist(r1.value));
  const auto r2 = distance_through_set(h, make_vec({0.1, 0, 0}), half_space(3, 1, 0.8), make_vec({-0.2, 0.1, 0.05}));
  EXPECT_LE(*r2.set_lower_bound, r2.value + 3 * tol_dist(r2.value));
}

TEST(Infinity, Examples) {
  auto disc = make_model("disc");
  EXPECT_NEAR(distance_to_infinity(disc, make_vec({0, 0}), default_exhaustion(make_vec({0, 0}))).value, 1, 0.02);
  auto e2 = make_model("euclidean:2");
  EXPECT_TRUE(std::isinf(distance_to_infinity(e2, make_vec({0, 0}), default_exhaustion(make_vec({0, 0}))).value));
  auto p = make_model("punctured-plane");
  EXPECT_NEAR(distance_to_infinity(p, make_vec({1, 0}), default_exhaustion(make_vec({1, 0}))).value, 1, 0.02);
}

TEST(Infinity, Hsu) {
  auto e2 = make_model("euclidean:2");
  EXPECT_TRUE(hsu_condition(e2, make_vec({0, 0}), make_vec({3, 1})).in_S);
  auto slab = make_model("slab:1");
  auto h = hsu_condition(slab, make_vec({0, 0}), make_vec({5, 0}));
  EXPECT_NEAR(h.d, 5, 0.05);
  EXPECT_NEAR(h.dx_inf, 1, 0.02);
  EXPECT_NEAR(h.dy_inf, 1, 0.02);
  EXPECT_FALSE(h.in_S);
  auto p = make_model("punctured-plane");
  h = hsu_condition(p, make_vec({1, 0}), make_vec({-1, 0}));
  EXPECT_NEAR(h.d, 2, 0.02);
  EXPECT_TRUE(h.in_S);
}

TEST(Dual, Examples) {
  auto e2 = make_model("euclidean:2");
  DualCertificate c;
  c.w_minus = [](const Vec& z) { return z(0); };
  c.grid = box_grid(make_vec({-1, -1}), make_vec({4, 1}), 9);
  EXPECT_NEAR(dual_certificate_check(e2, c, make_vec({0, 0}), make_vec({3, 0})), 3, 1e-9);
  EXPECT_TRUE(c.admissible);

  auto h = make_model("heisenberg");
  DualCertificate ch;
  ch.w_minus = [](const Vec& z) { return z(0); };
  ch.grid = box_grid(make_vec({-1, -1, -1}), make_vec({2, 1, 1}), 7);
  const double bound = dual_certificate_check(h, ch, Vec::Zero(3), make_vec({1, 0, 0}));
  EXPECT_NEAR(bound, 1, 1e-9);
  EXPECT_NEAR(ch.max_gradient_norm2, 1, 1e-6);

  DualCertificate bad;
  bad.w_minus = [](const Vec& z) { return 2 * z(0); };
  bad.grid = c.grid;
  EXPECT_EQ(dual_certificate_check(e2, bad, make_vec({0, 0}), make_vec({3, 0})), 0.0);
  EXPECT_FALSE(bad.admissible);
}

TEST(Dual, SetCertificate) {
  auto e2 = make_model("euclidean:2");
  DualCertificate c;
  c.w_minus = [](const Vec& z) { return std::max(0.0, 1 - z.norm()); };
  c.grid = box_grid(make_vec({-1.5, -1.5}), make_vec({1.5, 1.5}), 10);
  for (int k = 0; k < 16; ++k) c.set_samples.push_back(make_vec({std::cos(k * 0.4), std::sin(k * 0.4)}) * (1 + 0.1 * (k % 3)));
  EXPECT_NEAR(dual_certificate_check_set(e2, c, make_vec({0.2, 0})), 0.8, 1e-9);
  EXPECT_TRUE(c.admissible);
}

TEST(Dual, Sandwich) {
  auto h = make_model("heisenberg");
  DualCertificate c;
  c.w_minus = [](const Vec& z) { return 0.6 * z(0) + 0.8 * z(1); };
  c.grid = box_grid(make_vec({-1, -1, -1}), make_vec({1, 1, 1}), 7);
  CounterRng rng(17, 0);
  for (std::uint32_t i = 0; i < 6; ++i) {
    const Vec x = random_point(rng, 3, 2 * i, 0.5), y = random_point(rng, 3, 2 * i + 1, 0.5);
    auto r = distance(h, x, y);
    r.set_dual_bound(dual_certificate_check(h, c, x, y));
    ASSERT_TRUE(c.admissible);
    EXPECT_LE(*r.dual_bound, r.value + tol_gap(r.value));
  }
}

TEST(MinEnergyOutside, ReflectedPath) {
  auto e2 = make_model("euclidean:2");
  const Vec lo = make_vec({-0.5, -0.5}), hi = make_vec({1.5, 0.5});
  const double delta = 1e-3;
  const auto r = min_energy_outside(e2, make_vec({0, 0}), make_vec({1, 0}), open_box(lo, hi), delta);
  const double oracle = reflected_path_energy(make_vec({0, 0}), make_vec({1, 0}), lo, hi, delta);
  EXPECT_NEAR(r.energy, oracle, 0.02 * oracle);
  EXPECT_NEAR(r.energy - 1.0, 1.0, 0.05);
}

TEST(MinEnergyOutside, LargeBall) {
  auto e2 = make_model("euclidean:2");
  const auto r = min_energy_outside(e2, make_vec({0, 0}), make_vec({1, 0}), open_ball(make_vec({0, 0}), 10), 1e-3);
  EXPECT_GE(r.energy, 361 * (1 - 0.01));
}

TEST(MinEnergyOutside, InactiveConstraint) {
  auto e2 = make_model("euclidean:2");
  // the segment already leaves U, so the cheapest leaving path is the segment
  const OpenRegion u{[](const Vec& z) { return std::abs(z(1) - 0.3) - 0.2; }};
  const auto r = min_energy_outside(e2, make_vec({0, 0.3}), make_vec({1, 0.3}), u, 1e-3);
  EXPECT_GT(r.energy, 1.0);
  EXPECT_THROW(min_energy_outside(e2, make_vec({0, 0}), make_vec({1, 0}), u, 1e-3), ArgumentError);
}

TEST(Volume, Examples) {
  auto e2 = make_model("euclidean:2");
  VolumeOptions o;
  const auto v2 = ball_volume(e2, make_vec({0, 0}), 0.5, o);
  EXPECT_NEAR(v2.volume, kPi * 0.25, 3 * v2.stderr);
  auto e1 = make_model("euclidean:1");
  const auto v1 = ball_volume(e1, make_vec({0}), 1.0, o);
  EXPECT_NEAR(v1.volume, 2.0, 3 * v1.stderr + 1e-9);
}

TEST(Volume, HeisenbergUnitBall) {
  auto h = make_model("heisenberg");
  VolumeOptions o;
  o.n_samples = 1500;
  const auto v = ball_volume(h, Vec::Zero(3), 0.5, o);
  EXPECT_NEAR(v.volume, heisenberg_unit_ball_volume() * std::pow(0.5, 4), 3 * v.stderr);
}

TEST(Volume, DimensionAndDoubling) {
  VolumeOptions o;
  o.n_samples = 800;
  const std::vector<double> grid = {0.4, 0.3, 0.2, 0.1};
  EXPECT_NEAR(dimension_estimate(make_model("euclidean:2"), make_vec({0, 0}), grid, o).slope, 2, 0.15);
  EXPECT_NEAR(dimension_estimate(make_model("heisenberg"), Vec::Zero(3), grid, o).slope, 4, 0.3);
  EXPECT_NEAR(dimension_estimate(make_model("grushin"), make_vec({0, 0}), grid, o).slope, 3, 0.3);
  EXPECT_NEAR(doubling_ratio(make_model("euclidean:2"), make_vec({0, 0}), 0.2, o), 4, 0.6);
  EXPECT_NEAR(doubling_ratio(make_model("grushin"), make_vec({1, 0}), 0.1, o), 4, 1.0);
  EXPECT_NEAR(doubling_ratio(make_model("heisenberg"), Vec::Zero(3), 0.4, o), 16, 4.0);
}

TEST(Volume, Errors) {
  auto e2 = make_model("euclidean:2");
  EXPECT_THROW(ball_volume(e2, make_vec({0, 0}), -1), ArgumentError);
  EXPECT_THROW(ball_volume(make_model("disc"), make_vec({0, 0}), 1.5), DomainError);
  EXPECT_THROW(dimension_estimate(e2, make_vec({0, 0}), {0.4, 0.3, 0.2}), ArgumentError);
  EXPECT_THROW(dimension_estimate(e2, make_vec({0, 0}), {0.1, 0.2, 0.3, 0.4}), ArgumentError);
}

TEST(Volume, MatchesHomogeneousDimensionAcrossCatalog) {
  VolumeOptions o;
  o.n_samples = 500;
  const std::vector<double> grid = {0.4, 0.3, 0.2, 0.1};
  for (const auto& name : catalog_names()) {
    auto s = make_model(name);
    const Vec x = name == "punctured-plane" ? make_vec({1, 0}) : Vec(Vec::Zero(s.dim));
    const double expected = homogeneous_dimension(s, x).N;
    EXPECT_NEAR(dimension_estimate(s, x, grid, o).slope, expected, 0.4) << name;
  }
}

TEST(ChartExponent, Examples) {
  const std::vector<double> hs = {0.04, 0.02, 0.01, 0.005};
  EXPECT_NEAR(chart_exponent(make_model("euclidean:2"), make_vec({0, 0}), make_vec({0.6, 0.8}), hs), 1, 0.05);
  auto h = make_model("heisenberg");
  EXPECT_NEAR(chart_exponent(h, Vec::Zero(3), make_vec({0, 0, 1}), hs), 0.5, 0.05);
  EXPECT_NEAR(chart_exponent(h, Vec::Zero(3), make_vec({1, 0, 0}), hs), 1, 0.05);
}
