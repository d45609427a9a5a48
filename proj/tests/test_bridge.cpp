#include "hypolab/bridge.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hypolab;

namespace {

BridgeOptions bridge_opts(std::size_t n, std::uint64_t seed = 0xC0FFEE) {
  BridgeOptions o;
  o.n_target = n;
  o.seed = seed;
  return o;
}

struct Sample {
  double mean = 0, var = 0;
  std::size_t n = 0;
};

Sample coordinate_at(const BridgeEnsemble& e, std::size_t k, int coord) {
  Sample s;
  s.n = e.size();
  for (const auto& p : e.accepted) s.mean += p[k](coord);
  s.mean /= static_cast<double>(s.n);
  for (const auto& p : e.accepted) s.var += std::pow(p[k](coord) - s.mean, 2);
  s.var /= static_cast<double>(s.n - 1);
  return s;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST(BridgeOracles, FrozenValues) {
  EXPECT_NEAR(oracle::disc_bridge_tube(0.05, 0.3), 0.829028, 1e-5);
  EXPECT_NEAR(oracle::disc_bridge_tube(0.1, 0.3), 0.331796, 1e-5);
  EXPECT_NEAR(oracle::bridge_stays_in_strip(0.05, 0.3), 1 - 2 * std::exp(-3.6) + 2 * std::exp(-14.4), 1e-9);
}

TEST(Bridge, EuclideanMidpointLaw) {
  auto e1 = make_model("euclidean:1");
  const auto ens = sample_bridge_rejection(e1, 0.5, make_vec({0}), make_vec({0}), bridge_opts(2000));
  ASSERT_EQ(ens.size(), 2000u);
  const std::size_t mid = static_cast<size_t>(ens.n_steps / 2);
  const auto m = coordinate_at(ens, mid, 0);
  EXPECT_NEAR(m.mean, 0, 3 * std::sqrt(m.var / m.n));
  EXPECT_NEAR(m.var, 0.5 / 4, 0.1 * 0.5 / 4);
  EXPECT_GT(ens.acceptance_rate, 0.05);
  for (double w : ens.weights) EXPECT_EQ(w, 1.0);

  // against exactly simulated bridge midpoints N(0, t/4)
  std::mt19937_64 gen(7);
  std::normal_distribution<double> mid_law(0, std::sqrt(0.5 / 4));
  std::vector<double> exact(20000), sampled;
  for (auto& v : exact) v = mid_law(gen);
  for (const auto& p : ens.accepted) sampled.push_back(p[mid](0));
  EXPECT_LE(ks_distance(sampled, exact), 0.05);
}

TEST(Bridge, EndpointContractAndRescaling) {
  auto h = make_model("heisenberg");
  const Vec y = make_vec({1, 0, 0});
  const auto ens = sample_bridge_tilted(h, 0.2, Vec::Zero(3), y, bridge_opts(300));
  EXPECT_NEAR(ens.terminal_tol, 0.3 * std::sqrt(0.2), 1e-12);
  for (const auto& p : ens.accepted) {
    ASSERT_EQ(p.size(), static_cast<size_t>(ens.n_steps) + 1);
    EXPECT_EQ(p.front(), Vec::Zero(3));
    EXPECT_LT((p.back() - y).norm(), ens.terminal_tol);
  }
  // the unit-time path at s = k/n is the simulated state at k t / n
  const auto& first = ens.accepted.front();
  SimulateOptions so;
  so.tilt = Tilt(distance(h, Vec::Zero(3), y).witness.value());
  const auto raw = simulate(h, Vec::Zero(3), 0.2, ens.n_steps, ens.seed, ens.path_ids.front(), so);
  for (std::size_t k = 0; k < first.size(); k += 25) {
    EXPECT_NEAR(raw.times[k] / 0.2, static_cast<double>(k) / ens.n_steps, 1e-12);
    EXPECT_LT((raw.states[k] - first[k]).norm(), 1e-6);
  }
}

TEST(Bridge, EuclideanCovariance) {
  auto e2 = make_model("euclidean:2");
  for (double t : {0.5, 0.2}) {
    const auto ens = sample_bridge_tilted(e2, t, make_vec({0, 0}), make_vec({1, 0}), bridge_opts(2000));
    for (double s : {0.25, 0.5, 0.75}) {
      const auto k = static_cast<std::size_t>(std::lround(s * ens.n_steps));
      const auto m = marginal_moments(ens, k);
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(m.covariance(c, c), s * (1 - s) * t, 0.1 * s * (1 - s) * t);
    }
  }
}

TEST(Bridge, MarginalMomentsMatchPlainSampleMoments) {
  auto e1 = make_model("euclidean:1");
  const auto ens = sample_bridge_rejection(e1, 0.5, make_vec({0}), make_vec({0}), bridge_opts(500));
  const auto k = static_cast<std::size_t>(ens.n_steps / 3);
  const auto plain = coordinate_at(ens, k, 0);
  const auto m = marginal_moments(ens, k);
  EXPECT_NEAR(m.mean(0), plain.mean, 1e-12);
  EXPECT_NEAR(m.covariance(0, 0), plain.var, 1e-12);
  EXPECT_NEAR(m.effective_size, 500, 1e-9);

  // doubling every weight changes nothing
  auto scaled = ens;
  for (auto& w : scaled.weights) w *= 2;
  EXPECT_NEAR(marginal_moments(scaled, k).covariance(0, 0), plain.var, 1e-12);
  EXPECT_THROW(marginal_moments(ens, 100000), ArgumentError);
}

TEST(Bridge, TiltedAgreesWithRejection) {
  auto e1 = make_model("euclidean:1");
  const Vec x = make_vec({0}), y = make_vec({0.5});
  const auto plain = sample_bridge_rejection(e1, 0.5, x, y, bridge_opts(2000, 1));
  const auto tilted = sample_bridge_tilted(e1, 0.5, x, y, bridge_opts(2000, 2));
  EXPECT_GE(tilted.acceptance_rate, plain.acceptance_rate);
  const auto mid = static_cast<std::size_t>(plain.n_steps / 2);
  const auto a = coordinate_at(plain, mid, 0), b = coordinate_at(tilted, mid, 0);
  EXPECT_NEAR(a.mean, b.mean, 3 * std::sqrt(a.var / a.n + b.var / b.n));

  // x = y: no tilt, same paths on the same seed
  const auto same_a = sample_bridge_rejection(e1, 0.3, x, x, bridge_opts(200, 5));
  const auto same_b = sample_bridge_tilted(e1, 0.3, x, x, bridge_opts(200, 5));
  EXPECT_FALSE(same_b.tilted);
  ASSERT_EQ(same_a.path_ids, same_b.path_ids);
  for (std::size_t i = 0; i < same_a.size(); ++i) EXPECT_EQ(same_a.accepted[i].back(), same_b.accepted[i].back());
}

TEST(Bridge, TiltRaisesAcceptanceAndRejectionReportsInfeasible) {
  auto e2 = make_model("euclidean:2");
  const Vec x = make_vec({0, 0}), y = make_vec({2, 0});
  auto o = bridge_opts(100);
  const double plain = bridge_pilot_rate(e2, 0.2, x, y, o);
  const double tilted = bridge_pilot_rate(e2, 0.2, x, y, o, Tilt(distance(e2, x, y).witness.value()));
  EXPECT_GE(tilted, plain);
  EXPECT_GT(tilted, 0.01);
  EXPECT_THROW(sample_bridge_rejection(e2, 0.2, x, y, o), InfeasibleError);
}

TEST(Bridge, EuclideanTubeConcentration) {
  auto e2 = make_model("euclidean:2");
  const Vec x = make_vec({0, 0}), y = make_vec({1, 0});
  double prev = 0, prev_se = 0;
  for (double t : {0.5, 0.2, 0.1, 0.05}) {
    const auto ens = sample_bridge_tilted(e2, t, x, y, bridge_opts(2000));
    const auto gamma = geodesic_on_grid(e2, x, y, ens.n_steps);
    const auto diag = concentration_diagnostic(ens, gamma, 0.3);
    EXPECT_GE(diag.fraction_inside + 2 * std::hypot(diag.stderr, prev_se), prev) << t;
    prev = diag.fraction_inside;
    prev_se = diag.stderr;
    // the terminal ball loosens the pinning slightly, so allow a little below the exact bridge
    EXPECT_NEAR(diag.fraction_inside, oracle::disc_bridge_tube(t, 0.3), 3 * diag.stderr + 0.03) << t;
    ASSERT_EQ(diag.sup_deviation_quantiles.size(), 3u);
    EXPECT_LE(diag.sup_deviation_quantiles[0], diag.sup_deviation_quantiles[2]);
    EXPECT_DOUBLE_EQ(concentration_diagnostic(ens, gamma, 1e6).fraction_inside, 1.0);
  }
}

TEST(Bridge, DiagnosticErrors) {
  BridgeEnsemble empty;
  EXPECT_THROW(concentration_diagnostic(empty, {}, 0.3), ArgumentError);
  auto e1 = make_model("euclidean:1");
  const auto ens = sample_bridge_rejection(e1, 0.3, make_vec({0}), make_vec({0}), bridge_opts(50));
  EXPECT_THROW(concentration_diagnostic(ens, UnitPath(3, make_vec({0})), 0.3), ArgumentError);
  EXPECT_THROW(sample_bridge_rejection(e1, -1, make_vec({0}), make_vec({0})), ArgumentError);
}

TEST(Bridge, StrongMinimality) {
  auto e2 = make_model("euclidean:2");
  const Vec x = make_vec({0, 0}), y = make_vec({1, 0});
  // leaving the box costs the reflected path through (0.5, +-0.5): energy 2
  const auto box = open_box(make_vec({-0.5, -0.5}), make_vec({1.5, 0.5}));
  const auto r = strong_minimality_report(e2, x, y, box, 1e-3);
  EXPECT_TRUE(r.is_strong);
  EXPECT_NEAR(r.margin, 1.0, 0.05);

  const auto huge = strong_minimality_report(e2, x, y, open_ball(x, 10), 0.01);
  EXPECT_TRUE(huge.is_strong);
  EXPECT_GT(huge.margin, 50);

  // U misses the segment's middle: the minimiser itself leaves U
  OpenRegion pierced{[](const Vec& z) {
    const double hole = 0.05 - (z - make_vec({0.5, 0})).norm();
    return std::max(box_outside_depth(make_vec({-0.5, -0.5}), make_vec({1.5, 0.5}), z), hole);
  }};
  const auto weak = strong_minimality_report(e2, x, y, pierced, 0.0);
  EXPECT_FALSE(weak.is_strong);
  EXPECT_LE(weak.margin, tol_gap(1.0));
}
