#include "hypolab/parallel.hpp"
#include "hypolab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace hypolab;

// Known-answer vectors published with Random123.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, PureFunctionOfAddress) {
  CounterRng a(0xC0FFEE, 17), b(0xC0FFEE, 17), c(0xC0FFEE, 18);
  EXPECT_EQ(a.normal2(5, 0), b.normal2(5, 0));
  EXPECT_NE(a.normal2(5, 0), c.normal2(5, 0));
  EXPECT_NE(a.normal2(5, 0), a.normal2(6, 0));
  EXPECT_NE(a.normal2(5, 0), a.normal2(5, 1));
}

TEST(CounterRng, UniformsInOpenInterval) {
  CounterRng r(1, 2);
  for (std::uint32_t k = 0; k < 20000; ++k) {
    const auto u = r.uniform2(k, 0);
    EXPECT_GT(u[0], 0.0);
    EXPECT_LT(u[0], 1.0);
    EXPECT_GT(u[1], 0.0);
    EXPECT_LT(u[1], 1.0);
  }
}

TEST(CounterRng, NormalMoments) {
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0, cross = 0;
  for (int k = 0; k < n; ++k) {
    CounterRng r(99, static_cast<std::uint64_t>(k));
    const auto z = r.normal2(0, 0);
    s1 += z[0];
    s2 += z[0] * z[0];
    s4 += z[0] * z[0] * z[0] * z[0];
    cross += z[0] * z[1];
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
  EXPECT_NEAR(cross / n, 0.0, 4.0 / std::sqrt(n));
}

TEST(CounterRng, DerivedSeedsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(derive_seed(0xC0FFEE, tag));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Parallel, MapIndependentOfWorkers) {
  auto f = [](std::size_t i) {
    CounterRng r(7, i);
    return r.normal2(3, 0)[0];
  };
  const auto a = parallel_map<double>(1000, 1, f);
  const auto b = parallel_map<double>(1000, 4, f);
  EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
