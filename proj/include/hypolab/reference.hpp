#pragma once
// Closed forms and quadratures the acceptance battery compares against.
// Deliberately free of any dependency on the estimators.

#include <cmath>
#include <numbers>

namespace hypolab::reference {

inline constexpr double kPi = std::numbers::pi;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Heat kernel of (1/2) Laplacian on R^dim between points at distance dist.
inline double gaussian_kernel(int dim, double t, double dist) {
  return std::exp(-dist * dist / (2 * t)) / std::pow(2 * kPi * t, dim / 2.0);
}

/// P(Brownian motion reaches level a by time t).
inline double reflection_hit(double t, double a) { return 2 * (1 - normal_cdf(a / std::sqrt(t))); }

/// Heisenberg heat kernel from the origin for X1 = d_x - y/2 d_z,
/// X2 = d_y + x/2 d_z and generator (X1^2 + X2^2)/2; Simpson on [0, 80].
inline double heisenberg_kernel(double t, double x, double y, double z) {
  const double rho2 = x * x + y * y;
  auto f = [&](double tau) {
    if (tau == 0) return std::exp(-rho2 / (2 * t));
    return std::cos(2 * tau * z / t) * (tau / std::sinh(tau)) * std::exp(-rho2 * tau / std::tanh(tau) / (2 * t));
  };
  const int n = 200000;
  const double hi = 80, h = hi / n;
  double s = f(0) + f(hi);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4 : 2) * f(k * h);
  return s * h / 3 / (kPi * kPi * t * t);
}

/// Heisenberg distance from the origin to (0, 0, z): the shortest closed
/// horizontal loop enclosing area |z| is a circle, length sqrt(4 pi |z|).
inline double heisenberg_vertical_distance(double z) { return std::sqrt(4 * kPi * std::abs(z)); }

/// Planar Brownian bridge 0 -> 0 of duration t: P(sup |b| < a).
inline double disc_bridge_tube(double t, double a) {
  double s = 0;
  for (int n = 1; n <= 400; ++n) {
    double j = (n - 0.25) * kPi;
    for (int it = 0; it < 50; ++it) {
      const double step = std::cyl_bessel_j(0.0, j) / -std::cyl_bessel_j(1.0, j);
      j -= step;
      if (std::abs(step) < 1e-14) break;
    }
    const double j1 = std::cyl_bessel_j(1.0, j);
    const double term = 2 * t / (a * a * j1 * j1) * std::exp(-j * j * t / (2 * a * a));
    s += term;
    if (n > 5 && term < 1e-16) break;
  }
  return s;
}

}  // namespace hypolab::reference
