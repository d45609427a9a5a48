#pragma once

#include "hypolab/error.hpp"
#include "hypolab/linalg.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hypolab {

/// Central-difference step for fields without an analytic jacobian.
inline constexpr double kJacobianStep = 1e-5;
/// Bracket spans: singular values below this fraction of the largest are zero.
inline constexpr double kRankTolerance = 1e-8;
inline constexpr int kDefaultMaxDepth = 6;

using PointFn = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(const Vec&)>;
using MatrixFn = std::function<Mat(const Vec&)>;

template <class F>
Mat central_jacobian(const F& f, const Vec& x, double h = kJacobianStep) {
  const int d = static_cast<int>(x.size());
  Vec probe = x;
  Mat jac;
  for (int k = 0; k < d; ++k) {
    probe(k) = x(k) + h;
    const Vec fp = f(probe);
    probe(k) = x(k) - h;
    const Vec fm = f(probe);
    probe(k) = x(k);
    if (k == 0) jac.resize(fp.size(), d);
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

// Fourth-order stencil used for derived (bracket) fields, whose values
// already carry rounding from one level of differentiation.
template <class F>
Mat central_jacobian4(const F& f, const Vec& x, double h = 1e-3) {
  const int d = static_cast<int>(x.size());
  Vec probe = x;
  Mat jac;
  for (int k = 0; k < d; ++k) {
    auto at = [&](double s) {
      probe(k) = x(k) + s;
      Vec v = f(probe);
      probe(k) = x(k);
      return v;
    };
    const Vec f2p = at(2 * h), f1p = at(h), f1m = at(-h), f2m = at(-2 * h);
    if (k == 0) jac.resize(f1p.size(), d);
    jac.col(k) = (f2m - 8.0 * f1m + 8.0 * f1p - f2p) / (12.0 * h);
  }
  return jac;
}

template <class F>
Vec central_gradient(const F& f, const Vec& x, double h = kJacobianStep) {
  Vec g(x.size());
  Vec probe = x;
  for (int k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + h;
    const double fp = f(probe);
    probe(k) = x(k) - h;
    const double fm = f(probe);
    probe(k) = x(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// A smooth vector field on a chart of R^d.
struct VectorField {
  int dim = 0;
  PointFn eval;
  MatrixFn jacobian;   // optional; central differences otherwise
  ScalarFn divergence; // optional Lebesgue divergence; trace of the jacobian otherwise
  bool divergence_free = false;
  bool derived = false;  // produced by bracketing

  Vec operator()(const Vec& x) const { return eval(x); }

  Mat jacobian_at(const Vec& x) const {
    if (jacobian) return jacobian(x);
    return derived ? central_jacobian4(eval, x) : central_jacobian(eval, x);
  }

  double divergence_at(const Vec& x) const {
    if (divergence_free) return 0.0;
    if (divergence) return divergence(x);
    return jacobian_at(x).trace();
  }
};

/// Constant field.
inline VectorField constant_field(const Vec& v) {
  VectorField f;
  f.dim = static_cast<int>(v.size());
  f.eval = [v](const Vec&) { return v; };
  f.jacobian = [d = f.dim](const Vec&) { return Mat(Mat::Zero(d, d)); };
  f.divergence_free = true;
  return f;
}

/// Sub-Riemannian structure (M, a, beta, nu) in one chart: M is the open set
/// where `domain` holds.
struct SubRiemannianStructure {
  std::string name;
  int dim = 0;
  std::vector<VectorField> fields;
  PointFn beta;                     // empty: beta = 0
  ScalarFn nu_log_density;          // empty: Lebesgue
  PointFn nu_log_density_gradient;  // optional
  std::function<bool(const Vec&)> domain;  // empty: whole chart
  ScalarFn boundary_gap;                   // Euclidean distance to the chart-domain complement

  int num_fields() const { return static_cast<int>(fields.size()); }
  bool has_boundary() const { return static_cast<bool>(boundary_gap) || static_cast<bool>(domain); }
  bool is_lebesgue() const { return !nu_log_density; }
  bool has_beta() const { return static_cast<bool>(beta); }

  bool contains(const Vec& x) const {
    if (x.size() != dim || !x.allFinite()) return false;
    if (domain && !domain(x)) return false;
    if (boundary_gap && !(boundary_gap(x) > 0.0)) return false;
    return true;
  }

  double gap(const Vec& x) const { return boundary_gap ? boundary_gap(x) : kInf; }

  /// d x m matrix whose columns are X_1(x), ..., X_m(x).
  Mat frame(const Vec& x) const {
    Mat g(dim, num_fields());
    for (int l = 0; l < num_fields(); ++l) g.col(l) = fields[static_cast<size_t>(l)](x);
    return g;
  }

  Vec beta_at(const Vec& x) const { return beta ? beta(x) : Vec(Vec::Zero(dim)); }

  double nu_density(const Vec& x) const { return nu_log_density ? std::exp(nu_log_density(x)) : 1.0; }

  Vec nu_log_gradient(const Vec& x) const {
    if (!nu_log_density) return Vec::Zero(dim);
    if (nu_log_density_gradient) return nu_log_density_gradient(x);
    return central_gradient(nu_log_density, x);
  }
};

inline void require_in_domain(const SubRiemannianStructure& s, const Vec& x, const char* what) {
  if (!s.contains(x)) throw DomainError(std::string(what) + ": point outside the domain of " + s.name);
}

/// Checks the structural invariants; throws ArgumentError.
inline void validate(const SubRiemannianStructure& s) {
  if (s.dim < 1 || s.dim > kMaxDim) throw ArgumentError("structure dimension must be in [1, 8]");
  if (s.fields.empty()) throw ArgumentError("structure needs at least one field");
  for (const auto& f : s.fields) {
    if (f.dim != s.dim || !f.eval) throw ArgumentError("field dimension does not match structure");
  }
}

// ---------------------------------------------------------------------------
// Pointwise geometry

/// a(x) = sum_l X_l(x) X_l(x)^T.
inline Mat cometric(const SubRiemannianStructure& s, const Vec& x) {
  require_in_domain(s, x, "cometric");
  const Mat g = s.frame(x);
  return g * g.transpose();
}

/// a(p, q) at x for covectors p, q.
inline double cometric_pair(const SubRiemannianStructure& s, const Vec& x, const Vec& p, const Vec& q) {
  double acc = 0;
  for (const auto& f : s.fields) {
    const Vec v = f(x);
    acc += p.dot(v) * q.dot(v);
  }
  return acc;
}

/// [X, Y] = DY X - DX Y as a field.
inline VectorField bracket_field(const VectorField& x_field, const VectorField& y_field) {
  VectorField b;
  b.dim = x_field.dim;
  b.derived = true;
  b.eval = [x_field, y_field](const Vec& p) -> Vec {
    return y_field.jacobian_at(p) * x_field(p) - x_field.jacobian_at(p) * y_field(p);
  };
  return b;
}

inline Vec lie_bracket(const SubRiemannianStructure& s, int i, int j, const Vec& x) {
  require_in_domain(s, x, "lie_bracket");
  if (i < 0 || j < 0 || i >= s.num_fields() || j >= s.num_fields())
    throw ArgumentError("lie_bracket: field index out of range");
  const auto& xi = s.fields[static_cast<size_t>(i)];
  const auto& xj = s.fields[static_cast<size_t>(j)];
  return xj.jacobian_at(x) * xi(x) - xi.jacobian_at(x) * xj(x);
}

namespace detail {

inline int numerical_rank(const std::vector<Vec>& vectors, int dim, double tol) {
  if (vectors.empty()) return 0;
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(vectors.size()));
  for (size_t k = 0; k < vectors.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = vectors[k];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol * sv(0)) ++rank;
  return rank;
}

}  // namespace detail

struct HomogeneousDimension {
  int N = 0;
  std::vector<int> growth;  // N_1, ..., N_k
};

/// Bracket-adapted linear frame at a point: basis columns drawn greedily from
/// brackets by increasing length, with their lengths as weights.
struct AdaptedFrame {
  Mat basis;
  std::vector<int> weights;
  HomogeneousDimension dimension;
};

inline AdaptedFrame adapted_frame(const SubRiemannianStructure& s, const Vec& x,
                                  int max_depth = kDefaultMaxDepth, double tol = kRankTolerance) {
  require_in_domain(s, x, "homogeneous_dimension");
  if (max_depth < 1) throw ArgumentError("max_depth must be >= 1");
  const int d = s.dim;
  AdaptedFrame out;
  out.basis.resize(d, 0);
  std::vector<Vec> span;         // every bracket value so far
  std::vector<Vec> chosen;       // greedy basis
  std::vector<VectorField> level = s.fields;
  int rank = 0;
  for (int depth = 1; depth <= max_depth; ++depth) {
    if (depth > 1) {
      std::vector<VectorField> next;
      next.reserve(s.fields.size() * level.size());
      for (const auto& xi : s.fields)
        for (const auto& z : level) next.push_back(bracket_field(xi, z));
      level = std::move(next);
    }
    for (const auto& f : level) {
      const Vec v = f(x);
      span.push_back(v);
      chosen.push_back(v);
      if (detail::numerical_rank(chosen, d, tol) > static_cast<int>(out.weights.size())) {
        out.weights.push_back(depth);
      } else {
        chosen.pop_back();
      }
    }
    const int new_rank = detail::numerical_rank(span, d, tol);
    out.dimension.growth.push_back(new_rank - rank);
    out.dimension.N += depth * (new_rank - rank);
    rank = new_rank;
    if (rank == d) {
      out.basis.resize(d, d);
      for (int k = 0; k < d; ++k) out.basis.col(k) = chosen[static_cast<size_t>(k)];
      return out;
    }
  }
  throw NotBracketGenerating("not bracket-generating at depth " + std::to_string(max_depth) + " for " + s.name);
}

inline HomogeneousDimension homogeneous_dimension(const SubRiemannianStructure& s, const Vec& x,
                                                  int max_depth = kDefaultMaxDepth) {
  return adapted_frame(s, x, max_depth).dimension;
}

// ---------------------------------------------------------------------------
// Drift

/// Hormander-form drift: L = 1/2 sum X_l^2 + X_0 with X_0 = sum c_l X_l.
struct DriftDecomposition {
  std::function<Vec(const Vec&)> coefficients;
  std::function<Vec(const Vec&)> drift_vector;
  bool vanishes = false;
};

inline DriftDecomposition hormander_drift(const SubRiemannianStructure& s) {
  DriftDecomposition out;
  bool zero = s.is_lebesgue() && !s.has_beta();
  for (const auto& f : s.fields) zero = zero && f.divergence_free;
  out.vanishes = zero;
  const int m = s.num_fields();
  const int d = s.dim;
  if (zero) {
    out.coefficients = [m](const Vec&) { return Vec(Vec::Zero(m)); };
    out.drift_vector = [d](const Vec&) { return Vec(Vec::Zero(d)); };
    return out;
  }
  // c_l = 1/2 div_nu X_l + beta(X_l), div_nu X = div X + <grad log nu, X>.
  auto coeff = [s](const Vec& x) {
    const Vec grad_log_nu = s.nu_log_gradient(x);
    const Vec b = s.beta_at(x);
    Vec c(s.num_fields());
    for (int l = 0; l < s.num_fields(); ++l) {
      const auto& f = s.fields[static_cast<size_t>(l)];
      const Vec v = f(x);
      c(l) = 0.5 * (f.divergence_at(x) + grad_log_nu.dot(v)) + b.dot(v);
    }
    return c;
  };
  out.coefficients = coeff;
  out.drift_vector = [s, coeff](const Vec& x) {
    const Vec c = coeff(x);
    Vec v = Vec::Zero(s.dim);
    for (int l = 0; l < s.num_fields(); ++l) v += c(l) * s.fields[static_cast<size_t>(l)](x);
    return v;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Sector bound and time augmentation

/// Largest a(beta, beta) over a regular grid of the box [lo, hi] intersected
/// with the domain. Grid includes the box corners.
inline double sector_bound(const SubRiemannianStructure& s, const Vec& lo, const Vec& hi, int n_samples) {
  if (n_samples < 1) throw ArgumentError("sector_bound: empty sample set");
  if (!s.has_beta()) return 0.0;
  const int d = s.dim;
  int per_axis = std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(n_samples), 1.0 / d))));
  if (n_samples == 1) per_axis = 1;
  long total = 1;
  for (int k = 0; k < d; ++k) total *= per_axis;
  double best = 0.0;
  bool any = false;
  for (long idx = 0; idx < total; ++idx) {
    Vec x(d);
    long rem = idx;
    for (int k = 0; k < d; ++k) {
      const int i = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      x(k) = per_axis == 1 ? 0.5 * (lo(k) + hi(k)) : lo(k) + (hi(k) - lo(k)) * i / (per_axis - 1);
    }
    if (!s.contains(x)) continue;
    any = true;
    const Vec b = s.beta_at(x);
    best = std::max(best, cometric_pair(s, x, b, b));
  }
  if (!any) throw ArgumentError("sector_bound: sample box does not meet the domain");
  return best;
}

/// Lift to M x R with the extra field d/dtau; beta(d/dtau) = 0, nu x Lebesgue.
inline SubRiemannianStructure augment_with_time(const SubRiemannianStructure& s) {
  SubRiemannianStructure out;
  const int d = s.dim;
  if (d + 1 > kMaxDim) throw ArgumentError("augment_with_time: dimension limit reached");
  out.name = s.name + "+time";
  out.dim = d + 1;
  auto head = [d](const Vec& x) { return Vec(x.head(d)); };
  for (const auto& f : s.fields) {
    VectorField g;
    g.dim = d + 1;
    g.divergence_free = f.divergence_free;
    g.derived = f.derived;
    g.eval = [f, head, d](const Vec& x) {
      Vec v = Vec::Zero(d + 1);
      v.head(d) = f(head(x));
      return v;
    };
    g.jacobian = [f, head, d](const Vec& x) {
      Mat j = Mat::Zero(d + 1, d + 1);
      j.topLeftCorner(d, d) = f.jacobian_at(head(x));
      return j;
    };
    if (!f.divergence_free) g.divergence = [f, head](const Vec& x) { return f.divergence_at(head(x)); };
    out.fields.push_back(std::move(g));
  }
  out.fields.push_back(constant_field(unit_vec(d + 1, d)));
  if (s.beta) {
    out.beta = [b = s.beta, head, d](const Vec& x) {
      Vec v = Vec::Zero(d + 1);
      v.head(d) = b(head(x));
      return v;
    };
  }
  if (s.nu_log_density) {
    out.nu_log_density = [n = s.nu_log_density, head](const Vec& x) { return n(head(x)); };
    out.nu_log_density_gradient = [s, head, d](const Vec& x) {
      Vec v = Vec::Zero(d + 1);
      v.head(d) = s.nu_log_gradient(head(x));
      return v;
    };
  }
  if (s.domain) out.domain = [dom = s.domain, head](const Vec& x) { return dom(head(x)); };
  if (s.boundary_gap) out.boundary_gap = [g = s.boundary_gap, head](const Vec& x) { return g(head(x)); };
  return out;
}

// ---------------------------------------------------------------------------
// Polynomial fields (user models)

/// Sum of monomials c * prod_i x_i^{e_i}.
struct Polynomial {
  struct Term {
    double coefficient = 0;
    std::vector<int> exponents;
  };
  std::vector<Term> terms;

  double operator()(const Vec& x) const {
    double acc = 0;
    for (const auto& t : terms) {
      double v = t.coefficient;
      for (size_t i = 0; i < t.exponents.size(); ++i)
        if (t.exponents[i] != 0) v *= std::pow(x(static_cast<Eigen::Index>(i)), t.exponents[i]);
      acc += v;
    }
    return acc;
  }

  double partial(const Vec& x, int k) const {
    double acc = 0;
    for (const auto& t : terms) {
      const int ek = t.exponents[static_cast<size_t>(k)];
      if (ek == 0) continue;
      double v = t.coefficient * ek;
      for (size_t i = 0; i < t.exponents.size(); ++i) {
        const int e = static_cast<int>(i) == k ? ek - 1 : t.exponents[i];
        if (e != 0) v *= std::pow(x(static_cast<Eigen::Index>(i)), e);
      }
      acc += v;
    }
    return acc;
  }
};

/// Field with polynomial components and analytic jacobian.
inline VectorField polynomial_field(std::vector<Polynomial> components) {
  VectorField f;
  f.dim = static_cast<int>(components.size());
  auto shared = std::make_shared<const std::vector<Polynomial>>(std::move(components));
  for (const auto& p : *shared)
    for (const auto& t : p.terms)
      if (static_cast<int>(t.exponents.size()) != f.dim)
        throw ArgumentError("polynomial term exponent count must equal the dimension");
  f.eval = [shared](const Vec& x) {
    Vec v(static_cast<int>(shared->size()));
    for (size_t i = 0; i < shared->size(); ++i) v(static_cast<Eigen::Index>(i)) = (*shared)[i](x);
    return v;
  };
  f.jacobian = [shared](const Vec& x) {
    const int d = static_cast<int>(shared->size());
    Mat j(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) j(i, k) = (*shared)[static_cast<size_t>(i)].partial(x, k);
    return j;
  };
  return f;
}

// ---------------------------------------------------------------------------
// Catalog

namespace detail {

inline VectorField linear_field(int d, std::function<Vec(const Vec&)> eval, std::function<Mat(const Vec&)> jac) {
  VectorField f;
  f.dim = d;
  f.eval = std::move(eval);
  f.jacobian = std::move(jac);
  f.divergence_free = true;
  return f;
}

inline SubRiemannianStructure euclidean(int d) {
  if (d < 1 || d > kMaxDim - 1) throw ArgumentError("euclidean dimension must be in [1, 7]");
  SubRiemannianStructure s;
  s.name = "euclidean:" + std::to_string(d);
  s.dim = d;
  for (int k = 0; k < d; ++k) s.fields.push_back(constant_field(unit_vec(d, k)));
  return s;
}

inline SubRiemannianStructure heisenberg() {
  SubRiemannianStructure s;
  s.name = "heisenberg";
  s.dim = 3;
  s.fields.push_back(linear_field(
      3, [](const Vec& x) { return make_vec({1.0, 0.0, -0.5 * x(1)}); },
      [](const Vec&) {
        Mat j = Mat::Zero(3, 3);
        j(2, 1) = -0.5;
        return j;
      }));
  s.fields.push_back(linear_field(
      3, [](const Vec& x) { return make_vec({0.0, 1.0, 0.5 * x(0)}); },
      [](const Vec&) {
        Mat j = Mat::Zero(3, 3);
        j(2, 0) = 0.5;
        return j;
      }));
  return s;
}

inline SubRiemannianStructure grushin() {
  SubRiemannianStructure s;
  s.name = "grushin";
  s.dim = 2;
  s.fields.push_back(constant_field(make_vec({1.0, 0.0})));
  s.fields.push_back(linear_field(
      2, [](const Vec& x) { return make_vec({0.0, x(0)}); },
      [](const Vec&) {
        Mat j = Mat::Zero(2, 2);
        j(1, 0) = 1.0;
        return j;
      }));
  return s;
}

inline SubRiemannianStructure martinet() {
  SubRiemannianStructure s;
  s.name = "martinet";
  s.dim = 3;
  s.fields.push_back(constant_field(make_vec({1.0, 0.0, 0.0})));
  s.fields.push_back(linear_field(
      3, [](const Vec& x) { return make_vec({0.0, 1.0, x(0) * x(0)}); },
      [](const Vec& x) {
        Mat j = Mat::Zero(3, 3);
        j(2, 0) = 2.0 * x(0);
        return j;
      }));
  return s;
}

inline double parse_suffix(const std::string& name, const std::string& prefix) {
  const std::string rest = name.substr(prefix.size());
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(rest, &used);
  } catch (const std::exception&) {
    throw ArgumentError("bad model parameter in '" + name + "'");
  }
  if (used != rest.size()) throw ArgumentError("bad model parameter in '" + name + "'");
  return v;
}

}  // namespace detail

/// Catalog lookup: "euclidean:<d>", "heisenberg", "grushin", "martinet",
/// "punctured-plane", "slab:<h>", "disc" / "disc:<R>".
inline SubRiemannianStructure make_model(const std::string& name) {
  if (name.rfind("euclidean:", 0) == 0) {
    const double d = detail::parse_suffix(name, "euclidean:");
    if (d != std::floor(d)) throw ArgumentError("euclidean dimension must be an integer");
    return detail::euclidean(static_cast<int>(d));
  }
  if (name == "heisenberg") return detail::heisenberg();
  if (name == "grushin") return detail::grushin();
  if (name == "martinet") return detail::martinet();
  if (name == "punctured-plane") {
    auto s = detail::euclidean(2);
    s.name = name;
    s.boundary_gap = [](const Vec& x) { return x.norm(); };
    return s;
  }
  if (name.rfind("slab:", 0) == 0) {
    const double h = detail::parse_suffix(name, "slab:");
    if (!(h > 0)) throw ArgumentError("slab half-width must be positive");
    auto s = detail::euclidean(2);
    s.name = name;
    s.boundary_gap = [h](const Vec& x) { return h - std::abs(x(1)); };
    return s;
  }
  if (name == "disc" || name.rfind("disc:", 0) == 0) {
    const double radius = name == "disc" ? 1.0 : detail::parse_suffix(name, "disc:");
    if (!(radius > 0)) throw ArgumentError("disc radius must be positive");
    auto s = detail::euclidean(2);
    s.name = name;
    s.boundary_gap = [radius](const Vec& x) { return radius - x.norm(); };
    return s;
  }
  throw ArgumentError("unknown model '" + name + "'");
}

inline std::vector<std::string> catalog_names() {
  return {"euclidean:1", "euclidean:2", "euclidean:3", "heisenberg", "grushin",
          "martinet",    "punctured-plane", "slab:1", "disc"};
}

}  // namespace hypolab
