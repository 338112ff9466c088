#ifndef TIDALFEM_QUADRATURE_HPP
#define TIDALFEM_QUADRATURE_HPP

#include <cmath>
#include <vector>

#include "tidalfem/errors.hpp"

namespace tidalfem {

struct QuadraturePoint {
  double x, y, w;
};

// Rule on the reference triangle (0,0)-(1,0)-(0,1); weights sum to 1/2.
struct QuadratureRule {
  int degree = 0;
  std::vector<QuadraturePoint> points;
};

struct GaussPoint {
  double t, w;
};

// Gauss-Legendre on [0,1]; n = 5 is exact through degree 9 and is the rule
// used for all edge moments.
inline std::vector<GaussPoint> gauss_legendre_unit(int n) {
  if (n != 5) throw ValidationError("only the 5-point edge rule is tabulated");
  const double a1 = 0.5384693101056831, a2 = 0.9061798459386640;
  const double w0 = 0.5688888888888889, w1 = 0.4786286704993665, w2 = 0.2369268850561891;
  std::vector<GaussPoint> pts = {
      {0.5 * (1.0 - a2), 0.5 * w2}, {0.5 * (1.0 - a1), 0.5 * w1}, {0.5, 0.5 * w0},
      {0.5 * (1.0 + a1), 0.5 * w1}, {0.5 * (1.0 + a2), 0.5 * w2}};
  return pts;
}

namespace detail {

// Barycentric orbit (1-2b, b, b) and its two cyclic permutations.
inline void push_orbit3(std::vector<QuadraturePoint>& pts, double b, double w) {
  double a = 1.0 - 2.0 * b;
  pts.push_back({b, b, w});      // (a, b, b): x = lambda1, y = lambda2
  pts.push_back({a, b, w});
  pts.push_back({b, a, w});
}

// Barycentric orbit (1-a-b, a, b): all six permutations.
inline void push_orbit6(std::vector<QuadraturePoint>& pts, double a, double b, double w) {
  double c = 1.0 - a - b;
  pts.push_back({a, b, w});
  pts.push_back({b, a, w});
  pts.push_back({a, c, w});
  pts.push_back({c, a, w});
  pts.push_back({b, c, w});
  pts.push_back({c, b, w});
}

}  // namespace detail

// Symmetric positive-weight rules exact for polynomials of the requested
// total degree.  Tabulated through degree 8 (the degree-3 slot uses the
// 6-point degree-4 rule; the classical 4-point rule has a negative weight).
inline QuadratureRule triangle_quadrature(int degree) {
  if (degree < 0) throw ValidationError("quadrature degree must be >= 0");
  if (degree > 8) throw ValidationError("triangle quadrature tabulated up to degree 8");
  QuadratureRule rule;
  rule.degree = degree;
  auto& pts = rule.points;
  if (degree <= 1) {
    pts.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0});
  } else if (degree == 2) {
    pts.push_back({1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0});
    pts.push_back({2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0});
    pts.push_back({1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0});
  } else if (degree <= 4) {
    detail::push_orbit3(pts, 0.445948490915965, 0.223381589678011);
    detail::push_orbit3(pts, 0.091576213509771, 0.109951743655322);
  } else if (degree == 5) {
    const double s15 = std::sqrt(15.0);
    pts.push_back({1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
    detail::push_orbit3(pts, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
    detail::push_orbit3(pts, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
  } else if (degree == 6) {
    detail::push_orbit3(pts, 0.063089014491502, 0.050844906370207);
    detail::push_orbit3(pts, 0.249286745170910, 0.116786275726379);
    detail::push_orbit6(pts, 0.053145049844817, 0.310352451033784, 0.082851075618374);
  } else {  // degree 7 or 8: collapsed 5x5 Gauss, exact through total degree 8
    for (const auto& gx : gauss_legendre_unit(5))
      for (const auto& gy : gauss_legendre_unit(5))
        pts.push_back({gx.t, gy.t * (1.0 - gx.t), 2.0 * gx.w * gy.w * (1.0 - gx.t)});
  }
  for (auto& p : pts) p.w *= 0.5;
  return rule;
}

}  // namespace tidalfem

#endif
