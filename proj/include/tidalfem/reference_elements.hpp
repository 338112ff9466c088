#ifndef TIDALFEM_REFERENCE_ELEMENTS_HPP
#define TIDALFEM_REFERENCE_ELEMENTS_HPP

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "tidalfem/errors.hpp"
#include "tidalfem/quadrature.hpp"

namespace tidalfem {

enum class Family { RaviartThomas, Discontinuous };

namespace refelem {

// Reference triangle vertices.
inline constexpr double kVerts[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};

// Local edge l runs from vertex (l+1)%3 to (l+2)%3; outward unit normals and
// lengths for the counterclockwise reference triangle.
inline constexpr double kEdgeNormals[3][2] = {
    {0.7071067811865475, 0.7071067811865475}, {-1.0, 0.0}, {0.0, -1.0}};
inline const double kEdgeLengths[3] = {std::sqrt(2.0), 1.0, 1.0};

inline void edge_point(int l, double t, double& x, double& y) {
  int a = (l + 1) % 3, b = (l + 2) % 3;
  x = (1.0 - t) * kVerts[a][0] + t * kVerts[b][0];
  y = (1.0 - t) * kVerts[a][1] + t * kVerts[b][1];
}

}  // namespace refelem

// Vector monomial basis spanning RT spaces on the reference triangle:
//   order 1 (3 dofs): (1,0),(0,1),(x,y)
//   order 2 (8 dofs): (P1)^2 plus x*(x,y) and y*(x,y)
// Nodal bases are expressed in these monomials.
namespace refelem {

inline int rt_monomial_count(int order) { return order == 1 ? 3 : 8; }

inline void rt_monomials(int order, double x, double y, double vx[], double vy[], double dv[]) {
  if (order == 1) {
    vx[0] = 1; vy[0] = 0; dv[0] = 0;
    vx[1] = 0; vy[1] = 1; dv[1] = 0;
    vx[2] = x; vy[2] = y; dv[2] = 2;
  } else {
    vx[0] = 1; vy[0] = 0; dv[0] = 0;
    vx[1] = x; vy[1] = 0; dv[1] = 1;
    vx[2] = y; vy[2] = 0; dv[2] = 0;
    vx[3] = 0; vy[3] = 1; dv[3] = 0;
    vx[4] = 0; vy[4] = x; dv[4] = 0;
    vx[5] = 0; vy[5] = y; dv[5] = 1;
    vx[6] = x * x; vy[6] = x * y; dv[6] = 3 * x;
    vx[7] = x * y; vy[7] = y * y; dv[7] = 3 * y;
  }
}

// In-place Gauss-Jordan inverse for the small dof matrices built here.
template <int N>
inline void invert_small(double a[N][N]) {
  double inv[N][N] = {};
  for (int i = 0; i < N; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < N; ++col) {
    int piv = col;
    for (int r = col + 1; r < N; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12) throw ValidationError("singular reference dof matrix");
    for (int c = 0; c < N; ++c) {
      std::swap(a[col][c], a[piv][c]);
      std::swap(inv[col][c], inv[piv][c]);
    }
    double d = a[col][col];
    for (int c = 0; c < N; ++c) {
      a[col][c] /= d;
      inv[col][c] /= d;
    }
    for (int r = 0; r < N; ++r) {
      if (r == col) continue;
      double f = a[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < N; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) a[i][j] = inv[i][j];
}

}  // namespace refelem

// Nodal basis on the reference triangle.  For Raviart-Thomas the degrees of
// freedom are, per edge, moments of the outward normal component against
// Legendre polynomials 1 and 2t-1 in the local edge parameter (order 1 keeps
// just the mean flux), followed by interior moments against the constant
// vectors e1, e2 for order 2.  Local dof index = order*edge + moment, then
// interior dofs.  DG order here is the polynomial degree (0 or 1); the DG1
// basis is barycentric.
struct ReferenceBasis {
  Family family;
  int order = 1;       // RT: 1 or 2; DG: degree 0 or 1
  int num_dofs = 0;
  int num_edge_dofs = 0;      // RT only, per cell
  int num_interior_dofs = 0;  // RT only

  // RT nodal coefficients over the vector monomials.
  std::vector<std::array<double, 8>> coeff;

  static ReferenceBasis raviart_thomas(int order) {
    if (order != 1 && order != 2) throw ValidationError("RT order must be 1 or 2");
    ReferenceBasis b;
    b.family = Family::RaviartThomas;
    b.order = order;
    b.num_edge_dofs = 3 * order;
    b.num_interior_dofs = order == 1 ? 0 : 2;
    b.num_dofs = b.num_edge_dofs + b.num_interior_dofs;
    b.build_rt_coefficients();
    return b;
  }

  static ReferenceBasis discontinuous(int degree) {
    if (degree != 0 && degree != 1) throw ValidationError("DG degree must be 0 or 1");
    ReferenceBasis b;
    b.family = Family::Discontinuous;
    b.order = degree;
    b.num_dofs = degree == 0 ? 1 : 3;
    return b;
  }

  // Evaluate all RT basis fields and their divergences at a reference point.
  void eval_rt(double x, double y, double vx[], double vy[], double dv[]) const {
    const int nm = refelem::rt_monomial_count(order);
    double mx[8], my[8], md[8];
    refelem::rt_monomials(order, x, y, mx, my, md);
    for (int i = 0; i < num_dofs; ++i) {
      double sx = 0, sy = 0, sd = 0;
      for (int j = 0; j < nm; ++j) {
        sx += coeff[i][j] * mx[j];
        sy += coeff[i][j] * my[j];
        sd += coeff[i][j] * md[j];
      }
      vx[i] = sx;
      vy[i] = sy;
      dv[i] = sd;
    }
  }

  // Evaluate all DG basis functions at a reference point.
  void eval_dg(double x, double y, double v[]) const {
    if (order == 0) {
      v[0] = 1.0;
    } else {
      v[0] = 1.0 - x - y;
      v[1] = x;
      v[2] = y;
    }
  }

  // Apply the RT dof functionals to a reference vector field given as a
  // callable (x, y) -> (vx, vy).  Used for basis construction, unisolvence
  // checks, and interpolation.
  template <typename F>
  void rt_dofs(F&& field, double out[]) const {
    auto gauss = gauss_legendre_unit(5);
    for (int l = 0; l < 3; ++l) {
      for (int m = 0; m < order; ++m) out[order * l + m] = 0.0;
      for (const auto& gp : gauss) {
        double x, y;
        refelem::edge_point(l, gp.t, x, y);
        double fx, fy;
        field(x, y, fx, fy);
        double fn = fx * refelem::kEdgeNormals[l][0] + fy * refelem::kEdgeNormals[l][1];
        double ds = gp.w * refelem::kEdgeLengths[l];
        out[order * l + 0] += fn * ds;
        if (order == 2) out[order * l + 1] += fn * (2.0 * gp.t - 1.0) * ds;
      }
    }
    if (num_interior_dofs > 0) {
      auto rule = triangle_quadrature(4);
      double ix = 0, iy = 0;
      for (const auto& q : rule.points) {
        double fx, fy;
        field(q.x, q.y, fx, fy);
        ix += q.w * fx;
        iy += q.w * fy;
      }
      out[num_edge_dofs + 0] = ix;
      out[num_edge_dofs + 1] = iy;
    }
  }

 private:
  void build_rt_coefficients() {
    const int n = num_dofs;
    coeff.assign(n, {});
    auto fill = [&](auto mat) {
      // matrix D[i][j] = dof_i(monomial_j); nodal coeffs are rows of D^-1
      // transposed so that dof_i(basis_k) = delta_ik.
      const int nm = refelem::rt_monomial_count(order);
      for (int j = 0; j < nm; ++j) {
        double dofs[8];
        rt_dofs(
            [&](double x, double y, double& fx, double& fy) {
              double mx[8], my[8], md[8];
              refelem::rt_monomials(order, x, y, mx, my, md);
              fx = mx[j];
              fy = my[j];
            },
            dofs);
        for (int i = 0; i < n; ++i) mat[i][j] = dofs[i];
      }
    };
    if (order == 1) {
      double mat[3][3];
      fill(mat);
      refelem::invert_small<3>(mat);
      for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) coeff[k][j] = mat[j][k];
    } else {
      double mat[8][8];
      fill(mat);
      refelem::invert_small<8>(mat);
      for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j) coeff[k][j] = mat[j][k];
    }
  }
};

inline ReferenceBasis reference_rt_basis(int order) { return ReferenceBasis::raviart_thomas(order); }
inline ReferenceBasis reference_dg_basis(int degree) { return ReferenceBasis::discontinuous(degree); }

}  // namespace tidalfem

#endif
