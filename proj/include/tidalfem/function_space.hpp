#ifndef TIDALFEM_FUNCTION_SPACE_HPP
#define TIDALFEM_FUNCTION_SPACE_HPP

#include <functional>
#include <vector>

#include "tidalfem/mesh.hpp"
#include "tidalfem/reference_elements.hpp"
#include "tidalfem/solvers.hpp"

namespace tidalfem {

using ScalarField = std::function<double(const Vec3&)>;
using VectorField = std::function<Vec3(const Vec3&)>;

// Geometry map data at one reference point of one cell.  The Jacobian is
// dim x 2 (planar maps keep the third row zero) and g = sqrt(det(J^T J)).
// `normal` is the unit cell normal: +z in the plane, outward on the sphere.
struct GeomEval {
  Vec3 x;
  double J[3][2];
  double g = 0.0;
  Vec3 normal;
};

namespace geom {

inline void p2_shape(double x, double y, double N[6], double dNdx[6], double dNdy[6]) {
  double l0 = 1.0 - x - y, l1 = x, l2 = y;
  N[0] = l0 * (2 * l0 - 1);
  N[1] = l1 * (2 * l1 - 1);
  N[2] = l2 * (2 * l2 - 1);
  N[3] = 4 * l1 * l2;  // mid-edge of local edge 0 = (v1, v2)
  N[4] = 4 * l2 * l0;  // local edge 1 = (v2, v0)
  N[5] = 4 * l0 * l1;  // local edge 2 = (v0, v1)
  dNdx[0] = 1 - 4 * l0; dNdy[0] = 1 - 4 * l0;
  dNdx[1] = 4 * l1 - 1; dNdy[1] = 0;
  dNdx[2] = 0;          dNdy[2] = 4 * l2 - 1;
  dNdx[3] = 4 * l2;     dNdy[3] = 4 * l1;
  dNdx[4] = -4 * l2;    dNdy[4] = 4 * (l0 - l2);
  dNdx[5] = 4 * (l0 - l1); dNdy[5] = -4 * l1;
}

}  // namespace geom

inline GeomEval cell_geometry(const Mesh& mesh, int cell, double x, double y) {
  GeomEval ge;
  const auto& nodes = mesh.geometry_nodes[cell];
  if (mesh.geometry_degree == 1) {
    Vec3 d1 = nodes[1] - nodes[0], d2 = nodes[2] - nodes[0];
    ge.x = nodes[0] + x * d1 + y * d2;
    ge.J[0][0] = d1.x; ge.J[0][1] = d2.x;
    ge.J[1][0] = d1.y; ge.J[1][1] = d2.y;
    ge.J[2][0] = d1.z; ge.J[2][1] = d2.z;
  } else {
    double N[6], dNdx[6], dNdy[6];
    geom::p2_shape(x, y, N, dNdx, dNdy);
    ge.x = {0, 0, 0};
    for (int r = 0; r < 3; ++r) ge.J[r][0] = ge.J[r][1] = 0.0;
    for (int k = 0; k < 6; ++k) {
      ge.x += N[k] * nodes[k];
      ge.J[0][0] += dNdx[k] * nodes[k].x; ge.J[0][1] += dNdy[k] * nodes[k].x;
      ge.J[1][0] += dNdx[k] * nodes[k].y; ge.J[1][1] += dNdy[k] * nodes[k].y;
      ge.J[2][0] += dNdx[k] * nodes[k].z; ge.J[2][1] += dNdy[k] * nodes[k].z;
    }
  }
  Vec3 c0{ge.J[0][0], ge.J[1][0], ge.J[2][0]};
  Vec3 c1{ge.J[0][1], ge.J[1][1], ge.J[2][1]};
  Vec3 n = cross(c0, c1);
  ge.g = norm(n);
  if (ge.g <= 1e-14) throw GeometryError("degenerate geometry map");
  ge.normal = (1.0 / ge.g) * n;
  return ge;
}

// Contravariant Piola push-forward: values J*vhat/g, divergences dhat/g.
inline Vec3 piola_push_forward(const GeomEval& ge, double vx, double vy) {
  return {(ge.J[0][0] * vx + ge.J[0][1] * vy) / ge.g,
          (ge.J[1][0] * vx + ge.J[1][1] * vy) / ge.g,
          (ge.J[2][0] * vx + ge.J[2][1] * vy) / ge.g};
}
inline double piola_push_div(const GeomEval& ge, double dhat) { return dhat / ge.g; }

// Tangential pull-back g * (J^T J)^{-1} J^T u, the inverse Piola map.  For
// surface meshes this also projects u onto the cell tangent plane.
inline void piola_pull_back(const GeomEval& ge, const Vec3& u, double& vx, double& vy) {
  double jtu0 = ge.J[0][0] * u.x + ge.J[1][0] * u.y + ge.J[2][0] * u.z;
  double jtu1 = ge.J[0][1] * u.x + ge.J[1][1] * u.y + ge.J[2][1] * u.z;
  double g00 = 0, g01 = 0, g11 = 0;
  for (int r = 0; r < 3; ++r) {
    g00 += ge.J[r][0] * ge.J[r][0];
    g01 += ge.J[r][0] * ge.J[r][1];
    g11 += ge.J[r][1] * ge.J[r][1];
  }
  double det = g00 * g11 - g01 * g01;
  vx = ge.g * (g11 * jtu0 - g01 * jtu1) / det;
  vy = ge.g * (-g01 * jtu0 + g00 * jtu1) / det;
}

// Discrete space over a mesh: Raviart-Thomas (order 1 or 2) or discontinuous
// scalars (degree 0 or 1).  Edge dofs come first, interleaved per edge, then
// interior dofs; dof signs absorb the canonical edge orientation.  On meshes
// with a boundary the RT normal dofs of boundary edges are flagged and later
// eliminated from all assembled operators (coefficients pinned to zero).
struct FunctionSpace {
  const Mesh* mesh = nullptr;
  ReferenceBasis basis{};
  int global_dim = 0;
  int dofs_per_cell = 0;
  std::vector<int> dofmap;       // cell-major, dofs_per_cell entries per cell
  std::vector<double> dofsigns;  // matching dofmap
  std::vector<char> boundary_dof;
  std::vector<int> boundary_dofs;

  Family family() const { return basis.family; }
  int order() const { return basis.order; }
  int cell_dof(int cell, int l) const { return dofmap[cell * dofs_per_cell + l]; }
  double cell_sign(int cell, int l) const { return dofsigns[cell * dofs_per_cell + l]; }
};

inline FunctionSpace build_space(const Mesh& mesh, Family family, int order) {
  FunctionSpace sp;
  sp.mesh = &mesh;
  if (family == Family::RaviartThomas) {
    if (order == 2 && mesh.dim == 3 && mesh.geometry_degree < 2)
      throw ValidationError("order-2 RT on the sphere requires degree-2 geometry");
    sp.basis = reference_rt_basis(order);
    sp.dofs_per_cell = sp.basis.num_dofs;
    const int n_int = sp.basis.num_interior_dofs;
    sp.global_dim = order * mesh.num_edges() + n_int * mesh.num_cells();
    sp.dofmap.resize(static_cast<size_t>(mesh.num_cells()) * sp.dofs_per_cell);
    sp.dofsigns.assign(sp.dofmap.size(), 1.0);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      for (int l = 0; l < 3; ++l) {
        int e = mesh.cell_edges[c][l];
        int sgn = mesh.cell_edge_signs[c][l];
        for (int m = 0; m < order; ++m) {
          sp.dofmap[c * sp.dofs_per_cell + order * l + m] = order * e + m;
          // Odd edge moments flip twice (normal and parameter), even ones once.
          sp.dofsigns[c * sp.dofs_per_cell + order * l + m] = (m % 2 == 0) ? sgn : 1.0;
        }
      }
      for (int k = 0; k < n_int; ++k)
        sp.dofmap[c * sp.dofs_per_cell + 3 * order + k] = order * mesh.num_edges() + n_int * c + k;
    }
    sp.boundary_dof.assign(sp.global_dim, 0);
    for (int e : mesh.boundary_edges)
      for (int m = 0; m < order; ++m) {
        sp.boundary_dof[order * e + m] = 1;
        sp.boundary_dofs.push_back(order * e + m);
      }
  } else {
    sp.basis = reference_dg_basis(order);
    sp.dofs_per_cell = sp.basis.num_dofs;
    sp.global_dim = sp.dofs_per_cell * mesh.num_cells();
    sp.dofmap.resize(static_cast<size_t>(mesh.num_cells()) * sp.dofs_per_cell);
    sp.dofsigns.assign(sp.dofmap.size(), 1.0);
    for (int c = 0; c < mesh.num_cells(); ++c)
      for (int k = 0; k < sp.dofs_per_cell; ++k)
        sp.dofmap[c * sp.dofs_per_cell + k] = c * sp.dofs_per_cell + k;
    sp.boundary_dof.assign(sp.global_dim, 0);
  }
  return sp;
}

struct Field {
  const FunctionSpace* space = nullptr;
  std::vector<double> coeffs;

  explicit Field(const FunctionSpace& sp) : space(&sp), coeffs(sp.global_dim, 0.0) {}
  Field() = default;
};

// Physical value of an RT field at a reference point of a cell.
inline Vec3 evaluate_vector_field(const Field& f, int cell, double x, double y) {
  const FunctionSpace& sp = *f.space;
  double vx[8], vy[8], dv[8];
  sp.basis.eval_rt(x, y, vx, vy, dv);
  GeomEval ge = cell_geometry(*sp.mesh, cell, x, y);
  double ax = 0, ay = 0;
  for (int l = 0; l < sp.dofs_per_cell; ++l) {
    double c = f.coeffs[sp.cell_dof(cell, l)] * sp.cell_sign(cell, l);
    ax += c * vx[l];
    ay += c * vy[l];
  }
  return piola_push_forward(ge, ax, ay);
}

// Divergence of an RT field at a reference point of a cell.
inline double evaluate_divergence(const Field& f, int cell, double x, double y) {
  const FunctionSpace& sp = *f.space;
  double vx[8], vy[8], dv[8];
  sp.basis.eval_rt(x, y, vx, vy, dv);
  GeomEval ge = cell_geometry(*sp.mesh, cell, x, y);
  double ad = 0;
  for (int l = 0; l < sp.dofs_per_cell; ++l)
    ad += f.coeffs[sp.cell_dof(cell, l)] * sp.cell_sign(cell, l) * dv[l];
  return piola_push_div(ge, ad);
}

// Value of a DG field at a reference point of a cell (maps by composition).
inline double evaluate_scalar_field(const Field& f, int cell, double x, double y) {
  const FunctionSpace& sp = *f.space;
  double v[3];
  sp.basis.eval_dg(x, y, v);
  double a = 0;
  for (int l = 0; l < sp.dofs_per_cell; ++l) a += f.coeffs[sp.cell_dof(cell, l)] * v[l];
  return a;
}

// Canonical interpolation onto an RT space: edge and interior moments of the
// Piola pull-back, which on the sphere tangent-projects u cell by cell.  Each
// edge is interpolated from its first incident cell so shared dofs are
// assigned once; boundary dofs are forced to zero.
inline Field interpolate_hdiv(const FunctionSpace& sp, const VectorField& u) {
  if (sp.family() != Family::RaviartThomas)
    throw ValidationError("interpolate_hdiv needs an RT space");
  const Mesh& mesh = *sp.mesh;
  Field f(sp);
  std::vector<char> edge_done(mesh.num_edges(), 0);
  double dofs[8];
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto pull = [&](double x, double y, double& fx, double& fy) {
      GeomEval ge = cell_geometry(mesh, c, x, y);
      piola_pull_back(ge, u(ge.x), fx, fy);
    };
    sp.basis.rt_dofs(pull, dofs);
    for (int l = 0; l < 3; ++l) {
      int e = mesh.cell_edges[c][l];
      if (edge_done[e]) continue;
      edge_done[e] = 1;
      for (int m = 0; m < sp.order(); ++m) {
        int loc = sp.order() * l + m;
        f.coeffs[sp.cell_dof(c, loc)] = sp.cell_sign(c, loc) * dofs[loc];
      }
    }
    for (int k = 0; k < sp.basis.num_interior_dofs; ++k) {
      int loc = 3 * sp.order() + k;
      f.coeffs[sp.cell_dof(c, loc)] = dofs[loc];
    }
  }
  for (int d : sp.boundary_dofs) f.coeffs[d] = 0.0;
  return f;
}

// Cellwise L2 projection onto a DG space.
inline Field project_l2(const FunctionSpace& sp, const ScalarField& s) {
  if (sp.family() != Family::Discontinuous)
    throw ValidationError("project_l2 needs a DG space");
  const Mesh& mesh = *sp.mesh;
  Field f(sp);
  int qdeg = 2 * sp.order() + 2 + (mesh.geometry_degree == 2 ? 2 : 0);
  auto rule = triangle_quadrature(qdeg);
  const int nd = sp.dofs_per_cell;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double a[3][3] = {}, rhs[3] = {}, v[3];
    for (const auto& q : rule.points) {
      GeomEval ge = cell_geometry(mesh, c, q.x, q.y);
      sp.basis.eval_dg(q.x, q.y, v);
      double w = q.w * ge.g, sval = s(ge.x);
      for (int i = 0; i < nd; ++i) {
        rhs[i] += w * sval * v[i];
        for (int j = 0; j < nd; ++j) a[i][j] += w * v[i] * v[j];
      }
    }
    if (nd == 1) {
      f.coeffs[sp.cell_dof(c, 0)] = rhs[0] / a[0][0];
    } else {
      refelem::invert_small<3>(a);
      for (int i = 0; i < nd; ++i) {
        double x = 0;
        for (int j = 0; j < nd; ++j) x += a[i][j] * rhs[j];
        f.coeffs[sp.cell_dof(c, i)] = x;
      }
    }
  }
  return f;
}

}  // namespace tidalfem

#endif
