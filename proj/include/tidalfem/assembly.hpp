#ifndef TIDALFEM_ASSEMBLY_HPP
#define TIDALFEM_ASSEMBLY_HPP

#include <functional>
#include <vector>

#include "tidalfem/function_space.hpp"
#include "tidalfem/sparse.hpp"

namespace tidalfem {

// Scalar coefficient evaluated at physical quadrature points.
using CoefficientField = std::function<double(const Vec3&)>;

// Time-dependent forcing data.  A forcing functional is the sum of a
// pointwise vector term (F, v) and a divergence-form term gain*(eta_bar,
// div v); either part may be absent.
struct ForcingSpec {
  std::function<Vec3(const Vec3&, double)> pointwise;       // may be empty
  std::function<double(const Vec3&, double)> potential;     // eta_bar, may be empty
  double gain = 0.0;

  static ForcingSpec zero() { return {}; }
  static ForcingSpec make_pointwise(std::function<Vec3(const Vec3&, double)> f) {
    ForcingSpec s;
    s.pointwise = std::move(f);
    return s;
  }
  static ForcingSpec divergence_form(std::function<double(const Vec3&, double)> eta_bar,
                                     double gain) {
    ForcingSpec s;
    s.potential = std::move(eta_bar);
    s.gain = gain;
    return s;
  }
};

namespace detail {

inline int assembly_quad_degree(const FunctionSpace& sp) {
  int order = sp.family() == Family::RaviartThomas ? sp.order() : sp.order() + 1;
  return 2 * order + (sp.mesh->geometry_degree == 2 ? 4 : 2);
}

struct RtTab {
  QuadratureRule rule;
  // per point, per dof: reference values and divergence
  std::vector<std::array<double, 8>> vx, vy, dv;
};

inline RtTab tabulate_rt(const FunctionSpace& sp, int qdeg) {
  RtTab tab;
  tab.rule = triangle_quadrature(qdeg);
  size_t np = tab.rule.points.size();
  tab.vx.resize(np);
  tab.vy.resize(np);
  tab.dv.resize(np);
  for (size_t q = 0; q < np; ++q)
    sp.basis.eval_rt(tab.rule.points[q].x, tab.rule.points[q].y, tab.vx[q].data(),
                     tab.vy[q].data(), tab.dv[q].data());
  return tab;
}

}  // namespace detail

// Velocity mass matrix weighted by kappa: M[i,j] = int kappa phi_i . phi_j.
// Rows and columns of eliminated boundary dofs are left structurally empty.
inline SparseMatrix assemble_weighted_mass_v(const FunctionSpace& sp, const CoefficientField& kappa,
                                             bool allow_zero_weight = false) {
  if (sp.family() != Family::RaviartThomas)
    throw ValidationError("assemble_weighted_mass_v needs an RT space");
  const Mesh& mesh = *sp.mesh;
  auto tab = detail::tabulate_rt(sp, detail::assembly_quad_degree(sp));
  const int nd = sp.dofs_per_cell;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * nd * nd);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lm[8][8] = {};
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      double k = kappa(ge.x);
      if (k < 0.0 || (!allow_zero_weight && k == 0.0))
        throw ValidationError("mass weight must be positive");
      Vec3 p[8];
      for (int i = 0; i < nd; ++i) p[i] = piola_push_forward(ge, tab.vx[q][i], tab.vy[q][i]);
      double w = qp.w * ge.g * k;
      for (int i = 0; i < nd; ++i)
        for (int j = i; j < nd; ++j) {
          double v = w * dot(p[i], p[j]);
          lm[i][j] += v;
          if (j != i) lm[j][i] += v;
        }
    }
    for (int i = 0; i < nd; ++i) {
      int gi = sp.cell_dof(c, i);
      if (sp.boundary_dof[gi]) continue;
      for (int j = 0; j < nd; ++j) {
        int gj = sp.cell_dof(c, j);
        if (sp.boundary_dof[gj]) continue;
        trip.push_back({gi, gj, sp.cell_sign(c, i) * sp.cell_sign(c, j) * lm[i][j]});
      }
    }
  }
  return SparseMatrix::from_triplets(sp.global_dim, sp.global_dim, std::move(trip));
}

// Coriolis rotation matrix: R[i,j] = int kappa perp(phi_j) . phi_i, with
// perp the 90-degree counterclockwise rotation in the plane and n x u on the
// sphere (n the outward cell normal).  Assembled exactly skew-symmetric.
inline SparseMatrix assemble_perp(const FunctionSpace& sp, const CoefficientField& kappa) {
  if (sp.family() != Family::RaviartThomas)
    throw ValidationError("assemble_perp needs an RT space");
  const Mesh& mesh = *sp.mesh;
  auto tab = detail::tabulate_rt(sp, detail::assembly_quad_degree(sp));
  const int nd = sp.dofs_per_cell;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * nd * nd);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lm[8][8] = {};
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      Vec3 p[8], pp[8];
      for (int i = 0; i < nd; ++i) {
        p[i] = piola_push_forward(ge, tab.vx[q][i], tab.vy[q][i]);
        pp[i] = mesh.dim == 2 ? Vec3{-p[i].y, p[i].x, 0.0} : cross(ge.normal, p[i]);
      }
      double w = qp.w * ge.g * kappa(ge.x);
      // accumulate only i < j and mirror so the matrix is skew to the bit
      for (int i = 0; i < nd; ++i)
        for (int j = i + 1; j < nd; ++j) {
          double v = w * dot(pp[j], p[i]);
          lm[i][j] += v;
          lm[j][i] -= v;
        }
    }
    for (int i = 0; i < nd; ++i) {
      int gi = sp.cell_dof(c, i);
      if (sp.boundary_dof[gi]) continue;
      for (int j = 0; j < nd; ++j) {
        int gj = sp.cell_dof(c, j);
        if (sp.boundary_dof[gj]) continue;
        trip.push_back({gi, gj, sp.cell_sign(c, i) * sp.cell_sign(c, j) * lm[i][j]});
      }
    }
  }
  return SparseMatrix::from_triplets(sp.global_dim, sp.global_dim, std::move(trip));
}

// Divergence pairing B[i,j] = int (div phi_j) psi_i.  The geometry factor
// cancels, so entries are pure reference-element integrals.
inline SparseMatrix assemble_div(const FunctionSpace& v, const FunctionSpace& w) {
  if (v.family() != Family::RaviartThomas || w.family() != Family::Discontinuous)
    throw ValidationError("assemble_div needs (RT, DG) spaces");
  if (v.mesh != w.mesh) throw ValidationError("assemble_div: spaces on different meshes");
  const Mesh& mesh = *v.mesh;
  auto rule = triangle_quadrature(2 * v.order());
  const int ndv = v.dofs_per_cell, ndw = w.dofs_per_cell;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * ndv * ndw);
  std::vector<std::array<double, 8>> dv(rule.points.size());
  std::vector<std::array<double, 3>> wv(rule.points.size());
  for (size_t q = 0; q < rule.points.size(); ++q) {
    double vx[8], vy[8];
    v.basis.eval_rt(rule.points[q].x, rule.points[q].y, vx, vy, dv[q].data());
    w.basis.eval_dg(rule.points[q].x, rule.points[q].y, wv[q].data());
  }
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lm[3][8] = {};
    for (size_t q = 0; q < rule.points.size(); ++q) {
      double wq = rule.points[q].w;
      for (int i = 0; i < ndw; ++i)
        for (int j = 0; j < ndv; ++j) lm[i][j] += wq * wv[q][i] * dv[q][j];
    }
    for (int i = 0; i < ndw; ++i) {
      int gi = w.cell_dof(c, i);
      for (int j = 0; j < ndv; ++j) {
        int gj = v.cell_dof(c, j);
        if (v.boundary_dof[gj]) continue;
        trip.push_back({gi, gj, v.cell_sign(c, j) * lm[i][j]});
      }
    }
  }
  return SparseMatrix::from_triplets(w.global_dim, v.global_dim, std::move(trip));
}

// DG mass matrix (block diagonal, one block per cell).
inline SparseMatrix assemble_mass_w(const FunctionSpace& sp) {
  if (sp.family() != Family::Discontinuous)
    throw ValidationError("assemble_mass_w needs a DG space");
  const Mesh& mesh = *sp.mesh;
  auto rule = triangle_quadrature(detail::assembly_quad_degree(sp));
  const int nd = sp.dofs_per_cell;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * nd * nd);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lm[3][3] = {}, v[3];
    for (const auto& qp : rule.points) {
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      sp.basis.eval_dg(qp.x, qp.y, v);
      double w = qp.w * ge.g;
      for (int i = 0; i < nd; ++i)
        for (int j = i; j < nd; ++j) {
          double val = w * v[i] * v[j];
          lm[i][j] += val;
          if (j != i) lm[j][i] += val;
        }
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j)
        trip.push_back({sp.cell_dof(c, i), sp.cell_dof(c, j), lm[i][j]});
  }
  return SparseMatrix::from_triplets(sp.global_dim, sp.global_dim, std::move(trip));
}

// Weighted div-div form K[i,j] = int kappa (div phi_i)(div phi_j).
inline SparseMatrix assemble_divdiv(const FunctionSpace& sp, const CoefficientField& kappa) {
  if (sp.family() != Family::RaviartThomas)
    throw ValidationError("assemble_divdiv needs an RT space");
  const Mesh& mesh = *sp.mesh;
  auto tab = detail::tabulate_rt(sp, detail::assembly_quad_degree(sp));
  const int nd = sp.dofs_per_cell;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * nd * nd);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lm[8][8] = {};
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      double w = qp.w * kappa(ge.x) / ge.g;
      for (int i = 0; i < nd; ++i)
        for (int j = i; j < nd; ++j) {
          double v = w * tab.dv[q][i] * tab.dv[q][j];
          lm[i][j] += v;
          if (j != i) lm[j][i] += v;
        }
    }
    for (int i = 0; i < nd; ++i) {
      int gi = sp.cell_dof(c, i);
      if (sp.boundary_dof[gi]) continue;
      for (int j = 0; j < nd; ++j) {
        int gj = sp.cell_dof(c, j);
        if (sp.boundary_dof[gj]) continue;
        trip.push_back({gi, gj, sp.cell_sign(c, i) * sp.cell_sign(c, j) * lm[i][j]});
      }
    }
  }
  return SparseMatrix::from_triplets(sp.global_dim, sp.global_dim, std::move(trip));
}

// Momentum right-hand side at time t: b[i] = (F(t), phi_i) + gain * (eta_bar(t), div phi_i).
// Dotting with the pushed-forward basis only sees tangential components, so
// out-of-surface parts of F drop out without explicit projection.
inline std::vector<double> assemble_momentum_rhs(const FunctionSpace& sp, const ForcingSpec& forcing,
                                                 double t) {
  if (sp.family() != Family::RaviartThomas)
    throw ValidationError("assemble_momentum_rhs needs an RT space");
  const Mesh& mesh = *sp.mesh;
  auto tab = detail::tabulate_rt(sp, detail::assembly_quad_degree(sp));
  const int nd = sp.dofs_per_cell;
  std::vector<double> b(sp.global_dim, 0.0);
  if (!forcing.pointwise && !forcing.potential) return b;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double lb[8] = {};
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      if (forcing.pointwise) {
        Vec3 fv = forcing.pointwise(ge.x, t);
        for (int i = 0; i < nd; ++i) {
          // (J phihat_i / g) . F * g = (J phihat_i) . F
          double jx = ge.J[0][0] * tab.vx[q][i] + ge.J[0][1] * tab.vy[q][i];
          double jy = ge.J[1][0] * tab.vx[q][i] + ge.J[1][1] * tab.vy[q][i];
          double jz = ge.J[2][0] * tab.vx[q][i] + ge.J[2][1] * tab.vy[q][i];
          lb[i] += qp.w * (jx * fv.x + jy * fv.y + jz * fv.z);
        }
      }
      if (forcing.potential) {
        double eb = forcing.gain * forcing.potential(ge.x, t);
        for (int i = 0; i < nd; ++i) lb[i] += qp.w * eb * tab.dv[q][i];
      }
    }
    for (int i = 0; i < nd; ++i) {
      int gi = sp.cell_dof(c, i);
      if (sp.boundary_dof[gi]) continue;
      b[gi] += sp.cell_sign(c, i) * lb[i];
    }
  }
  return b;
}

}  // namespace tidalfem

#endif
