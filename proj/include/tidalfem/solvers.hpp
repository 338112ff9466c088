#ifndef TIDALFEM_SOLVERS_HPP
#define TIDALFEM_SOLVERS_HPP

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "tidalfem/sparse.hpp"

namespace tidalfem {

struct SolverConfig {
  double rel_tol = 1e-10;
  int max_iters = 0;  // 0: pick 10*n at solve time
  int restart = 50;   // GMRES restart length
};

struct LinearOperator {
  virtual ~LinearOperator() = default;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual void apply(const double* x, double* y) const = 0;
};

struct SparseOperator : LinearOperator {
  explicit SparseOperator(const SparseMatrix& m) : mat(&m) {}
  const SparseMatrix* mat;
  int rows() const override { return mat->rows; }
  int cols() const override { return mat->cols; }
  void apply(const double* x, double* y) const override { mat->apply(x, y); }
};

namespace la {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double c, const std::vector<double>& x, std::vector<double>& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

}  // namespace la

// Jacobi-preconditioned conjugate gradients.  Rows that were eliminated
// (empty, zero diagonal) stay untouched as long as the right-hand side is
// zero there, so strongly constrained dofs ride along at zero.
inline std::vector<double> solve_spd(const SparseMatrix& a, const std::vector<double>& b,
                                     const SolverConfig& cfg = {},
                                     const std::vector<double>* x0 = nullptr) {
  if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows)
    throw ValidationError("solve_spd shape mismatch");
  const int n = a.rows;
  const int max_iters = cfg.max_iters > 0 ? cfg.max_iters : 10 * n + 100;
  std::vector<double> inv_diag = a.diagonal();
  for (auto& d : inv_diag) d = (d > 0.0) ? 1.0 / d : 1.0;

  std::vector<double> x = x0 ? *x0 : std::vector<double>(n, 0.0);
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.apply(x.data(), r.data());
  for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const double bnorm = la::norm2(b);
  if (bnorm == 0.0) return std::vector<double>(n, 0.0);
  const double target = cfg.rel_tol * bnorm;

  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = la::dot(r, z);
  double rnorm = la::norm2(r);
  for (int it = 0; it < max_iters && rnorm > target; ++it) {
    a.apply(p.data(), ap.data());
    double pap = la::dot(p, ap);
    if (pap <= 0.0) throw SolverError("matrix not positive definite in CG", rnorm, it);
    double alpha = rz / pap;
    la::axpy(alpha, p, x);
    la::axpy(-alpha, ap, r);
    rnorm = la::norm2(r);
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    double rz_new = la::dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  // Recurrence residuals can drift; confirm against the true residual.
  a.apply(x.data(), r.data());
  for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
  rnorm = la::norm2(r);
  if (rnorm > 10.0 * target && rnorm > 1e-14 * bnorm)
    throw SolverError("CG did not reach tolerance (residual " + std::to_string(rnorm / bnorm) + ")",
                      rnorm / bnorm, max_iters);
  return x;
}

// Restarted GMRES with optional right preconditioning.  The convergence test
// is on the true (unpreconditioned) residual relative to |b|.
inline std::vector<double> solve_general(const LinearOperator& op, const std::vector<double>& b,
                                         const SolverConfig& cfg = {},
                                         const LinearOperator* precond = nullptr,
                                         const std::vector<double>* x0 = nullptr) {
  if (op.rows() != op.cols() || static_cast<int>(b.size()) != op.rows())
    throw ValidationError("solve_general shape mismatch");
  const int n = op.rows();
  const int m = cfg.restart > 0 ? cfg.restart : 50;
  const int max_iters = cfg.max_iters > 0 ? cfg.max_iters : 10 * n + 200;

  std::vector<double> x = x0 ? *x0 : std::vector<double>(n, 0.0);
  const double bnorm = la::norm2(b);
  if (bnorm == 0.0) return std::vector<double>(n, 0.0);
  const double target = cfg.rel_tol * bnorm;

  std::vector<std::vector<double>> v(m + 1, std::vector<double>(n));
  std::vector<double> h((m + 1) * m, 0.0), cs(m), sn(m), g(m + 1), w(n), z(n);
  auto precond_apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (precond)
      precond->apply(in.data(), out.data());
    else
      out = in;
  };

  int total_it = 0;
  double best_res = -1.0;
  int stalled = 0;
  while (true) {
    op.apply(x.data(), w.data());
    for (int i = 0; i < n; ++i) w[i] = b[i] - w[i];
    double beta = la::norm2(w);
    if (beta <= target) return x;
    if (best_res >= 0.0) {
      if (beta > 0.99 * best_res && ++stalled >= 5)
        throw SolverError("GMRES stalled at relative residual " + std::to_string(beta / bnorm),
                          beta / bnorm, total_it);
      if (beta <= 0.99 * best_res) stalled = 0;
    }
    if (best_res < 0.0 || beta < best_res) best_res = beta;
    if (total_it >= max_iters)
      throw SolverError("GMRES exceeded max iterations (relative residual " +
                            std::to_string(beta / bnorm) + ")",
                        beta / bnorm, total_it);

    for (double& val : g) val = 0.0;
    g[0] = beta;
    for (int i = 0; i < n; ++i) v[0][i] = w[i] / beta;
    int j = 0;
    for (; j < m && total_it < max_iters; ++j, ++total_it) {
      precond_apply(v[j], z);
      op.apply(z.data(), w.data());
      for (int i = 0; i <= j; ++i) {
        double hij = la::dot(w, v[i]);
        h[i * m + j] = hij;
        la::axpy(-hij, v[i], w);
      }
      double hnext = la::norm2(w);
      h[(j + 1) * m + j] = hnext;
      if (hnext > 0.0)
        for (int i = 0; i < n; ++i) v[j + 1][i] = w[i] / hnext;
      // Givens rotations keep the least-squares residual available cheaply.
      for (int i = 0; i < j; ++i) {
        double t0 = cs[i] * h[i * m + j] + sn[i] * h[(i + 1) * m + j];
        double t1 = -sn[i] * h[i * m + j] + cs[i] * h[(i + 1) * m + j];
        h[i * m + j] = t0;
        h[(i + 1) * m + j] = t1;
      }
      double denom = std::hypot(h[j * m + j], h[(j + 1) * m + j]);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = h[j * m + j] / denom;
        sn[j] = h[(j + 1) * m + j] / denom;
      }
      h[j * m + j] = denom;
      h[(j + 1) * m + j] = 0.0;
      double gj = g[j];
      g[j] = cs[j] * gj;
      g[j + 1] = -sn[j] * gj;
      if (std::abs(g[j + 1]) <= target || hnext == 0.0) {
        ++j;
        ++total_it;
        break;
      }
    }
    // Back substitution and solution update through the preconditioner.
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h[i * m + k] * y[k];
      y[i] = s / h[i * m + i];
    }
    std::vector<double> combo(n, 0.0);
    for (int k = 0; k < j; ++k) la::axpy(y[k], v[k], combo);
    precond_apply(combo, z);
    la::axpy(1.0, z, x);
  }
}

inline std::vector<double> solve_general(const SparseMatrix& a, const std::vector<double>& b,
                                         const SolverConfig& cfg = {}) {
  SparseOperator op(a);
  return solve_general(op, b, cfg);
}

// Exact inverse of a block-diagonal mass matrix with one fixed-size block per
// cell (1x1 for piecewise constants, 3x3 for linears).
struct CellBlockInverse {
  int block = 1;
  int n = 0;
  std::vector<double> inv;  // block*block entries per cell

  CellBlockInverse() = default;

  static CellBlockInverse from_block_diagonal(const SparseMatrix& m, int block) {
    if (m.rows != m.cols || m.rows % block != 0)
      throw ValidationError("block inverse: bad dimensions");
    CellBlockInverse ci;
    ci.block = block;
    ci.n = m.rows;
    const int nb = m.rows / block;
    ci.inv.assign(static_cast<size_t>(nb) * block * block, 0.0);
    for (int c = 0; c < nb; ++c) {
      double a[3][3] = {};
      for (int i = 0; i < block; ++i) {
        int r = c * block + i;
        for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
          int j = m.col_idx[k] - c * block;
          if (j < 0 || j >= block) throw ValidationError("matrix is not cell-block-diagonal");
          a[i][j] = m.vals[k];
        }
      }
      double* out = &ci.inv[static_cast<size_t>(c) * block * block];
      if (block == 1) {
        if (a[0][0] == 0.0) throw ValidationError("singular mass block");
        out[0] = 1.0 / a[0][0];
      } else {
        double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if (det == 0.0) throw ValidationError("singular mass block");
        double id = 1.0 / det;
        out[0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * id;
        out[1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * id;
        out[2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * id;
        out[3] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * id;
        out[4] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * id;
        out[5] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * id;
        out[6] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * id;
        out[7] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * id;
        out[8] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * id;
      }
    }
    return ci;
  }

  void apply(const double* x, double* y) const {
    const int nb = n / block;
    for (int c = 0; c < nb; ++c) {
      const double* a = &inv[static_cast<size_t>(c) * block * block];
      const double* xi = x + c * block;
      double* yi = y + c * block;
      for (int i = 0; i < block; ++i) {
        double s = 0.0;
        for (int j = 0; j < block; ++j) s += a[i * block + j] * xi[j];
        yi[i] = s;
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> y(b.size());
    apply(b.data(), y.data());
    return y;
  }
};

// Two-by-two block operator
//   [ A    Bt ] [ u ]
//   [ B    D  ] [ p ]
// where D may be absent (steady saddle problems).  On closed surfaces the
// pressure constant can be projected out of right-hand sides and solutions;
// `mean_weights` must then hold the pressure-space volume weights M_W * 1.
struct BlockSystem : LinearOperator {
  const SparseMatrix* A = nullptr;
  const SparseMatrix* Bt = nullptr;
  const SparseMatrix* B = nullptr;
  const SparseMatrix* D = nullptr;  // may be null
  double scale_Bt = 1.0, scale_B = 1.0;
  int nu = 0, np = 0;
  bool project_pressure_mean = false;
  std::vector<double> mean_weights;

  int rows() const override { return nu + np; }
  int cols() const override { return nu + np; }

  void apply(const double* x, double* y) const override {
    std::vector<double> tmp(std::max(nu, np));
    A->apply(x, y);
    Bt->apply(x + nu, tmp.data());
    for (int i = 0; i < nu; ++i) y[i] += scale_Bt * tmp[i];
    B->apply(x, tmp.data());
    for (int i = 0; i < np; ++i) y[nu + i] = scale_B * tmp[i];
    if (D) {
      D->apply(x + nu, tmp.data());
      for (int i = 0; i < np; ++i) y[nu + i] += tmp[i];
    }
  }

  // Normalize the pressure part of a solution to zero weighted mean.
  void project_mean(std::vector<double>& full) const {
    if (!project_pressure_mean) return;
    double wsum = 0.0, s = 0.0;
    for (int i = 0; i < np; ++i) {
      wsum += mean_weights[i];
      s += mean_weights[i] * full[nu + i];
    }
    double c = s / wsum;
    for (int i = 0; i < np; ++i) full[nu + i] -= c;
  }

  // Remove the component of a right-hand side along the constant left null
  // vector (plain ones on the pressure block), which is roundoff cleanup for
  // consistent data.
  void project_rhs(std::vector<double>& full) const {
    if (!project_pressure_mean) return;
    double s = 0.0;
    for (int i = 0; i < np; ++i) s += full[nu + i];
    double c = s / np;
    for (int i = 0; i < np; ++i) full[nu + i] -= c;
  }
};

// Block-diagonal preconditioner: an SPD surrogate for the velocity block
// solved by inner CG, and the exact cellwise inverse for the pressure block.
struct BlockDiagPreconditioner : LinearOperator {
  const SparseMatrix* Su = nullptr;
  const CellBlockInverse* Sp = nullptr;
  double sp_scale = 1.0;  // pressure block is sp_scale * M_W
  int nu = 0, np = 0;
  SolverConfig inner{1e-12, 0, 50};

  int rows() const override { return nu + np; }
  int cols() const override { return nu + np; }

  void apply(const double* x, double* y) const override {
    std::vector<double> bu(x, x + nu);
    std::vector<double> xu = solve_spd(*Su, bu, inner);
    std::copy(xu.begin(), xu.end(), y);
    Sp->apply(x + nu, y + nu);
    if (sp_scale != 1.0)
      for (int i = 0; i < np; ++i) y[nu + i] /= sp_scale;
  }
};

// Dispatch used by the steppers: block solve with mean projection applied to
// rhs and solution when requested.
inline std::vector<double> solve_block(const BlockSystem& sys, std::vector<double> b,
                                       const BlockDiagPreconditioner& pre, const SolverConfig& cfg,
                                       const std::vector<double>* x0 = nullptr) {
  sys.project_rhs(b);
  std::vector<double> x = solve_general(sys, b, cfg, &pre, x0);
  sys.project_mean(x);
  return x;
}

}  // namespace tidalfem

#endif
