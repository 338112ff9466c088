#ifndef TIDALFEM_SPARSE_HPP
#define TIDALFEM_SPARSE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <vector>

#include "tidalfem/errors.hpp"

namespace tidalfem {

struct Triplet {
  int row, col;
  double val;
};

// Compressed sparse row matrix.  Column indices are strictly increasing
// within each row and duplicate triplets are summed on compression.
struct SparseMatrix {
  int rows = 0, cols = 0;
  std::vector<int> row_ptr;  // size rows + 1
  std::vector<int> col_idx;
  std::vector<double> vals;

  int nnz() const { return static_cast<int>(vals.size()); }

  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> trip) {
    for (const auto& t : trip)
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw ValidationError("triplet index out of range");
    std::stable_sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (size_t k = 0; k < trip.size();) {
      size_t j = k;
      double s = 0.0;
      while (j < trip.size() && trip[j].row == trip[k].row && trip[j].col == trip[k].col)
        s += trip[j++].val;
      m.col_idx.push_back(trip[k].col);
      m.vals.push_back(s);
      ++m.row_ptr[trip[k].row + 1];
      k = j;
    }
    std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
    return m;
  }

  void apply(const double* x, double* y) const {
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += vals[k] * x[col_idx[k]];
      y[r] = s;
    }
  }

  std::vector<double> operator*(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols) throw ValidationError("spmv size mismatch");
    std::vector<double> y(rows);
    apply(x.data(), y.data());
    return y;
  }

  SparseMatrix transposed() const {
    std::vector<Triplet> trip;
    trip.reserve(vals.size());
    for (int r = 0; r < rows; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        trip.push_back({col_idx[k], r, vals[k]});
    return from_triplets(cols, rows, std::move(trip));
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (int r = 0; r < rows && r < cols; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        if (col_idx[k] == r) d[r] = vals[k];
    return d;
  }
};

inline std::vector<double> spmv(const SparseMatrix& a, const std::vector<double>& x) {
  return a * x;
}

// c0*A + c1*B with identical shapes.
inline SparseMatrix sparse_add(double c0, const SparseMatrix& a, double c1, const SparseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ValidationError("sparse_add shape mismatch");
  std::vector<Triplet> trip;
  trip.reserve(a.vals.size() + b.vals.size());
  for (int r = 0; r < a.rows; ++r) {
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      trip.push_back({r, a.col_idx[k], c0 * a.vals[k]});
    for (int k = b.row_ptr[r]; k < b.row_ptr[r + 1]; ++k)
      trip.push_back({r, b.col_idx[k], c1 * b.vals[k]});
  }
  return SparseMatrix::from_triplets(a.rows, a.cols, std::move(trip));
}

inline SparseMatrix sparse_scaled(double c, const SparseMatrix& a) {
  SparseMatrix m = a;
  for (auto& v : m.vals) v *= c;
  return m;
}

}  // namespace tidalfem

#endif
