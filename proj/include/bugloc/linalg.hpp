#pragma once

#include <cstddef>
#include <vector>

#include "bugloc/errors.hpp"

namespace bugloc {

using Vector = std::vector<double>;

// Dense row-major matrix. Only what the towers and the attention combiner
// need; anything fancier belongs to a real linear algebra library, which
// this project deliberately does not pull in.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

// out = M x
inline void matvec(const Matrix& m, const Vector& x, Vector& out) {
  if (x.size() != m.cols) throw DimensionMismatch("matvec: vector size does not match matrix columns");
  out.assign(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.a.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// out = M^T x
inline void matvec_transposed(const Matrix& m, const Vector& x, Vector& out) {
  if (x.size() != m.rows) throw DimensionMismatch("matvec_transposed: vector size does not match matrix rows");
  out.assign(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.a.data() + r * m.cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * xr;
  }
}

inline double dot(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Whether batch kernels fan work out over OpenMP threads or run the serial
// reference path. Both produce identical results; the serial path is kept
// for testing and benchmark comparison.
enum class ExecMode { Serial, Parallel };

}  // namespace bugloc
