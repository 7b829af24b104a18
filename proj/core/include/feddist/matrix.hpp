#pragma once

#include <cstddef>
#include <vector>

namespace feddist {

// Minimal dense row-major matrix; everything in this project is small
// (class counts and tiny parameter vectors), so no BLAS backing.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Leading eigenvector of a symmetric matrix by power iteration.
// Deterministic start: all-ones with the first coordinate nudged by 1e-3,
// normalized. The sign is fixed so the largest-magnitude component is
// positive. Returns the last iterate if max_iter is hit.
std::vector<double> leading_eigenvector(const Matrix& sym, double tol = 1e-10,
                                        std::size_t max_iter = 1000);

// Largest singular value via power iteration on A^T A.
double spectral_norm(const Matrix& m, double tol = 1e-12,
                     std::size_t max_iter = 1000);

}  // namespace feddist
