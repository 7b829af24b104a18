#include "feddist/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace feddist {

namespace {

double norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

std::vector<double> start_vector(std::size_t n) {
  std::vector<double> v(n, 1.0);
  v[0] += 1e-3;
  const double nv = norm(v);
  for (double& x : v) x /= nv;
  return v;
}

void fix_sign(std::vector<double>& v) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  }
  if (v[imax] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

std::vector<double> leading_eigenvector(const Matrix& sym, double tol,
                                        std::size_t max_iter) {
  if (sym.rows != sym.cols || sym.rows == 0) {
    throw std::invalid_argument("leading_eigenvector: square matrix required");
  }
  const std::size_t n = sym.rows;
  std::vector<double> v = start_vector(n);
  std::vector<double> next(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += sym.at(i, j) * v[j];
      next[i] = acc;
    }
    const double nn = norm(next);
    if (nn < 1e-300) break;  // v is (numerically) in the null space
    for (double& x : next) x /= nn;
    double diff = 0.0, diff_flipped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diff += (next[i] - v[i]) * (next[i] - v[i]);
      diff_flipped += (next[i] + v[i]) * (next[i] + v[i]);
    }
    v = next;
    if (std::sqrt(diff) < tol || std::sqrt(diff_flipped) < tol) break;
  }
  fix_sign(v);
  return v;
}

double spectral_norm(const Matrix& m, double tol, std::size_t max_iter) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  std::vector<double> v = start_vector(m.cols);
  std::vector<double> u(m.rows);
  std::vector<double> w(m.cols);
  double sigma = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < m.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m.cols; ++j) acc += m.at(i, j) * v[j];
      u[i] = acc;
    }
    for (std::size_t j = 0; j < m.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m.rows; ++i) acc += m.at(i, j) * u[i];
      w[j] = acc;
    }
    const double nw = norm(w);
    if (nw < 1e-300) return 0.0;
    const double next_sigma = std::sqrt(nw);
    for (double& x : w) x /= nw;
    const bool done = std::abs(next_sigma - sigma) <= tol * std::max(1.0, next_sigma);
    sigma = next_sigma;
    v = w;
    if (done && it > 0) break;
  }
  return sigma;
}

}  // namespace feddist
