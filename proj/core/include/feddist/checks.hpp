#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "feddist/model.hpp"

namespace feddist {

// One executable verification of a formal property, with the measured
// quantity and the bound it was compared against.
struct CheckReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string instance;

  std::string to_json_line() const;
};

// Gradients are affine in the target: for fixed (w, x) the residual
// ||g(y1) + g(y2) - 2 g((y1+y2)/2)|| stays below 1e-10 and gradient
// differences are Lipschitz in ||y1 - y2|| with constant ||J||.
CheckReport check_grad_linearity(const Architecture& arch, std::uint64_t seed,
                                 std::size_t trials);

// ||grad(w, honest) - grad(w, mixed)|| <= alpha * C * ||honest - byz||
//                                      <= sqrt(2) * alpha * C
// with C the spectral norm of the relevant Jacobian, maximized over the
// batch.
CheckReport check_bias_bound(const Architecture& arch,
                             std::span<const double> alphas,
                             std::uint64_t seed, std::size_t trials);

// Full-batch gradient descent on the byzantine-mixed objective reaches an
// approximately stationary point of the honest objective:
//   min_t ||grad F(w_t)||^2 <= 2 L F(w_0) / T + 2 alpha^2 C^2.
// L is an empirical trajectory estimate, so the check validates the shape of
// the bound, not its tightest constants.
CheckReport check_gd_stationarity(const Architecture& arch, std::size_t steps,
                                  double alpha, std::uint64_t seed);

// The closed-form loss-maximizing attack matches exhaustive vertex
// maximization and is not beaten by interior samples.
CheckReport check_lma_optimality(std::span<const std::size_t> class_counts,
                                 std::span<const double> alphas,
                                 std::size_t trials, std::uint64_t seed,
                                 std::size_t interior_samples = 10'000);

// The hull-restricted attack's best vertex is not beaten by random points of
// the hull.
CheckReport check_hips_optimality(std::size_t trials, std::uint64_t seed,
                                  std::size_t hull_samples = 10'000);

// The fixed three-prediction instance whose coordinate-wise median leaves
// the simplex, while the mean and the geometric median stay inside.
CheckReport check_median_counterexample();

std::vector<std::string> all_check_names();

// Runs one named check with its default instance sizes.
CheckReport run_check(const std::string& name, std::uint64_t seed);

std::vector<CheckReport> run_all_checks(std::uint64_t seed);

}  // namespace feddist
