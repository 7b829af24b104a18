#include "feddist/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "feddist/attacks.hpp"
#include "feddist/defences.hpp"
#include "feddist/rng.hpp"
#include <json.hpp>

namespace feddist {

namespace {

ProbVector random_simplex_point(Rng& rng, std::size_t c) {
  std::vector<double> v(c);
  double sum = 0.0;
  for (double& x : v) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    x = -std::log(u);
    sum += x;
  }
  for (double& x : v) x /= sum;
  return ProbVector::validate(std::move(v));
}

std::vector<double> random_input(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

double vec_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

std::vector<double> vec_sub(const std::vector<double>& a,
                            const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

JacobianOf relevant_jacobian(LossKind kind) {
  return kind == LossKind::kCel ? JacobianOf::kLogits
                                : JacobianOf::kProbabilities;
}

ProbVector midpoint(const ProbVector& a, const ProbVector& b) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
  return ProbVector::validate(std::move(m));
}

std::string describe(const Architecture& arch) {
  std::ostringstream out;
  out << arch.input_dim;
  for (std::size_t h : arch.hidden) out << '-' << h;
  out << '-' << arch.classes;
  return out.str();
}

}  // namespace

std::string CheckReport::to_json_line() const {
  nlohmann::json line{
      {"name", name},
      {"pass", pass},
      {"measured", measured},
      {"bound", bound},
      {"instance", instance},
  };
  return line.dump();
}

CheckReport check_grad_linearity(const Architecture& arch, std::uint64_t seed,
                                 std::size_t trials) {
  Rng rng(derive_seed(seed, {0x11ea}));
  double max_residual = 0.0;
  double max_lipschitz_ratio = 0.0;
  bool pass = true;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const ModelParams w = init(arch, rng.next());
    const std::vector<double> x = random_input(rng, arch.input_dim);
    const ProbVector y1 = random_simplex_point(rng, arch.classes);
    const ProbVector y2 = random_simplex_point(rng, arch.classes);

    for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
      const auto g1 = grad(w, std::vector<SoftExample>{{x, y1}}, kind);
      const auto g2 = grad(w, std::vector<SoftExample>{{x, y2}}, kind);
      const auto gm =
          grad(w, std::vector<SoftExample>{{x, midpoint(y1, y2)}}, kind);

      std::vector<double> residual(g1.size());
      for (std::size_t i = 0; i < g1.size(); ++i) {
        residual[i] = g1[i] + g2[i] - 2.0 * gm[i];
      }
      max_residual = std::max(max_residual, vec_norm(residual));

      const double j_norm = spectral_norm(jacobian(w, x, relevant_jacobian(kind)));
      const double diff = vec_norm(vec_sub(g1, g2));
      const double dist = l2_distance(y1, y2);
      if (dist > 1e-12 && j_norm > 0.0) {
        max_lipschitz_ratio =
            std::max(max_lipschitz_ratio, diff / (j_norm * dist));
      }
    }
  }
  pass = max_residual <= 1e-10 && max_lipschitz_ratio <= 1.0 + 1e-8;

  CheckReport report;
  report.name = "grad_linearity";
  report.pass = pass;
  report.measured = max_residual;
  report.bound = 1e-10;
  std::ostringstream inst;
  inst << "arch " << describe(arch) << ", " << trials
       << " trials, both losses; max lipschitz ratio " << max_lipschitz_ratio;
  report.instance = inst.str();
  return report;
}

CheckReport check_bias_bound(const Architecture& arch,
                             std::span<const double> alphas,
                             std::uint64_t seed, std::size_t trials) {
  Rng rng(derive_seed(seed, {0xb1a5}));
  double max_ratio = 0.0;
  bool pass = true;
  constexpr std::size_t kBatch = 3;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const double alpha = alphas[trial % alphas.size()];
    const LossKind kind = (trial % 2 == 0) ? LossKind::kCel : LossKind::kMse;
    const ModelParams w = init(arch, rng.next());

    std::vector<SoftExample> honest_batch, mixed_batch;
    double c_hat = 0.0;
    double mean_label_dist = 0.0;
    for (std::size_t k = 0; k < kBatch; ++k) {
      const std::vector<double> x = random_input(rng, arch.input_dim);
      const ProbVector y_h = random_simplex_point(rng, arch.classes);
      // adversarial target on even samples, random elsewhere
      const ProbVector y_b = (k % 2 == 0)
                                 ? lma(y_h, kind)
                                 : random_simplex_point(rng, arch.classes);
      honest_batch.push_back({x, y_h});
      mixed_batch.push_back({x, mix(y_h, y_b, alpha)});
      c_hat = std::max(c_hat,
                       spectral_norm(jacobian(w, x, relevant_jacobian(kind))));
      mean_label_dist += l2_distance(y_h, y_b);
    }
    mean_label_dist /= static_cast<double>(kBatch);

    const auto g_h = grad(w, honest_batch, kind);
    const auto g_m = grad(w, mixed_batch, kind);
    const double measured = vec_norm(vec_sub(g_h, g_m));

    if (alpha == 0.0) {
      if (measured != 0.0) pass = false;
      continue;
    }
    const double tight_bound = alpha * c_hat * mean_label_dist;
    const double loose_bound = std::sqrt(2.0) * alpha * c_hat;
    if (measured > tight_bound * (1.0 + 1e-9) + 1e-15) pass = false;
    const double ratio = measured / loose_bound;
    max_ratio = std::max(max_ratio, ratio);
    if (ratio >= 1.0) pass = false;
  }

  CheckReport report;
  report.name = "bias_bound";
  report.pass = pass;
  report.measured = max_ratio;
  report.bound = 1.0;
  std::ostringstream inst;
  inst << "arch " << describe(arch) << ", " << trials
       << " instances, ratio = max |grad_h - grad_mix| / (sqrt(2) alpha C)";
  report.instance = inst.str();
  return report;
}

CheckReport check_gd_stationarity(const Architecture& arch, std::size_t steps,
                                  double alpha, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x6d57}));
  constexpr std::size_t kProblemSize = 8;
  constexpr LossKind kKind = LossKind::kMse;

  std::vector<SoftExample> honest, mixed;
  for (std::size_t k = 0; k < kProblemSize; ++k) {
    const std::vector<double> x = random_input(rng, arch.input_dim);
    const ProbVector y_h = random_simplex_point(rng, arch.classes);
    const ProbVector y_b = lma(y_h, kKind);
    honest.push_back({x, y_h});
    mixed.push_back({x, mix(y_h, y_b, alpha)});
  }

  ModelParams w = init(arch, rng.next());
  const auto objective = [&](const ModelParams& p,
                             const std::vector<SoftExample>& batch) {
    double acc = 0.0;
    for (const SoftExample& ex : batch) {
      acc += loss(p, ex.features, ex.target, kKind);
    }
    return acc / static_cast<double>(batch.size());
  };

  // pilot smoothness estimate around the start, with a safety factor; the
  // trajectory estimate below can only raise it
  double l_hat = 0.0;
  {
    const auto g0 = grad(w, mixed, kKind);
    for (std::size_t probe = 0; probe < 10; ++probe) {
      ModelParams shifted = w;
      std::vector<double> delta(w.values.size());
      for (double& d : delta) d = 1e-2 * rng.normal();
      for (std::size_t i = 0; i < delta.size(); ++i) {
        shifted.values[i] += delta[i];
      }
      const auto g1 = grad(shifted, mixed, kKind);
      l_hat = std::max(l_hat, vec_norm(vec_sub(g1, g0)) / vec_norm(delta));
    }
    l_hat = std::max(l_hat * 2.0, 1e-6);
  }

  const double f0 = objective(w, honest);
  const double step_size = 1.0 / l_hat;
  double min_grad_sq = std::numeric_limits<double>::infinity();
  double c_hat = 0.0;
  double l_observed = l_hat;

  std::vector<double> prev_grad = grad(w, mixed, kKind);
  for (std::size_t t = 0; t < steps; ++t) {
    {
      const auto g_honest = grad(w, honest, kKind);
      const double g_sq = vec_norm(g_honest);
      min_grad_sq = std::min(min_grad_sq, g_sq * g_sq);
    }
    for (const SoftExample& ex : mixed) {
      c_hat = std::max(
          c_hat, spectral_norm(jacobian(w, ex.features, relevant_jacobian(kKind))));
    }
    ModelParams next = w;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
      next.values[i] -= step_size * prev_grad[i];
      if (!std::isfinite(next.values[i])) {
        throw NonFiniteLossError("gd_stationarity: diverged");
      }
    }
    const auto next_grad = grad(next, mixed, kKind);
    const double move = step_size * vec_norm(prev_grad);
    if (move > 1e-12) {
      l_observed =
          std::max(l_observed, vec_norm(vec_sub(next_grad, prev_grad)) / move);
    }
    w = std::move(next);
    prev_grad = next_grad;
  }

  const double bound = 2.0 * l_observed * f0 / static_cast<double>(steps) +
                       2.0 * alpha * alpha * c_hat * c_hat;

  CheckReport report;
  report.name = "gd_stationarity";
  report.pass = min_grad_sq <= bound + 1e-9;
  report.measured = min_grad_sq;
  report.bound = bound;
  std::ostringstream inst;
  inst << "arch " << describe(arch) << ", " << steps << " gd steps, alpha "
       << alpha << ", empirical smoothness surrogate L=" << l_observed
       << " (unverified for the mlp), C=" << c_hat;
  report.instance = inst.str();
  return report;
}

CheckReport check_lma_optimality(std::span<const std::size_t> class_counts,
                                 std::span<const double> alphas,
                                 std::size_t trials, std::uint64_t seed,
                                 std::size_t interior_samples) {
  Rng rng(derive_seed(seed, {0x17a0}));
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::size_t mismatches = 0;

  for (std::size_t c : class_counts) {
    for (double alpha : alphas) {
      for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
        for (std::size_t trial = 0; trial < trials; ++trial) {
          const ProbVector y_h = random_simplex_point(rng, c);
          const ProbVector closed = lma(y_h, kind);
          const double closed_value = lmax_objective(y_h, closed, alpha, kind);

          double best_vertex = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < c; ++i) {
            best_vertex = std::max(
                best_vertex,
                lmax_objective(y_h, one_hot(c, i), alpha, kind));
          }
          if (closed_value < best_vertex - 1e-12) ++mismatches;

          double best_interior = -std::numeric_limits<double>::infinity();
          for (std::size_t s = 0; s < interior_samples; ++s) {
            best_interior = std::max(
                best_interior,
                lmax_objective(y_h, random_simplex_point(rng, c), alpha, kind));
          }
          worst_margin =
              std::max(worst_margin, best_interior - closed_value);
        }
      }
    }
  }

  CheckReport report;
  report.name = "lma_optimality";
  report.pass = mismatches == 0 && worst_margin <= 1e-9;
  report.measured = worst_margin;
  report.bound = 1e-9;
  std::ostringstream inst;
  inst << trials << " instances per (c, alpha, loss), " << mismatches
       << " vertex mismatches, " << interior_samples << " interior samples";
  report.instance = inst.str();
  return report;
}

CheckReport check_hips_optimality(std::size_t trials, std::uint64_t seed,
                                  std::size_t hull_samples) {
  Rng rng(derive_seed(seed, {0x417b}));
  constexpr std::size_t kClasses = 5;
  constexpr std::size_t kHonest = 5;
  const double alphas[] = {0.1, 0.3, 0.45};
  double worst_margin = -std::numeric_limits<double>::infinity();

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const double alpha = alphas[trial % 3];
    const LossKind kind = (trial % 2 == 0) ? LossKind::kCel : LossKind::kMse;

    std::vector<ProbVector> honest;
    for (std::size_t i = 0; i < kHonest; ++i) {
      honest.push_back(random_simplex_point(rng, kClasses));
    }
    const ProbVector y_h = honest_mean(honest);
    const ProbVector best_vertex = hips_lma(honest, y_h, alpha, kind);
    const double vertex_value = lmax_objective(y_h, best_vertex, alpha, kind);

    double best_sampled = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < hull_samples; ++s) {
      const ProbVector lambda = random_simplex_point(rng, kHonest);
      std::vector<double> point(kClasses, 0.0);
      for (std::size_t i = 0; i < kHonest; ++i) {
        for (std::size_t k = 0; k < kClasses; ++k) {
          point[k] += lambda[i] * honest[i][k];
        }
      }
      best_sampled = std::max(
          best_sampled, lmax_objective(y_h, ProbVector::validate(point), alpha,
                                       kind));
    }
    worst_margin = std::max(worst_margin, best_sampled - vertex_value);
  }

  CheckReport report;
  report.name = "hips_optimality";
  report.pass = worst_margin <= 1e-9;
  report.measured = worst_margin;
  report.bound = 1e-9;
  std::ostringstream inst;
  inst << trials << " instances, " << kHonest << " honest vertices in dim "
       << kClasses << ", " << hull_samples << " hull samples";
  report.instance = inst.str();
  return report;
}

CheckReport check_median_counterexample() {
  const std::vector<ProbVector> triple = {
      ProbVector::validate({0.7, 0.2, 0.1}),
      ProbVector::validate({0.8, 0.1, 0.1}),
      ProbVector::validate({0.0, 0.0, 1.0}),
  };
  const std::vector<double> median = coordwise_median(triple);

  bool median_exact = median.size() == 3 && median[0] == 0.7 &&
                      median[1] == 0.1 && median[2] == 0.1;
  bool median_rejected = false;
  double deviation = 0.0;
  try {
    ProbVector::validate(median);
  } catch (const SumNotOneError& e) {
    median_rejected = true;
    deviation = e.deviation;
  }

  bool gm_ok = false, mean_ok = false;
  try {
    geometric_median(triple);
    gm_ok = true;
  } catch (const std::exception&) {
  }
  try {
    mean_agg(triple);
    mean_ok = true;
  } catch (const std::exception&) {
  }

  CheckReport report;
  report.name = "median_counterexample";
  report.pass =
      median_exact && median_rejected && std::abs(deviation + 0.1) < 1e-12 &&
      gm_ok && mean_ok;
  report.measured = 1.0 + deviation;  // the median's coordinate sum
  report.bound = kSimplexSumTol;
  report.instance =
      "triple (0.7,0.2,0.1),(0.8,0.1,0.1),(0,0,1): median leaves the simplex, "
      "gm and mean stay inside";
  return report;
}

std::vector<std::string> all_check_names() {
  return {"grad_linearity",   "bias_bound",       "gd_stationarity",
          "lma_optimality",   "hips_optimality",  "median_counterexample"};
}

CheckReport run_check(const std::string& name, std::uint64_t seed) {
  const Architecture tiny{4, {8}, 3, Activation::kTanh};
  const Architecture gd_arch{3, {6}, 3, Activation::kTanh};
  const std::vector<double> alphas = {0.0, 0.1, 0.3, 0.45};
  const std::vector<std::size_t> class_counts = {3, 5, 10};
  const std::vector<double> attack_alphas = {0.1, 0.3, 0.45};

  if (name == "grad_linearity") return check_grad_linearity(tiny, seed, 100);
  if (name == "bias_bound") return check_bias_bound(tiny, alphas, seed, 100);
  if (name == "gd_stationarity") {
    return check_gd_stationarity(gd_arch, 200, 0.45, seed);
  }
  if (name == "lma_optimality") {
    return check_lma_optimality(class_counts, attack_alphas, 200, seed, 10'000);
  }
  if (name == "hips_optimality") return check_hips_optimality(100, seed, 10'000);
  if (name == "median_counterexample") return check_median_counterexample();
  throw std::invalid_argument("unknown check '" + name + "'");
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed) {
  std::vector<CheckReport> reports;
  for (const std::string& name : all_check_names()) {
    reports.push_back(run_check(name, seed));
  }
  return reports;
}

}  // namespace feddist
