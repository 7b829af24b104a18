#include "feddist/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "feddist/rng.hpp"

namespace feddist {

namespace {

constexpr double kSimSymmetryTol = 1e-9;
constexpr double kHullDedupeTol = 1e-12;
constexpr double kLogClamp = 1e-12;

}  // namespace

void AttackSpec::check() const {
  if (kind == AttackKind::kFedavgGauss && !(noise_scale > 0.0)) {
    throw std::invalid_argument("attack: noise_scale must be > 0");
  }
  if ((kind == AttackKind::kCpa || kind == AttackKind::kHipsCpa) &&
      similarity == SimilaritySource::kFile && similarity_file.empty()) {
    throw std::invalid_argument("attack: similarity_file required");
  }
}

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kRlf: return "rlf";
    case AttackKind::kLma: return "lma";
    case AttackKind::kCpa: return "cpa";
    case AttackKind::kHipsLma: return "hips_lma";
    case AttackKind::kHipsCpa: return "hips_cpa";
    case AttackKind::kFedavgGauss: return "fedavg_gauss";
    case AttackKind::kFedavgTakeover: return "fedavg_takeover";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::kNone;
  if (name == "rlf") return AttackKind::kRlf;
  if (name == "lma") return AttackKind::kLma;
  if (name == "cpa") return AttackKind::kCpa;
  if (name == "hips_lma") return AttackKind::kHipsLma;
  if (name == "hips_cpa") return AttackKind::kHipsCpa;
  if (name == "fedavg_gauss") return AttackKind::kFedavgGauss;
  if (name == "fedavg_takeover") return AttackKind::kFedavgTakeover;
  throw std::invalid_argument("unknown attack kind '" + name + "'");
}

SimilarityMatrix SimilarityMatrix::validate(Matrix m) {
  if (m.rows != m.cols || m.rows < 2) {
    throw std::invalid_argument("similarity matrix: square, >= 2 classes");
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (!std::isfinite(m.at(i, j))) {
        throw std::invalid_argument("similarity matrix: non-finite entry");
      }
      if (std::abs(m.at(i, j) - m.at(j, i)) > kSimSymmetryTol) {
        throw std::invalid_argument("similarity matrix: not symmetric");
      }
    }
  }
  return SimilarityMatrix{std::move(m)};
}

SimilarityMatrix read_similarity(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::size_t c = 0;
  if (!(in >> c) || c < 2) {
    throw std::runtime_error(path + ": first line must be the class count");
  }
  Matrix m(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (!(in >> m.at(i, j))) {
        throw std::runtime_error(path + ": expected " + std::to_string(c * c) +
                                 " matrix entries");
      }
    }
  }
  return SimilarityMatrix::validate(std::move(m));
}

void write_similarity(const SimilarityMatrix& sim, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const std::size_t c = sim.classes();
  out << c << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out << sim.at(i, j) << (j + 1 == c ? '\n' : ' ');
    }
  }
}

ProbVector honest_mean(std::span<const ProbVector> honest_preds) {
  if (honest_preds.empty()) throw EmptyInputError("honest_mean: no honest clients");
  const std::size_t c = honest_preds.front().size();
  std::vector<double> acc(c, 0.0);
  for (const ProbVector& p : honest_preds) {
    if (p.size() != c) throw DimensionMismatchError("honest_mean: dimension mismatch");
    for (std::size_t i = 0; i < c; ++i) acc[i] += p[i];
  }
  // divide (instead of multiplying by the inverse) so the result is bitwise
  // identical to an unweighted mean_agg over the same inputs
  for (double& x : acc) x /= static_cast<double>(honest_preds.size());
  return ProbVector::validate(std::move(acc));
}

ProbVector rlf(std::size_t classes, std::uint64_t seed,
               std::size_t sample_index) {
  Rng rng(derive_seed(seed, {0x41f, sample_index}));
  return one_hot(classes, static_cast<std::size_t>(rng.below(classes)));
}

ProbVector lma(const ProbVector& honest_mean_pred, LossKind /*kind*/) {
  // both losses share the same maximizer: one-hot at the argmin
  return one_hot(honest_mean_pred.size(), honest_mean_pred.argmin());
}

double lmax_objective(const ProbVector& honest_mean_pred,
                      const ProbVector& candidate, double alpha,
                      LossKind kind) {
  const std::size_t c = honest_mean_pred.size();
  if (candidate.size() != c) {
    throw DimensionMismatchError("lmax_objective: dimension mismatch");
  }
  if (kind == LossKind::kMse) {
    double sq = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const double d = alpha * (candidate[i] - honest_mean_pred[i]);
      sq += d * d;
    }
    return 0.5 * sq;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double mixed =
        (1.0 - alpha) * honest_mean_pred[i] + alpha * candidate[i];
    acc -= honest_mean_pred[i] * std::log(std::max(mixed, kLogClamp));
  }
  return acc;
}

SimilarityMatrix build_similarity(std::span<const ProbVector> reference_preds) {
  if (reference_preds.size() < 2) {
    throw TooFewSamplesError("build_similarity: needs >= 2 samples");
  }
  const std::size_t c = reference_preds.front().size();
  std::vector<double> mean(c, 0.0);
  for (const ProbVector& p : reference_preds) {
    if (p.size() != c) {
      throw DimensionMismatchError("build_similarity: dimension mismatch");
    }
    for (std::size_t i = 0; i < c; ++i) mean[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(reference_preds.size());
  for (double& x : mean) x *= inv;

  Matrix cov(c, c);
  for (const ProbVector& p : reference_preds) {
    for (std::size_t i = 0; i < c; ++i) {
      const double di = p[i] - mean[i];
      for (std::size_t j = 0; j < c; ++j) {
        cov.at(i, j) += di * (p[j] - mean[j]);
      }
    }
  }
  for (double& x : cov.values) x *= inv;
  return SimilarityMatrix::validate(std::move(cov));
}

ProbVector cpa(const ProbVector& honest_mean_pred,
               const SimilarityMatrix& sim) {
  const std::size_t c = honest_mean_pred.size();
  if (sim.classes() != c) throw DimensionMismatchError("cpa: class count mismatch");
  const std::size_t i = honest_mean_pred.argmax();
  std::size_t j = 0;
  for (std::size_t k = 1; k < c; ++k) {
    if (sim.at(i, k) < sim.at(i, j)) j = k;
  }
  return one_hot(c, j);
}

std::vector<ProbVector> hips_hull(std::span<const ProbVector> honest_preds) {
  if (honest_preds.empty()) throw EmptyInputError("hips_hull: no honest clients");
  std::vector<ProbVector> vertices;
  for (const ProbVector& p : honest_preds) {
    bool duplicate = false;
    for (const ProbVector& q : vertices) {
      if (p.size() != q.size()) {
        throw DimensionMismatchError("hips_hull: dimension mismatch");
      }
      double max_diff = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(p[i] - q[i]));
      }
      if (max_diff <= kHullDedupeTol) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) vertices.push_back(p);
  }
  return vertices;
}

ProbVector hips_lma(std::span<const ProbVector> honest_preds,
                    const ProbVector& honest_mean_pred, double alpha,
                    LossKind kind) {
  if (honest_preds.empty()) throw EmptyInputError("hips_lma: no honest clients");
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw std::invalid_argument("hips_lma: alpha must lie in (0, 0.5)");
  }
  std::size_t best = 0;
  double best_value = lmax_objective(honest_mean_pred, honest_preds[0], alpha, kind);
  for (std::size_t i = 1; i < honest_preds.size(); ++i) {
    const double value =
        lmax_objective(honest_mean_pred, honest_preds[i], alpha, kind);
    if (value > best_value) {
      best = i;
      best_value = value;
    }
  }
  return honest_preds[best];
}

ProbVector hips_cpa(std::span<const ProbVector> honest_preds,
                    const ProbVector& honest_mean_pred,
                    const SimilarityMatrix& sim) {
  if (honest_preds.empty()) throw EmptyInputError("hips_cpa: no honest clients");
  const std::size_t c = honest_mean_pred.size();
  if (sim.classes() != c) {
    throw DimensionMismatchError("hips_cpa: class count mismatch");
  }
  const std::size_t row = honest_mean_pred.argmax();
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < honest_preds.size(); ++i) {
    const ProbVector& y = honest_preds[i];
    if (y.size() != c) throw DimensionMismatchError("hips_cpa: dimension mismatch");
    double value = 0.0;
    for (std::size_t k = 0; k < c; ++k) value += y[k] * sim.at(row, k);
    if (i == 0 || value < best_value) {
      best = i;
      best_value = value;
    }
  }
  return honest_preds[best];
}

std::vector<double> fedavg_gauss(std::size_t param_count, double noise_scale,
                                 std::uint64_t seed) {
  if (!(noise_scale > 0.0)) {
    throw std::invalid_argument("fedavg_gauss: scale must be > 0");
  }
  Rng rng(derive_seed(seed, {0x6a55}));
  std::vector<double> out(param_count);
  for (double& x : out) x = noise_scale * rng.normal();
  return out;
}

std::vector<double> fedavg_takeover(std::span<const double> target,
                                    const std::vector<std::vector<double>>& others,
                                    std::size_t total_clients) {
  if (total_clients < 1 || others.size() + 1 != total_clients) {
    throw std::invalid_argument(
        "fedavg_takeover: needs the other N-1 client updates");
  }
  std::vector<double> out(target.begin(), target.end());
  for (double& x : out) x *= static_cast<double>(total_clients);
  for (const auto& other : others) {
    if (other.size() != target.size()) {
      throw DimensionMismatchError("fedavg_takeover: parameter size mismatch");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= other[i];
  }
  return out;
}

}  // namespace feddist
