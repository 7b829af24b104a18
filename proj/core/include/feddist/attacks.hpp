#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddist/matrix.hpp"
#include "feddist/model.hpp"
#include "feddist/simplex.hpp"

namespace feddist {

enum class AttackKind {
  kNone,            // byzantine clients behave honestly
  kRlf,             // shared random one-hot label per sample
  kLma,             // one-hot on the least likely class of the honest mean
  kCpa,             // one-hot on the class least similar to the honest argmax
  kHipsLma,         // LMA restricted to the hull of honest predictions
  kHipsCpa,         // CPA restricted to the hull of honest predictions
  kFedavgGauss,     // parameter-space: gaussian noise instead of an update
  kFedavgTakeover,  // parameter-space: steer the parameter mean exactly
};

enum class SimilaritySource { kPretrained, kFile };

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  LossKind loss = LossKind::kCel;              // LMA / HIPS_LMA
  SimilaritySource similarity = SimilaritySource::kPretrained;  // CPA / HIPS_CPA
  std::string similarity_file;
  double noise_scale = 1.0;                    // FEDAVG_GAUSS
  std::uint64_t seed = 0;

  void check() const;
};

const char* attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);  // throws on unknown

struct TooFewSamplesError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Class-similarity matrix; symmetric within 1e-9, finite.
struct SimilarityMatrix {
  Matrix values;

  std::size_t classes() const { return values.rows; }
  double at(std::size_t i, std::size_t j) const { return values.at(i, j); }

  static SimilarityMatrix validate(Matrix m);
};

// Text format: first line `c`, then c rows of c space-separated reals.
SimilarityMatrix read_similarity(const std::string& path);
void write_similarity(const SimilarityMatrix& sim, const std::string& path);

// Arithmetic mean of the honest predictions at one sample.
ProbVector honest_mean(std::span<const ProbVector> honest_preds);

// One-hot on a uniformly random class; identical for all byzantine clients
// at a given (seed, sample) pair.
ProbVector rlf(std::size_t classes, std::uint64_t seed, std::size_t sample_index);

// Closed form of the loss-maximizing prediction: one-hot at the least likely
// class of the honest mean, ties toward the lowest index. Valid for both
// losses.
ProbVector lma(const ProbVector& honest_mean_pred, LossKind kind);

// The objective the prediction-space attacks maximize:
//   L((1-alpha) * honest_mean + alpha * candidate, honest_mean)
double lmax_objective(const ProbVector& honest_mean_pred,
                      const ProbVector& candidate, double alpha, LossKind kind);

// Sample covariance of a model's predictions over the public set,
// population-normalized. Symmetric PSD by construction.
SimilarityMatrix build_similarity(std::span<const ProbVector> reference_preds);

// One-hot at argmin_j C[i][j] where i is the honest argmax. The diagonal
// entry participates; for covariance-style matrices it carries the class's
// own variance and never wins, while degenerate matrices stay well-defined.
ProbVector cpa(const ProbVector& honest_mean_pred, const SimilarityMatrix& sim);

// Candidate vertex list of the attack hull: the honest predictions with
// duplicates (within 1e-12) removed.
std::vector<ProbVector> hips_hull(std::span<const ProbVector> honest_preds);

// Hull-restricted LMA: the honest prediction maximizing lmax_objective.
// Ties toward the lowest client index. Requires alpha in (0, 0.5).
ProbVector hips_lma(std::span<const ProbVector> honest_preds,
                    const ProbVector& honest_mean_pred, double alpha,
                    LossKind kind);

// Hull-restricted CPA: the honest prediction minimizing y^T C_i.
ProbVector hips_cpa(std::span<const ProbVector> honest_preds,
                    const ProbVector& honest_mean_pred,
                    const SimilarityMatrix& sim);

// i.i.d. N(0, scale^2) parameter vector.
std::vector<double> fedavg_gauss(std::size_t param_count, double noise_scale,
                                 std::uint64_t seed);

// target * N - sum(others); the mean over all N client updates then equals
// target exactly.
std::vector<double> fedavg_takeover(std::span<const double> target,
                                    const std::vector<std::vector<double>>& others,
                                    std::size_t total_clients);

}  // namespace feddist
