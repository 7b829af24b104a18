#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddist/simplex.hpp"

namespace feddist {

enum class DefenceKind { kMean, kGeometricMedian, kCronus, kFilterScore };

struct DefenceSpec {
  DefenceKind kind = DefenceKind::kMean;
  bool expguard = false;

  void check() const;  // FILTER_SCORE is only defined as an expguard scorer
};

const char* defence_kind_name(DefenceKind kind);
DefenceKind parse_defence_kind(const std::string& name);
// Short identifier used in metrics and sweep tables, e.g. "gm+expguard" or
// "egf" for expguard over filter scores.
std::string defence_label(const DefenceSpec& spec);

struct TooFewClientsError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Per-client multiplicative weights carried across rounds.
struct AggregatorState {
  std::vector<double> weights;
  std::size_t round = 0;

  static AggregatorState fresh(std::size_t clients);
  void check() const;  // all weights > 0
};

// (Weighted) arithmetic mean; empty weights means unweighted.
ProbVector mean_agg(std::span<const ProbVector> preds,
                    std::span<const double> weights = {});

struct GmResult {
  ProbVector point;
  bool converged = true;
  std::size_t iterations = 0;
};

// Weiszfeld iteration for argmin_y sum_i ||Y_i - y||. Iterates are convex
// combinations of the inputs, so the result stays in the simplex. Anchor
// coincidence is handled with an epsilon-regularized denominator.
GmResult geometric_median(std::span<const ProbVector> points,
                          double tol = 1e-9, std::size_t max_iter = 500);

struct FilterStats {
  std::vector<double> mean;
  std::vector<double> eigenvector;  // leading eigenvector of the covariance
  std::vector<double> scores;       // s_i = <Y_i - mean, v>
  bool degenerate = false;          // all clients identical: scores are 0
};

// Covariance (over clients, population-normalized) at one sample plus the
// projections of each client onto its leading eigenvector.
FilterStats filter_stats(std::span<const ProbVector> preds);

// Filtering aggregator: drop the ceil(N/4) largest |s_i|, recompute the
// stats on the survivors, drop more until ceil(N/2) of the original clients
// remain, then average the survivors. Requires N >= 4.
ProbVector cronus_agg(std::span<const ProbVector> preds);

// Per-client outlier scores over the whole prediction set.
//   GM / CRONUS:   sigma_i = sum_x ||Y_i(x) - robust(x)||
//   FILTER_SCORE:  sigma_i = sum_x |s_i(x)|   (no filtering)
// Scores are min-max rescaled to [0, 1] so the exponential update is
// scale-free in the public-set size; equal raw scores rescale to zero,
// which leaves the weights unchanged.
std::vector<double> expguard_scores(const PredictionSet& preds,
                                    DefenceKind base);

// p_i <- p_i * exp(-sigma_i), then rescaled to sum to N so long runs cannot
// underflow. Ratios, the only thing the weighted mean consumes, are
// unaffected by the rescale.
AggregatorState expguard_update(const AggregatorState& state,
                                std::span<const double> scores);

// Weighted mean per sample using the state's weights.
std::vector<ProbVector> expguard_aggregate(const PredictionSet& preds,
                                           const AggregatorState& state);

struct AggregationOutcome {
  std::vector<ProbVector> labels;   // one aggregated label per sample
  AggregatorState state;            // updated when expguard is on
  std::vector<double> scores;       // empty when expguard is off
};

// One communication round of aggregation under the given defence.
AggregationOutcome aggregate_predictions(const PredictionSet& preds,
                                         const DefenceSpec& spec,
                                         AggregatorState state);

}  // namespace feddist
