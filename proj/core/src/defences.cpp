#include "feddist/defences.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feddist/matrix.hpp"

namespace feddist {

namespace {

constexpr double kWeiszfeldEps = 1e-12;
constexpr double kDegenerateCovTol = 1e-30;

// indices of the k largest |scores|, ties toward the lower index
std::vector<std::size_t> largest_abs(const std::vector<double>& scores,
                                     std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(scores[a]) > std::abs(scores[b]);
  });
  order.resize(std::min(k, order.size()));
  return order;
}

}  // namespace

void DefenceSpec::check() const {
  if (kind == DefenceKind::kFilterScore && !expguard) {
    throw std::invalid_argument(
        "defence: filter_score is only defined as an expguard scoring rule");
  }
  if (kind == DefenceKind::kMean && expguard) {
    throw std::invalid_argument("defence: expguard base must be gm, cronus or "
                                "filter_score");
  }
}

const char* defence_kind_name(DefenceKind kind) {
  switch (kind) {
    case DefenceKind::kMean: return "mean";
    case DefenceKind::kGeometricMedian: return "gm";
    case DefenceKind::kCronus: return "cronus";
    case DefenceKind::kFilterScore: return "filter_score";
  }
  return "unknown";
}

DefenceKind parse_defence_kind(const std::string& name) {
  if (name == "mean") return DefenceKind::kMean;
  if (name == "gm") return DefenceKind::kGeometricMedian;
  if (name == "cronus") return DefenceKind::kCronus;
  if (name == "filter_score") return DefenceKind::kFilterScore;
  throw std::invalid_argument("unknown defence kind '" + name + "'");
}

std::string defence_label(const DefenceSpec& spec) {
  if (spec.kind == DefenceKind::kFilterScore) return "egf";
  std::string label = defence_kind_name(spec.kind);
  if (spec.expguard) label += "+expguard";
  return label;
}

AggregatorState AggregatorState::fresh(std::size_t clients) {
  if (clients == 0) throw EmptyInputError("aggregator state: no clients");
  return AggregatorState{std::vector<double>(clients, 1.0), 0};
}

void AggregatorState::check() const {
  if (weights.empty()) throw EmptyInputError("aggregator state: no clients");
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("aggregator state: weights must stay positive");
    }
  }
}

ProbVector mean_agg(std::span<const ProbVector> preds,
                    std::span<const double> weights) {
  if (preds.empty()) throw EmptyInputError("mean_agg: no predictions");
  if (!weights.empty() && weights.size() != preds.size()) {
    throw DimensionMismatchError("mean_agg: weight count mismatch");
  }
  const std::size_t c = preds.front().size();
  std::vector<double> acc(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0) throw std::invalid_argument("mean_agg: negative weight");
    if (preds[i].size() != c) {
      throw DimensionMismatchError("mean_agg: dimension mismatch");
    }
    for (std::size_t k = 0; k < c; ++k) acc[k] += w * preds[i][k];
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("mean_agg: zero total weight");
  for (double& x : acc) x /= total;
  return ProbVector::validate(std::move(acc));
}

GmResult geometric_median(std::span<const ProbVector> points, double tol,
                          std::size_t max_iter) {
  if (points.empty()) throw EmptyInputError("geometric_median: no points");
  if (points.size() == 1) return {points.front(), true, 0};

  const std::size_t c = points.front().size();
  std::vector<double> y = mean_agg(points).entries();
  std::vector<double> next(c);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double weight_sum = 0.0;
    for (const ProbVector& p : points) {
      const double d = std::max(
          l2_distance(std::span<const double>(p.entries()),
                      std::span<const double>(y)),
          kWeiszfeldEps);
      const double w = 1.0 / d;
      for (std::size_t k = 0; k < c; ++k) next[k] += w * p[k];
      weight_sum += w;
    }
    for (double& x : next) x /= weight_sum;
    const double step = l2_distance(std::span<const double>(next),
                                    std::span<const double>(y));
    y = next;
    if (step < tol) {
      return {ProbVector::validate(std::move(y)), true, it};
    }
  }
  return {ProbVector::validate(std::move(y)), false, max_iter};
}

FilterStats filter_stats(std::span<const ProbVector> preds) {
  if (preds.size() < 2) throw TooFewClientsError("filter_stats: needs >= 2 clients");
  const std::size_t n = preds.size();
  const std::size_t c = preds.front().size();

  FilterStats stats;
  stats.mean = mean_agg(preds).entries();

  Matrix cov(c, c);
  for (const ProbVector& p : preds) {
    for (std::size_t i = 0; i < c; ++i) {
      const double di = p[i] - stats.mean[i];
      for (std::size_t j = 0; j < c; ++j) {
        cov.at(i, j) += di * (p[j] - stats.mean[j]);
      }
    }
  }
  for (double& x : cov.values) x /= static_cast<double>(n);

  double max_abs = 0.0;
  for (double x : cov.values) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs <= kDegenerateCovTol) {
    // all clients (numerically) identical
    stats.degenerate = true;
    stats.eigenvector.assign(c, 0.0);
    stats.eigenvector[0] = 1.0;
    stats.scores.assign(n, 0.0);
    return stats;
  }

  stats.eigenvector = leading_eigenvector(cov, 1e-10, 1000);
  stats.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      s += (preds[i][k] - stats.mean[k]) * stats.eigenvector[k];
    }
    stats.scores[i] = s;
  }
  return stats;
}

ProbVector cronus_agg(std::span<const ProbVector> preds) {
  const std::size_t n = preds.size();
  if (n < 4) throw TooFewClientsError("cronus: needs >= 4 clients");
  const std::size_t target =
      (n + 1) / 2;  // ceil(N/2) of the original clients survive
  const std::size_t first_removal = (n + 3) / 4;  // ceil(N/4)

  std::vector<std::size_t> survivors(n);
  std::iota(survivors.begin(), survivors.end(), 0);

  const auto remove_worst = [&](std::size_t count) {
    std::vector<ProbVector> current;
    current.reserve(survivors.size());
    for (std::size_t idx : survivors) current.push_back(preds[idx]);
    const FilterStats stats = filter_stats(current);
    const auto worst = largest_abs(stats.scores, count);
    std::vector<bool> drop(survivors.size(), false);
    for (std::size_t w : worst) drop[w] = true;
    std::vector<std::size_t> kept;
    kept.reserve(survivors.size() - count);
    for (std::size_t i = 0; i < survivors.size(); ++i) {
      if (!drop[i]) kept.push_back(survivors[i]);
    }
    survivors = std::move(kept);
  };

  remove_worst(first_removal);
  if (survivors.size() > target) remove_worst(survivors.size() - target);

  std::vector<ProbVector> kept;
  kept.reserve(survivors.size());
  for (std::size_t idx : survivors) kept.push_back(preds[idx]);
  return mean_agg(kept);
}

std::vector<double> expguard_scores(const PredictionSet& preds,
                                    DefenceKind base) {
  const std::size_t n = preds.clients();
  if (n < 2) throw TooFewClientsError("expguard_scores: needs >= 2 clients");
  std::vector<double> scores(n, 0.0);

  for (std::size_t x = 0; x < preds.samples(); ++x) {
    const std::vector<ProbVector> column = preds.column(x);
    switch (base) {
      case DefenceKind::kGeometricMedian: {
        const ProbVector robust = geometric_median(column).point;
        for (std::size_t i = 0; i < n; ++i) {
          scores[i] += l2_distance(column[i], robust);
        }
        break;
      }
      case DefenceKind::kCronus: {
        const ProbVector robust = cronus_agg(column);
        for (std::size_t i = 0; i < n; ++i) {
          scores[i] += l2_distance(column[i], robust);
        }
        break;
      }
      case DefenceKind::kFilterScore: {
        const FilterStats stats = filter_stats(column);
        for (std::size_t i = 0; i < n; ++i) scores[i] += std::abs(stats.scores[i]);
        break;
      }
      case DefenceKind::kMean:
        throw std::invalid_argument(
            "expguard_scores: base must be gm, cronus or filter_score");
    }
  }

  // min-max rescale to [0, 1]: scale-free in the public-set size and wide
  // enough that coordinated outliers decay quickly relative to the cluster
  const auto [min_it, max_it] = std::minmax_element(scores.begin(), scores.end());
  const double spread = *max_it - *min_it;
  if (spread > 0.0) {
    const double lo = *min_it;
    for (double& s : scores) s = (s - lo) / spread;
  } else {
    std::fill(scores.begin(), scores.end(), 0.0);
  }
  return scores;
}

AggregatorState expguard_update(const AggregatorState& state,
                                std::span<const double> scores) {
  state.check();
  if (scores.size() != state.weights.size()) {
    throw DimensionMismatchError("expguard_update: score count mismatch");
  }
  AggregatorState next = state;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < 0.0) {
      throw std::invalid_argument("expguard_update: scores must be >= 0");
    }
    next.weights[i] = state.weights[i] * std::exp(-scores[i]);
  }
  // rescale so the weights sum to N; ratios are preserved
  const double total = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
  const double scale = static_cast<double>(next.weights.size()) / total;
  for (double& w : next.weights) w *= scale;
  next.round = state.round + 1;
  next.check();
  return next;
}

std::vector<ProbVector> expguard_aggregate(const PredictionSet& preds,
                                           const AggregatorState& state) {
  state.check();
  if (state.weights.size() != preds.clients()) {
    throw DimensionMismatchError("expguard_aggregate: weight count mismatch");
  }
  std::vector<ProbVector> labels;
  labels.reserve(preds.samples());
  for (std::size_t x = 0; x < preds.samples(); ++x) {
    const std::vector<ProbVector> column = preds.column(x);
    labels.push_back(mean_agg(column, state.weights));
  }
  return labels;
}

AggregationOutcome aggregate_predictions(const PredictionSet& preds,
                                         const DefenceSpec& spec,
                                         AggregatorState state) {
  spec.check();
  AggregationOutcome outcome{{}, std::move(state), {}};
  if (spec.expguard) {
    outcome.scores = expguard_scores(preds, spec.kind);
    outcome.state = expguard_update(outcome.state, outcome.scores);
    outcome.labels = expguard_aggregate(preds, outcome.state);
    return outcome;
  }
  outcome.state.round += 1;
  outcome.labels.reserve(preds.samples());
  for (std::size_t x = 0; x < preds.samples(); ++x) {
    const std::vector<ProbVector> column = preds.column(x);
    switch (spec.kind) {
      case DefenceKind::kMean:
        outcome.labels.push_back(mean_agg(column));
        break;
      case DefenceKind::kGeometricMedian:
        outcome.labels.push_back(geometric_median(column).point);
        break;
      case DefenceKind::kCronus:
        outcome.labels.push_back(cronus_agg(column));
        break;
      case DefenceKind::kFilterScore:
        break;  // unreachable; rejected by spec.check()
    }
  }
  return outcome;
}

}  // namespace feddist
