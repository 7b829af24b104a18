#include "feddist/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace feddist {

namespace {

std::string negative_entry_msg(std::size_t index, double value) {
  return "negative entry at index " + std::to_string(index) + ": " +
         std::to_string(value);
}

std::string sum_not_one_msg(double deviation) {
  return "entries sum to 1" + std::string(deviation >= 0 ? "+" : "") +
         std::to_string(deviation) + ", outside tolerance";
}

}  // namespace

NegativeEntryError::NegativeEntryError(std::size_t index, double value)
    : std::invalid_argument(negative_entry_msg(index, value)),
      index(index),
      value(value) {}

SumNotOneError::SumNotOneError(double deviation)
    : std::invalid_argument(sum_not_one_msg(deviation)), deviation(deviation) {}

ProbVector ProbVector::validate(std::vector<double> entries) {
  if (entries.size() < 2) {
    throw DimensionMismatchError("probability vector needs >= 2 classes");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double e = entries[i];
    if (!std::isfinite(e) || e < 0.0) throw NegativeEntryError(i, e);
    sum += e;
  }
  if (std::abs(sum - 1.0) > kSimplexSumTol) throw SumNotOneError(sum - 1.0);
  return ProbVector(std::move(entries));
}

std::size_t ProbVector::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(entries_.begin(), entries_.end()) - entries_.begin());
}

std::size_t ProbVector::argmin() const {
  return static_cast<std::size_t>(
      std::min_element(entries_.begin(), entries_.end()) - entries_.begin());
}

double ProbVector::min_entry() const {
  return *std::min_element(entries_.begin(), entries_.end());
}

ProbVector one_hot(std::size_t classes, std::size_t index) {
  if (index >= classes) throw DimensionMismatchError("one_hot index out of range");
  std::vector<double> v(classes, 0.0);
  v[index] = 1.0;
  return ProbVector::validate(std::move(v));
}

ProbVector uniform_prob(std::size_t classes) {
  std::vector<double> v(classes, 1.0 / static_cast<double>(classes));
  return ProbVector::validate(std::move(v));
}

ProbVector mix(const ProbVector& honest, const ProbVector& byzantine,
               double alpha) {
  if (honest.size() != byzantine.size()) {
    throw DimensionMismatchError("mix: dimension mismatch");
  }
  if (alpha < 0.0 || alpha >= 1.0) {
    throw std::invalid_argument("mix: alpha must lie in [0, 1)");
  }
  std::vector<double> out(honest.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - alpha) * honest[i] + alpha * byzantine[i];
  }
  return ProbVector::validate(std::move(out));
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatchError("l2_distance: dimension mismatch");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double l2_distance(const ProbVector& a, const ProbVector& b) {
  return l2_distance(std::span<const double>(a.entries()),
                     std::span<const double>(b.entries()));
}

std::vector<double> coordwise_median(std::span<const ProbVector> points) {
  if (points.empty()) throw EmptyInputError("coordwise_median: empty input");
  const std::size_t c = points.front().size();
  for (const auto& p : points) {
    if (p.size() != c) {
      throw DimensionMismatchError("coordwise_median: dimension mismatch");
    }
  }
  std::vector<double> out(c);
  std::vector<double> column(points.size());
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) column[i] = points[i][j];
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    out[j] = (n % 2 == 1) ? column[n / 2]
                          : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

PredictionSet::PredictionSet(std::size_t clients, std::size_t samples,
                             std::size_t classes)
    : clients_(clients), samples_(samples), classes_(classes) {
  if (clients == 0 || samples == 0) {
    throw EmptyInputError("PredictionSet: needs >= 1 client and sample");
  }
  table_.reserve(clients * samples);
  for (std::size_t i = 0; i < clients * samples; ++i) {
    table_.push_back(uniform_prob(classes));
  }
}

const ProbVector& PredictionSet::at(std::size_t client,
                                    std::size_t sample) const {
  if (client >= clients_ || sample >= samples_) {
    throw DimensionMismatchError("PredictionSet::at: index out of range");
  }
  return table_[client * samples_ + sample];
}

void PredictionSet::set(std::size_t client, std::size_t sample,
                        ProbVector value) {
  if (client >= clients_ || sample >= samples_) {
    throw DimensionMismatchError("PredictionSet::set: index out of range");
  }
  if (value.size() != classes_) {
    throw DimensionMismatchError("PredictionSet::set: wrong class count");
  }
  table_[client * samples_ + sample] = std::move(value);
}

std::vector<ProbVector> PredictionSet::column(std::size_t sample) const {
  std::vector<ProbVector> out;
  out.reserve(clients_);
  for (std::size_t i = 0; i < clients_; ++i) out.push_back(at(i, sample));
  return out;
}

}  // namespace feddist
