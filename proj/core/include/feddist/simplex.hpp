#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddist {

inline constexpr double kSimplexSumTol = 1e-9;

struct NegativeEntryError : std::invalid_argument {
  NegativeEntryError(std::size_t index, double value);
  std::size_t index;
  double value;
};

struct SumNotOneError : std::invalid_argument {
  explicit SumNotOneError(double deviation);
  double deviation;  // sum - 1
};

struct DimensionMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A point in the probability simplex: >= 2 non-negative entries summing to
// one within kSimplexSumTol. Construction goes through validate(); entries
// that fail the invariants are rejected, never renormalized.
class ProbVector {
 public:
  static ProbVector validate(std::vector<double> entries);

  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<double>& entries() const { return entries_; }

  std::size_t argmax() const;  // ties broken toward the lowest index
  std::size_t argmin() const;
  double min_entry() const;

  bool operator==(const ProbVector& other) const = default;

 private:
  explicit ProbVector(std::vector<double> entries) : entries_(std::move(entries)) {}
  std::vector<double> entries_;
};

ProbVector one_hot(std::size_t classes, std::size_t index);
ProbVector uniform_prob(std::size_t classes);

// alpha * byzantine + (1 - alpha) * honest, alpha in [0, 1)
ProbVector mix(const ProbVector& honest, const ProbVector& byzantine, double alpha);

double l2_distance(const ProbVector& a, const ProbVector& b);
double l2_distance(std::span<const double> a, std::span<const double> b);

// Per-coordinate median, returned as a raw vector on purpose: the result can
// leave the simplex, which is the reason it is not offered as an aggregator.
std::vector<double> coordwise_median(std::span<const ProbVector> points);

// N clients x M samples grid of predictions, rectangular by construction.
class PredictionSet {
 public:
  PredictionSet(std::size_t clients, std::size_t samples, std::size_t classes);

  std::size_t clients() const { return clients_; }
  std::size_t samples() const { return samples_; }
  std::size_t classes() const { return classes_; }

  const ProbVector& at(std::size_t client, std::size_t sample) const;
  void set(std::size_t client, std::size_t sample, ProbVector value);

  // one sample's predictions across all clients
  std::vector<ProbVector> column(std::size_t sample) const;

 private:
  std::size_t clients_;
  std::size_t samples_;
  std::size_t classes_;
  std::vector<ProbVector> table_;
};

}  // namespace feddist
