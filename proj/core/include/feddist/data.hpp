#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddist {

inline constexpr int kUnlabeled = -1;

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what);
  std::size_t line;
};

struct PlanInfeasibleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;  // kUnlabeled for unlabeled samples

  std::size_t size() const { return features.size(); }
  void check() const;
};

struct SplitPlan {
  std::size_t clients = 1;
  double private_frac = 0.5;
  double public_frac = 0.3;
  double validation_frac = 0.05;
  double test_frac = 0.15;
  std::uint64_t seed = 0;

  void check() const;  // fractions sum to 1
};

struct SplitResult {
  std::vector<Dataset> privates;  // one per client, labeled
  Dataset public_unlabeled;       // labels stripped
  std::vector<int> public_labels; // withheld labels, kept for diagnostics
  Dataset validation;
  Dataset test;
};

// Gaussian clusters with deterministic centers (scaled axis directions for
// the first dim classes, seeded random unit directions beyond that).
Dataset make_blobs(std::size_t classes, std::size_t dim,
                   std::size_t per_class, double spread, std::uint64_t seed);

// Seeded-shuffle disjoint partition; private samples are split evenly across
// clients with the remainder going to the lowest client ids.
SplitResult split(const Dataset& ds, const SplitPlan& plan);

// Text format: first line "M d c", then M lines of d reals followed by an
// integer label or '?' for unlabeled. Lossless round-trip.
Dataset read_dataset(const std::string& path);
void write_dataset(const Dataset& ds, const std::string& path);

}  // namespace feddist
