#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "feddist/matrix.hpp"
#include "feddist/simplex.hpp"

namespace feddist {

enum class Activation { kTanh, kRelu };
enum class LossKind { kCel, kMse };

struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArchTooLargeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fully connected classifier shape: input -> hidden... -> classes, with a
// softmax head. hidden may be empty (softmax regression).
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t classes = 0;
  Activation activation = Activation::kTanh;

  std::size_t param_count() const;
  void check() const;  // throws std::invalid_argument

  bool operator==(const Architecture&) const = default;
};

// Flat parameter vector, laid out layer by layer: weight matrix (out x in,
// row-major) followed by the bias vector.
struct ModelParams {
  Architecture arch;
  std::vector<double> values;

  void check() const;  // length matches arch, all entries finite
};

struct SoftExample {
  std::vector<double> features;
  ProbVector target;
};

struct TrainSchedule {
  enum class Decay {
    kOwnEpochs,     // learning rate decays linearly to zero over `epochs`
    kGlobalBudget,  // decay spans [epoch_offset, global_epoch_budget)
  };

  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  LossKind loss = LossKind::kCel;
  Decay decay = Decay::kOwnEpochs;
  std::size_t global_epoch_budget = 0;  // used by kGlobalBudget
  std::size_t epoch_offset = 0;         // used by kGlobalBudget

  void check() const;
};

// Deterministic per-layer scaled-uniform initialization; biases start at 0.
ModelParams init(const Architecture& arch, std::uint64_t seed);

// Softmax output; always strictly interior to the simplex.
ProbVector forward(const ModelParams& params, std::span<const double> x);

// CEL(target, h) = -sum target_i * log(max(h_i, 1e-12))
// MSE = 0.5 * ||h - target||^2
double loss(const ModelParams& params, std::span<const double> x,
            const ProbVector& target, LossKind kind);

// Mean gradient over the batch, accumulated in index order so the result is
// independent of any outer parallelism.
std::vector<double> grad(const ModelParams& params,
                         std::span<const SoftExample> batch, LossKind kind);

enum class JacobianOf { kLogits, kProbabilities };

inline constexpr std::size_t kDefaultJacobianParamLimit = 10'000;

// Exact Jacobian (outputs x params) via one reverse sweep per output row.
// Meant for verification on tiny nets; throws ArchTooLarge above the limit.
Matrix jacobian(const ModelParams& params, std::span<const double> x,
                JacobianOf of,
                std::size_t param_limit = kDefaultJacobianParamLimit);

// SGD with momentum, weight decay and a linear learning-rate decay.
// Deterministic given the seed: fixed shuffle stream and fixed reduction
// order. Throws NonFiniteLoss when parameters stop being finite.
ModelParams train(ModelParams params, std::span<const SoftExample> dataset,
                  const TrainSchedule& schedule, std::uint64_t seed);

}  // namespace feddist
