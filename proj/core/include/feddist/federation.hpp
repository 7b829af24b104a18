#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "feddist/config.hpp"
#include "feddist/data.hpp"
#include "feddist/model.hpp"
#include "feddist/simplex.hpp"

namespace feddist {

struct RunError : std::runtime_error {
  RunError(std::size_t round, const std::string& what);
  std::size_t round;
};

struct ClientState {
  std::size_t id = 0;
  bool byzantine = false;
  ModelParams params;
  Dataset private_data;
  std::uint64_t seed = 0;
};

struct RoundRecord {
  std::size_t round = 0;
  double test_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::vector<double> weights;        // per-client aggregator weights
  double honest_label_distance = 0.0; // mean over the public set; 0 for fedavg
  double wall_ms = 0.0;
};

// Test-only observation/mutation points. The server path never reads
// byzantine parameters in FD, and the hooks make that checkable.
struct RunHooks {
  std::function<void(std::size_t round, std::vector<ClientState>&)>
      after_client_training;
  std::function<void(std::size_t round, const PredictionSet&,
                     std::span<const ProbVector> aggregated)>
      after_aggregation;
  std::function<void(std::size_t round, const ModelParams& server)>
      after_server_training;
};

// Mean l2 distance between two label sets of the same shape.
double honest_label_distance(std::span<const ProbVector> aggregated,
                             std::span<const ProbVector> honest);

// The FD round loop: broadcast, local training, prediction exchange,
// robust aggregation, server distillation from the aggregated labels.
std::vector<RoundRecord> run_fd(const ExperimentConfig& config,
                                const RunHooks* hooks = nullptr);

// Vanilla parameter averaging with byzantine clients substituting their
// updates; exists for the baseline comparison against FD.
std::vector<RoundRecord> run_fedavg(const ExperimentConfig& config,
                                    const RunHooks* hooks = nullptr);

std::vector<RoundRecord> run_experiment(const ExperimentConfig& config,
                                        const RunHooks* hooks = nullptr);

// Fraction of correctly argmax-classified samples.
double accuracy(const ModelParams& params, const Dataset& ds);

}  // namespace feddist
