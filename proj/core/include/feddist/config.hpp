#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddist/attacks.hpp"
#include "feddist/data.hpp"
#include "feddist/defences.hpp"
#include "feddist/model.hpp"

namespace feddist {

enum class Branch { kFd, kFedavg };

const char* branch_name(Branch b);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataSpec {
  enum class Kind { kBlobs, kFile };
  Kind kind = Kind::kBlobs;
  std::size_t classes = 5;
  std::size_t dim = 20;
  std::size_t per_class = 400;
  double spread = 1.0;
  std::string path;  // kFile
};

// Full declarative description of one run. Parsed from flat key=value text
// with dotted section prefixes (see docs/config_keys.md for the key list).
struct ExperimentConfig {
  Branch branch = Branch::kFd;
  std::size_t clients = 20;
  double alpha = 0.45;
  std::size_t rounds = 10;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // sweep only; defaults to {seed}
  bool broadcast = true;

  AttackSpec attack;
  DefenceSpec defence;

  std::vector<std::size_t> hidden = {32};
  Activation activation = Activation::kTanh;
  LossKind server_loss = LossKind::kCel;

  // per-round epochs; the client decay stretches over rounds * epochs
  TrainSchedule client_schedule;
  TrainSchedule server_schedule;

  DataSpec data;
  SplitPlan split_plan;  // seed field is overridden by the run seed

  std::size_t byzantine_count() const;
  void check() const;  // throws ConfigError

  // Canonical serialization of every semantic field; two configs hash equal
  // iff they describe the same experiment.
  std::string canonical_string() const;
  std::uint64_t config_hash() const;
};

// Parses the flat key=value format. Unknown keys and malformed values throw
// ConfigError naming the offending key. '#' starts a comment.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace feddist
