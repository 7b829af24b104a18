#include "feddist/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "feddist/attacks.hpp"
#include "feddist/defences.hpp"
#include "feddist/rng.hpp"

namespace feddist {

namespace {

// seed-path tags for the independent RNG streams of one run
constexpr std::uint64_t kDataTag = 0xda7a;
constexpr std::uint64_t kSplitTag = 0x59117;
constexpr std::uint64_t kServerTag = 0x5e17e;
constexpr std::uint64_t kClientTag = 0xc11e;
constexpr std::uint64_t kAttackTag = 0xa77ac;
constexpr std::uint64_t kPretrainTag = 0x9e7a;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Dataset resolve_dataset(const ExperimentConfig& config) {
  if (config.data.kind == DataSpec::Kind::kFile) {
    Dataset ds = read_dataset(config.data.path);
    ds.check();
    return ds;
  }
  return make_blobs(config.data.classes, config.data.dim, config.data.per_class,
                    config.data.spread, derive_seed(config.seed, {kDataTag}));
}

std::vector<SoftExample> to_soft_examples(const Dataset& ds) {
  std::vector<SoftExample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == kUnlabeled) {
      throw std::invalid_argument("cannot train on unlabeled samples");
    }
    out.push_back({ds.features[i],
                   one_hot(ds.classes, static_cast<std::size_t>(ds.labels[i]))});
  }
  return out;
}

std::vector<SoftExample> to_soft_examples(const Dataset& features,
                                          std::span<const ProbVector> labels) {
  std::vector<SoftExample> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.push_back({features.features[i], labels[i]});
  }
  return out;
}

TrainSchedule client_schedule_for_round(const ExperimentConfig& config,
                                        std::size_t round) {
  TrainSchedule s = config.client_schedule;
  s.decay = TrainSchedule::Decay::kGlobalBudget;
  s.global_epoch_budget = config.rounds * s.epochs;
  s.epoch_offset = round * s.epochs;
  return s;
}

TrainSchedule server_schedule(const ExperimentConfig& config) {
  TrainSchedule s = config.server_schedule;
  s.decay = TrainSchedule::Decay::kOwnEpochs;
  s.loss = config.server_loss;
  return s;
}

struct RunSetup {
  SplitResult splits;
  Architecture arch;
  std::vector<ClientState> clients;
  std::uint64_t attack_seed = 0;
};

RunSetup prepare_run(const ExperimentConfig& config) {
  config.check();
  RunSetup setup;

  Dataset all = resolve_dataset(config);
  SplitPlan plan = config.split_plan;
  plan.clients = config.clients;
  plan.seed = derive_seed(config.seed, {kSplitTag});
  setup.splits = split(all, plan);

  setup.arch.input_dim = all.dim;
  setup.arch.classes = all.classes;
  setup.arch.hidden = config.hidden;
  setup.arch.activation = config.activation;
  setup.arch.check();

  const std::size_t byz = config.byzantine_count();
  const ModelParams server_init =
      init(setup.arch, derive_seed(config.seed, {kServerTag, 0}));
  for (std::size_t id = 0; id < config.clients; ++id) {
    ClientState client;
    client.id = id;
    client.byzantine = id >= config.clients - byz;  // the last B ids
    client.params = server_init;
    client.private_data = std::move(setup.splits.privates[id]);
    client.seed = derive_seed(config.seed, {kClientTag, id});
    setup.clients.push_back(std::move(client));
  }

  setup.attack_seed = config.attack.seed != 0
                          ? config.attack.seed
                          : derive_seed(config.seed, {kAttackTag});
  return setup;
}

// Similarity matrix for CPA-style attacks: either read from file, or built
// from the predictions of a model trained centrally on all private data.
SimilarityMatrix resolve_similarity(const ExperimentConfig& config,
                                    const RunSetup& setup) {
  if (config.attack.similarity == SimilaritySource::kFile) {
    return read_similarity(config.attack.similarity_file);
  }
  std::vector<SoftExample> all_training;
  for (const ClientState& client : setup.clients) {
    const auto part = to_soft_examples(client.private_data);
    all_training.insert(all_training.end(), part.begin(), part.end());
  }
  TrainSchedule sched = server_schedule(config);
  ModelParams reference =
      init(setup.arch, derive_seed(config.seed, {kPretrainTag}));
  reference = train(std::move(reference), all_training, sched,
                    derive_seed(config.seed, {kPretrainTag, 1}));
  std::vector<ProbVector> preds;
  preds.reserve(setup.splits.public_unlabeled.size());
  for (const auto& x : setup.splits.public_unlabeled.features) {
    preds.push_back(forward(reference, x));
  }
  return build_similarity(preds);
}

std::vector<std::size_t> honest_ids(const std::vector<ClientState>& clients) {
  std::vector<std::size_t> ids;
  for (const ClientState& c : clients) {
    if (!c.byzantine) ids.push_back(c.id);
  }
  return ids;
}

}  // namespace

RunError::RunError(std::size_t round, const std::string& what)
    : std::runtime_error("round " + std::to_string(round) + ": " + what),
      round(round) {}

double honest_label_distance(std::span<const ProbVector> aggregated,
                             std::span<const ProbVector> honest) {
  if (aggregated.size() != honest.size()) {
    throw DimensionMismatchError("honest_label_distance: shape mismatch");
  }
  if (aggregated.empty()) throw EmptyInputError("honest_label_distance: empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < aggregated.size(); ++i) {
    acc += l2_distance(aggregated[i], honest[i]);
  }
  return acc / static_cast<double>(aggregated.size());
}

double accuracy(const ModelParams& params, const Dataset& ds) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == kUnlabeled) continue;
    ++total;
    if (forward(params, ds.features[i]).argmax() ==
        static_cast<std::size_t>(ds.labels[i])) {
      ++correct;
    }
  }
  if (total == 0) throw EmptyInputError("accuracy: no labeled samples");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<RoundRecord> run_fd(const ExperimentConfig& config,
                                const RunHooks* hooks) {
  if (config.branch != Branch::kFd) {
    throw ConfigError("run_fd: config branch is not fd");
  }
  RunSetup setup = prepare_run(config);
  const Dataset& pub = setup.splits.public_unlabeled;
  const std::size_t samples = pub.size();
  const std::size_t classes = setup.arch.classes;
  const bool behave_honestly = config.attack.kind == AttackKind::kNone;

  SimilarityMatrix sim{Matrix(2, 2)};
  if (config.attack.kind == AttackKind::kCpa ||
      config.attack.kind == AttackKind::kHipsCpa) {
    sim = resolve_similarity(config, setup);
  }

  ModelParams server = init(setup.arch, derive_seed(config.seed, {kServerTag, 0}));
  AggregatorState state = AggregatorState::fresh(config.clients);
  const std::vector<std::size_t> honest = honest_ids(setup.clients);

  std::vector<RoundRecord> records;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    const auto round_start = Clock::now();

    if (config.broadcast) {
      for (ClientState& client : setup.clients) client.params = server;
    }

    const TrainSchedule client_sched = client_schedule_for_round(config, t);
    for (ClientState& client : setup.clients) {
      if (client.byzantine && !behave_honestly) continue;  // params never read
      try {
        client.params = train(std::move(client.params),
                              to_soft_examples(client.private_data),
                              client_sched, derive_seed(client.seed, {t}));
      } catch (const NonFiniteLossError& e) {
        throw RunError(t, e.what());
      }
    }
    if (hooks && hooks->after_client_training) {
      hooks->after_client_training(t, setup.clients);
    }

    PredictionSet preds(config.clients, samples, classes);
    for (const ClientState& client : setup.clients) {
      if (client.byzantine && !behave_honestly) continue;
      for (std::size_t x = 0; x < samples; ++x) {
        preds.set(client.id, x, forward(client.params, pub.features[x]));
      }
    }

    std::vector<ProbVector> honest_means;
    honest_means.reserve(samples);
    for (std::size_t x = 0; x < samples; ++x) {
      std::vector<ProbVector> column;
      column.reserve(honest.size());
      for (std::size_t id : honest) column.push_back(preds.at(id, x));
      honest_means.push_back(honest_mean(column));
    }

    if (!behave_honestly && config.byzantine_count() > 0) {
      for (std::size_t x = 0; x < samples; ++x) {
        std::vector<ProbVector> column;
        column.reserve(honest.size());
        for (std::size_t id : honest) column.push_back(preds.at(id, x));
        ProbVector attack_pred = [&]() -> ProbVector {
          switch (config.attack.kind) {
            case AttackKind::kRlf:
              return rlf(classes, setup.attack_seed, x);
            case AttackKind::kLma:
              return lma(honest_means[x], config.attack.loss);
            case AttackKind::kCpa:
              return cpa(honest_means[x], sim);
            case AttackKind::kHipsLma:
              return hips_lma(column, honest_means[x], config.alpha,
                              config.attack.loss);
            case AttackKind::kHipsCpa:
              return hips_cpa(column, honest_means[x], sim);
            default:
              throw ConfigError("attack kind not valid for the fd branch");
          }
        }();
        // byzantine clients collude: every row carries the same vector
        for (const ClientState& client : setup.clients) {
          if (client.byzantine) preds.set(client.id, x, attack_pred);
        }
      }
    }

    AggregationOutcome outcome =
        aggregate_predictions(preds, config.defence, std::move(state));
    state = std::move(outcome.state);
    if (hooks && hooks->after_aggregation) {
      hooks->after_aggregation(t, preds, outcome.labels);
    }

    server = init(setup.arch, derive_seed(config.seed, {kServerTag, t + 1}));
    try {
      server = train(std::move(server), to_soft_examples(pub, outcome.labels),
                     server_schedule(config),
                     derive_seed(config.seed, {kServerTag, t, 0x7a}));
    } catch (const NonFiniteLossError& e) {
      throw RunError(t, e.what());
    }
    if (hooks && hooks->after_server_training) {
      hooks->after_server_training(t, server);
    }

    RoundRecord record;
    record.round = t;
    record.test_accuracy = accuracy(server, setup.splits.test);
    record.validation_accuracy = accuracy(server, setup.splits.validation);
    record.weights = state.weights;
    record.honest_label_distance =
        honest_label_distance(outcome.labels, honest_means);
    record.wall_ms = elapsed_ms(round_start);
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<RoundRecord> run_fedavg(const ExperimentConfig& config,
                                    const RunHooks* hooks) {
  if (config.branch != Branch::kFedavg) {
    throw ConfigError("run_fedavg: config branch is not fedavg");
  }
  RunSetup setup = prepare_run(config);
  const std::size_t param_count = setup.arch.param_count();
  const bool behave_honestly = config.attack.kind == AttackKind::kNone;

  ModelParams server = init(setup.arch, derive_seed(config.seed, {kServerTag, 0}));

  std::vector<RoundRecord> records;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    const auto round_start = Clock::now();

    for (ClientState& client : setup.clients) client.params = server;

    const TrainSchedule client_sched = client_schedule_for_round(config, t);
    std::vector<std::vector<double>> sent(config.clients);
    for (ClientState& client : setup.clients) {
      if (client.byzantine && !behave_honestly) continue;
      try {
        client.params = train(std::move(client.params),
                              to_soft_examples(client.private_data),
                              client_sched, derive_seed(client.seed, {t}));
      } catch (const NonFiniteLossError& e) {
        throw RunError(t, e.what());
      }
      sent[client.id] = client.params.values;
    }

    if (!behave_honestly && config.byzantine_count() > 0) {
      switch (config.attack.kind) {
        case AttackKind::kFedavgGauss: {
          for (const ClientState& client : setup.clients) {
            if (!client.byzantine) continue;
            sent[client.id] = fedavg_gauss(
                param_count, config.attack.noise_scale,
                derive_seed(setup.attack_seed, {client.id, t}));
          }
          break;
        }
        case AttackKind::kFedavgTakeover: {
          // one designated client steers the mean; fellow byzantine clients
          // just echo the broadcast parameters
          std::size_t designated = config.clients;
          for (const ClientState& client : setup.clients) {
            if (client.byzantine) {
              designated = std::min(designated, client.id);
              if (sent[client.id].empty()) sent[client.id] = client.params.values;
            }
          }
          std::vector<std::vector<double>> others;
          others.reserve(config.clients - 1);
          for (std::size_t id = 0; id < config.clients; ++id) {
            if (id != designated) others.push_back(sent[id]);
          }
          const std::vector<double> target(param_count, 0.0);
          sent[designated] = fedavg_takeover(target, others, config.clients);
          break;
        }
        default:
          throw ConfigError("attack kind not valid for the fedavg branch");
      }
    }

    std::vector<double> mean(param_count, 0.0);
    for (const auto& update : sent) {
      for (std::size_t i = 0; i < param_count; ++i) mean[i] += update[i];
    }
    for (double& x : mean) x /= static_cast<double>(config.clients);
    server.values = std::move(mean);

    if (hooks && hooks->after_server_training) {
      hooks->after_server_training(t, server);
    }

    RoundRecord record;
    record.round = t;
    record.test_accuracy = accuracy(server, setup.splits.test);
    record.validation_accuracy = accuracy(server, setup.splits.validation);
    record.weights.assign(config.clients, 1.0);
    record.honest_label_distance = 0.0;
    record.wall_ms = elapsed_ms(round_start);
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<RoundRecord> run_experiment(const ExperimentConfig& config,
                                        const RunHooks* hooks) {
  return config.branch == Branch::kFd ? run_fd(config, hooks)
                                      : run_fedavg(config, hooks);
}

}  // namespace feddist
