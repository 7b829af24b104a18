#include <doctest.h>

#include <cmath>
#include <vector>

#include "feddist/attacks.hpp"
#include "feddist/federation.hpp"
#include "feddist/metrics.hpp"
#include "test_util.hpp"

using namespace feddist;

namespace {

ExperimentConfig tiny_fd_config() {
  ExperimentConfig cfg;
  cfg.branch = Branch::kFd;
  cfg.clients = 5;
  cfg.alpha = 0.4;  // 2 byzantine
  cfg.rounds = 2;
  cfg.seed = 1;
  cfg.attack.kind = AttackKind::kLma;
  cfg.defence = {DefenceKind::kMean, false};
  cfg.hidden = {8};
  cfg.client_schedule.epochs = 4;
  cfg.client_schedule.batch_size = 16;
  cfg.client_schedule.learning_rate = 0.1;
  cfg.client_schedule.weight_decay = 1e-4;
  cfg.server_schedule.epochs = 8;
  cfg.server_schedule.batch_size = 32;
  cfg.server_schedule.learning_rate = 0.1;
  cfg.server_schedule.weight_decay = 1e-4;
  cfg.data.classes = 3;
  cfg.data.dim = 4;
  cfg.data.per_class = 200;  // 600 samples, 90-sample test split
  cfg.data.spread = 0.8;
  return cfg;
}

bool records_equal_modulo_wall_time(const std::vector<RoundRecord>& a,
                                    const std::vector<RoundRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].round != b[i].round) return false;
    if (a[i].test_accuracy != b[i].test_accuracy) return false;
    if (a[i].validation_accuracy != b[i].validation_accuracy) return false;
    if (a[i].weights != b[i].weights) return false;
    if (a[i].honest_label_distance != b[i].honest_label_distance) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("federation");

TEST_CASE("honest label distance basics") {
  Rng rng(21);
  std::vector<ProbVector> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(testutil::random_point(rng, 4));
  CHECK(honest_label_distance(labels, labels) == 0.0);

  std::vector<ProbVector> other;
  for (int i = 0; i < 10; ++i) other.push_back(testutil::random_point(rng, 4));
  const double d = honest_label_distance(labels, other);
  CHECK(d >= 0.0);
  CHECK(d <= std::sqrt(2.0));

  other.pop_back();
  CHECK_THROWS_AS(honest_label_distance(labels, other), DimensionMismatchError);
}

TEST_CASE("benign fd run learns") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.alpha = 0.0;
  cfg.attack.kind = AttackKind::kNone;
  const auto records = run_fd(cfg);
  REQUIRE(records.size() == 2);
  CHECK(records.back().test_accuracy >= records.front().test_accuracy - 0.02);
  // with the mean defence and no byzantine rows, the aggregate is the
  // honest mean itself
  for (const RoundRecord& r : records) {
    CHECK(r.honest_label_distance == 0.0);
  }
}

TEST_CASE("fd runs are deterministic") {
  const ExperimentConfig cfg = tiny_fd_config();
  const auto a = run_fd(cfg);
  const auto b = run_fd(cfg);
  CHECK(records_equal_modulo_wall_time(a, b));
}

TEST_CASE("alpha at one half is rejected") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.clients = 4;
  cfg.alpha = 0.5;
  CHECK_THROWS_AS(run_fd(cfg), ConfigError);
}

TEST_CASE("byzantine parameters never reach the server in fd") {
  const ExperimentConfig cfg = tiny_fd_config();

  std::vector<std::vector<double>> plain_servers;
  RunHooks plain_hooks;
  plain_hooks.after_server_training = [&](std::size_t, const ModelParams& m) {
    plain_servers.push_back(m.values);
  };
  const auto plain = run_fd(cfg, &plain_hooks);

  std::vector<std::vector<double>> corrupted_servers;
  RunHooks corrupt_hooks;
  corrupt_hooks.after_client_training = [](std::size_t,
                                           std::vector<ClientState>& clients) {
    for (ClientState& c : clients) {
      if (c.byzantine) {
        for (double& v : c.params.values) v = 1e6 + static_cast<double>(c.id);
      }
    }
  };
  corrupt_hooks.after_server_training = [&](std::size_t, const ModelParams& m) {
    corrupted_servers.push_back(m.values);
  };
  const auto corrupted = run_fd(cfg, &corrupt_hooks);

  CHECK(records_equal_modulo_wall_time(plain, corrupted));
  REQUIRE(plain_servers.size() == corrupted_servers.size());
  for (std::size_t i = 0; i < plain_servers.size(); ++i) {
    CHECK(plain_servers[i] == corrupted_servers[i]);  // bitwise
  }
}

TEST_CASE("mean defence keeps the aggregate within sqrt(2) alpha per sample") {
  ExperimentConfig cfg = tiny_fd_config();
  const std::size_t honest_count = cfg.clients - cfg.byzantine_count();
  const double bound = std::sqrt(2.0) * cfg.alpha + 1e-9;

  RunHooks hooks;
  hooks.after_aggregation = [&](std::size_t, const PredictionSet& preds,
                                std::span<const ProbVector> aggregated) {
    for (std::size_t x = 0; x < preds.samples(); ++x) {
      std::vector<ProbVector> honest;
      for (std::size_t id = 0; id < honest_count; ++id) {
        honest.push_back(preds.at(id, x));
      }
      CHECK(l2_distance(aggregated[x], honest_mean(honest)) <= bound);
    }
  };
  run_fd(cfg, &hooks);
}

TEST_CASE("client roles stay fixed across rounds") {
  ExperimentConfig cfg = tiny_fd_config();
  std::vector<std::vector<bool>> role_log;
  RunHooks hooks;
  hooks.after_client_training = [&](std::size_t,
                                    std::vector<ClientState>& clients) {
    std::vector<bool> roles;
    for (const ClientState& c : clients) roles.push_back(c.byzantine);
    role_log.push_back(std::move(roles));
  };
  run_fd(cfg, &hooks);
  REQUIRE(role_log.size() == cfg.rounds);
  for (const auto& roles : role_log) CHECK(roles == role_log.front());
  // the last alpha * N ids are byzantine
  CHECK(role_log.front() == std::vector<bool>{false, false, false, true, true});
}

TEST_CASE("branch and attack kinds must match") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.attack.kind = AttackKind::kFedavgGauss;
  CHECK_THROWS_AS(cfg.check(), ConfigError);

  cfg = tiny_fd_config();
  cfg.branch = Branch::kFedavg;
  cfg.attack.kind = AttackKind::kLma;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("fedavg takeover zeroes the aggregated parameters") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.branch = Branch::kFedavg;
  cfg.attack.kind = AttackKind::kFedavgTakeover;
  cfg.rounds = 2;

  RunHooks hooks;
  hooks.after_server_training = [](std::size_t, const ModelParams& m) {
    for (double v : m.values) CHECK(std::abs(v) <= 1e-12);
  };
  const auto records = run_fedavg(cfg, &hooks);
  CHECK(records.size() == 2);
  // an all-zero model predicts uniformly; accuracy sits at chance
  CHECK(records.back().test_accuracy <= 0.75);
}

TEST_CASE("benign fedavg approaches the centralized baseline") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.branch = Branch::kFedavg;
  cfg.alpha = 0.0;
  cfg.attack.kind = AttackKind::kNone;
  cfg.rounds = 4;
  const auto records = run_fedavg(cfg);

  // centralized baseline: same architecture trained on all private data
  const Dataset all = make_blobs(cfg.data.classes, cfg.data.dim,
                                 cfg.data.per_class, cfg.data.spread,
                                 derive_seed(cfg.seed, {0xda7a}));
  SplitPlan plan = cfg.split_plan;
  plan.clients = cfg.clients;
  plan.seed = derive_seed(cfg.seed, {0x59117});
  const SplitResult splits = split(all, plan);
  std::vector<SoftExample> central;
  for (const Dataset& ds : splits.privates) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      central.push_back(
          {ds.features[i],
           one_hot(ds.classes, static_cast<std::size_t>(ds.labels[i]))});
    }
  }
  TrainSchedule sched = cfg.client_schedule;
  sched.epochs = cfg.client_schedule.epochs * cfg.rounds;
  const Architecture arch{cfg.data.dim, cfg.hidden, cfg.data.classes,
                          cfg.activation};
  const ModelParams baseline = train(init(arch, 7), central, sched, 7);
  const double central_acc = accuracy(baseline, splits.test);

  CHECK(records.back().test_accuracy >= 0.9 * central_acc);
}

TEST_CASE("fedavg runs are deterministic") {
  ExperimentConfig cfg = tiny_fd_config();
  cfg.branch = Branch::kFedavg;
  cfg.attack.kind = AttackKind::kFedavgGauss;
  cfg.attack.noise_scale = 0.5;
  const auto a = run_fedavg(cfg);
  const auto b = run_fedavg(cfg);
  CHECK(records_equal_modulo_wall_time(a, b));
}

TEST_SUITE_END();
