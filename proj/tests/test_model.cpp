#include <doctest.h>

#include <cmath>
#include <vector>

#include "feddist/data.hpp"
#include "feddist/federation.hpp"
#include "feddist/model.hpp"
#include "test_util.hpp"

using namespace feddist;

namespace {

// fixed 2-[3]-3 tanh net used for the golden regression values
const Architecture kGoldenArch{2, {3}, 3, Activation::kTanh};
const std::vector<double> kGoldenParams = {
    0.10, -0.20, 0.30, 0.40, -0.50, 0.25,         // W1 (3x2)
    0.05, -0.10, 0.15,                            // b1
    0.20, -0.30, 0.10, -0.10, 0.25, 0.35,         // W2 (3x3)
    0.05, 0.15,  -0.45,
    0.01, -0.02, 0.03,                            // b2
};
const std::vector<double> kGoldenInput = {0.3, -0.7};
// computed with an independent straight-line implementation of the same
// arithmetic before this module was written
const std::vector<double> kGoldenOutput = {0.37002816731525084,
                                           0.27592822450210014,
                                           0.35404360818264902};

ModelParams golden_model() {
  ModelParams p{kGoldenArch, kGoldenParams};
  p.check();
  return p;
}

std::vector<double> finite_difference_grad(const ModelParams& params,
                                           const std::vector<double>& x,
                                           const ProbVector& target,
                                           LossKind kind, double step) {
  std::vector<double> g(params.values.size());
  ModelParams probe = params;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    probe.values[i] = params.values[i] + step;
    const double up = loss(probe, x, target, kind);
    probe.values[i] = params.values[i] - step;
    const double down = loss(probe, x, target, kind);
    probe.values[i] = params.values[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    scale += a[i] * a[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-30);
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("parameter counts and deterministic init") {
  const Architecture softmax_reg{7, {}, 4, Activation::kTanh};
  CHECK(softmax_reg.param_count() == 7 * 4 + 4);
  CHECK(kGoldenArch.param_count() == kGoldenParams.size());

  const ModelParams a = init(softmax_reg, 42);
  const ModelParams b = init(softmax_reg, 42);
  CHECK(a.values == b.values);
  const ModelParams c = init(softmax_reg, 43);
  CHECK(a.values != c.values);
}

TEST_CASE("all-zero parameters give the uniform prediction") {
  const Architecture arch{4, {5}, 3, Activation::kTanh};
  const ModelParams zero{arch, std::vector<double>(arch.param_count(), 0.0)};
  const ProbVector out = forward(zero, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == 1.0 / 3.0);
}

TEST_CASE("forward matches the frozen regression vector") {
  const ProbVector out = forward(golden_model(), kGoldenInput);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i] == doctest::Approx(kGoldenOutput[i]).epsilon(1e-14));
  }
}

TEST_CASE("forward output is strictly interior") {
  Rng rng(77);
  const Architecture arch{3, {6}, 4, Activation::kTanh};
  for (int trial = 0; trial < 25; ++trial) {
    const ModelParams w = init(arch, rng.next());
    const ProbVector out = forward(w, testutil::random_features(rng, 3));
    CHECK(out.min_entry() > 0.0);
    CHECK_NOTHROW(ProbVector::validate(out.entries()));
  }
}

TEST_CASE("loss values: closed forms and frozen instances") {
  const Architecture arch{4, {5}, 3, Activation::kTanh};
  const ModelParams zero{arch, std::vector<double>(arch.param_count(), 0.0)};
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
  CHECK(loss(zero, x, uniform_prob(3), LossKind::kCel) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));

  const ModelParams g = golden_model();
  const ProbVector self = forward(g, kGoldenInput);
  CHECK(loss(g, kGoldenInput, self, LossKind::kMse) == 0.0);

  const ProbVector target = ProbVector::validate({0.2, 0.5, 0.3});
  CHECK(loss(g, kGoldenInput, target, LossKind::kCel) ==
        doctest::Approx(1.1541430372346946).epsilon(1e-14));
  CHECK(loss(g, kGoldenInput, target, LossKind::kMse) ==
        doctest::Approx(0.04101922492038193).epsilon(1e-14));
}

TEST_CASE("gradient vanishes when the target is the model output") {
  const ModelParams g = golden_model();
  const ProbVector self = forward(g, kGoldenInput);
  for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
    const auto grads =
        grad(g, std::vector<SoftExample>{{kGoldenInput, self}}, kind);
    for (double v : grads) CHECK(v == 0.0);
  }
}

TEST_CASE("gradient agrees with central differences on a 2-16-3 net") {
  Rng rng(501);
  const Architecture arch{2, {16}, 3, Activation::kTanh};
  const ModelParams w = init(arch, 9001);
  const std::vector<double> x = testutil::random_features(rng, 2);
  const ProbVector target = testutil::random_point(rng, 3);
  for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
    const auto g = grad(w, std::vector<SoftExample>{{x, target}}, kind);
    const auto fd = finite_difference_grad(w, x, target, kind, 1e-6);
    CHECK(rel_error(fd, g) < 1e-5);
  }
}

TEST_CASE("gradient is affine in the target") {
  Rng rng(502);
  const Architecture arch{3, {8}, 4, Activation::kTanh};
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams w = init(arch, rng.next());
    const std::vector<double> x = testutil::random_features(rng, 3);
    const ProbVector y1 = testutil::random_point(rng, 4);
    const ProbVector y2 = testutil::random_point(rng, 4);
    std::vector<double> midpoint(4);
    for (std::size_t i = 0; i < 4; ++i) midpoint[i] = 0.5 * (y1[i] + y2[i]);
    const ProbVector mid = ProbVector::validate(midpoint);

    for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
      const auto g1 = grad(w, std::vector<SoftExample>{{x, y1}}, kind);
      const auto g2 = grad(w, std::vector<SoftExample>{{x, y2}}, kind);
      const auto gm = grad(w, std::vector<SoftExample>{{x, mid}}, kind);
      std::vector<double> residual(g1.size());
      for (std::size_t i = 0; i < g1.size(); ++i) {
        residual[i] = g1[i] + g2[i] - 2.0 * gm[i];
      }
      CHECK(testutil::vec_norm(residual) <= 1e-10);
    }
  }
}

TEST_CASE("gradient difference equals an explicit jacobian product") {
  // grad(w, y1) - grad(w, y2) = J^T (y2 - y1) for the relevant jacobian
  Rng rng(503);
  const Architecture arch{3, {8}, 4, Activation::kTanh};
  const ModelParams w = init(arch, 77);
  const std::vector<double> x = testutil::random_features(rng, 3);
  const ProbVector y1 = testutil::random_point(rng, 4);
  const ProbVector y2 = testutil::random_point(rng, 4);

  for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
    const auto g1 = grad(w, std::vector<SoftExample>{{x, y1}}, kind);
    const auto g2 = grad(w, std::vector<SoftExample>{{x, y2}}, kind);
    const Matrix jac = jacobian(w, x,
                                kind == LossKind::kCel
                                    ? JacobianOf::kLogits
                                    : JacobianOf::kProbabilities);
    std::vector<double> predicted(w.values.size(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      const double coeff = y2[i] - y1[i];
      for (std::size_t j = 0; j < w.values.size(); ++j) {
        predicted[j] += coeff * jac.at(i, j);
      }
    }
    std::vector<double> residual(w.values.size());
    for (std::size_t j = 0; j < w.values.size(); ++j) {
      residual[j] = (g1[j] - g2[j]) - predicted[j];
    }
    CHECK(testutil::vec_norm(residual) <= 1e-10);
  }
}

TEST_CASE("softmax-regression logits jacobian is block-sparse in x") {
  const Architecture arch{3, {}, 2, Activation::kTanh};
  ModelParams w = init(arch, 5);
  const std::vector<double> x{0.5, -1.5, 2.0};
  const Matrix jac = jacobian(w, x, JacobianOf::kLogits);
  // logits_i = W row i . x + b_i: the row's weight block is x, bias slot 1
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(jac.at(i, i * 3 + j) == x[j]);
      CHECK(jac.at(i, (1 - i) * 3 + j) == 0.0);
    }
    CHECK(jac.at(i, 6 + i) == 1.0);
    CHECK(jac.at(i, 6 + (1 - i)) == 0.0);
  }
}

TEST_CASE("probability jacobian agrees with central differences") {
  Rng rng(504);
  const Architecture arch{2, {5}, 3, Activation::kTanh};
  const ModelParams w = init(arch, 11);
  const std::vector<double> x = testutil::random_features(rng, 2);
  const Matrix jac = jacobian(w, x, JacobianOf::kProbabilities);
  CHECK(spectral_norm(jac) > 0.0);

  const double step = 1e-6;
  ModelParams probe = w;
  double worst = 0.0;
  for (std::size_t j = 0; j < w.values.size(); ++j) {
    probe.values[j] = w.values[j] + step;
    const ProbVector up = forward(probe, x);
    probe.values[j] = w.values[j] - step;
    const ProbVector down = forward(probe, x);
    probe.values[j] = w.values[j];
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = (up[i] - down[i]) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - jac.at(i, j)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("jacobian refuses oversized architectures") {
  const Architecture big{100, {120}, 10, Activation::kTanh};
  const ModelParams w = init(big, 1);
  CHECK(big.param_count() > kDefaultJacobianParamLimit);
  CHECK_THROWS_AS(jacobian(w, std::vector<double>(100, 0.1), JacobianOf::kLogits),
                  ArchTooLargeError);
}

TEST_CASE("single training step is bounded by the learning rate") {
  const Architecture arch{2, {4}, 3, Activation::kTanh};
  const ModelParams w0 = init(arch, 3);
  const std::vector<SoftExample> data{
      {{0.4, -0.2}, one_hot(3, 1)},
  };
  TrainSchedule sched;
  sched.epochs = 1;
  sched.batch_size = 1;
  sched.learning_rate = 1e-4;
  sched.momentum = 0.0;
  sched.weight_decay = 0.0;
  const auto g = grad(w0, data, sched.loss);
  const ModelParams w1 = train(w0, data, sched, 1);
  std::vector<double> delta(w0.values.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = w1.values[i] - w0.values[i];
  }
  CHECK(testutil::vec_norm(delta) <=
        sched.learning_rate * testutil::vec_norm(g) * 1.01);
}

TEST_CASE("training separates two noisy blobs") {
  const Dataset blobs = make_blobs(2, 2, 60, 0.25, 17);
  std::vector<SoftExample> data;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    data.push_back({blobs.features[i],
                    one_hot(2, static_cast<std::size_t>(blobs.labels[i]))});
  }
  TrainSchedule sched;
  sched.epochs = 40;
  sched.batch_size = 16;
  sched.learning_rate = 0.2;
  sched.momentum = 0.9;
  sched.weight_decay = 1e-4;
  const Architecture arch{2, {8}, 2, Activation::kTanh};
  const ModelParams trained = train(init(arch, 2), data, sched, 5);
  CHECK(accuracy(trained, blobs) >= 0.95);
}

TEST_CASE("training is deterministic in the seed") {
  const Dataset blobs = make_blobs(3, 2, 30, 0.5, 23);
  std::vector<SoftExample> data;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    data.push_back({blobs.features[i],
                    one_hot(3, static_cast<std::size_t>(blobs.labels[i]))});
  }
  TrainSchedule sched;
  sched.epochs = 5;
  sched.batch_size = 8;
  const Architecture arch{2, {6}, 3, Activation::kTanh};
  const ModelParams a = train(init(arch, 1), data, sched, 99);
  const ModelParams b = train(init(arch, 1), data, sched, 99);
  CHECK(a.values == b.values);
  const ModelParams c = train(init(arch, 1), data, sched, 100);
  CHECK(a.values != c.values);
}

TEST_CASE("training reports divergence") {
  const Dataset blobs = make_blobs(2, 2, 10, 0.5, 29);
  std::vector<SoftExample> data;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    data.push_back({blobs.features[i],
                    one_hot(2, static_cast<std::size_t>(blobs.labels[i]))});
  }
  TrainSchedule sched;
  sched.epochs = 20;
  sched.batch_size = 4;
  sched.learning_rate = 1e30;
  sched.momentum = 0.0;
  // relu lets the activations blow up with the weights; tanh saturates and
  // survives absurd step sizes
  const Architecture arch{2, {4}, 2, Activation::kRelu};
  CHECK_THROWS_AS(train(init(arch, 1), data, sched, 7), NonFiniteLossError);
}

TEST_SUITE_END();
