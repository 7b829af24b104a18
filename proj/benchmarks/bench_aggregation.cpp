// Aggregation cost per communication round for the robust defences; the
// prediction dimension is the class count, so these stay cheap relative to
// training even at many samples.

#include <benchmark/benchmark.h>

#include <cmath>

#include "feddist/attacks.hpp"
#include "feddist/defences.hpp"
#include "feddist/rng.hpp"
#include "feddist/simplex.hpp"

namespace {

using namespace feddist;

ProbVector random_point(Rng& rng, std::size_t c) {
  std::vector<double> v(c);
  double sum = 0.0;
  for (double& x : v) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    x = -std::log(u);
    sum += x;
  }
  for (double& x : v) x /= sum;
  return ProbVector::validate(std::move(v));
}

PredictionSet make_preds(std::size_t clients, std::size_t samples,
                         std::size_t classes) {
  Rng rng(7);
  PredictionSet preds(clients, samples, classes);
  for (std::size_t i = 0; i < clients; ++i) {
    for (std::size_t x = 0; x < samples; ++x) {
      preds.set(i, x, random_point(rng, classes));
    }
  }
  return preds;
}

void BM_GeometricMedian(benchmark::State& state) {
  Rng rng(3);
  const std::size_t clients = static_cast<std::size_t>(state.range(0));
  const std::size_t classes = static_cast<std::size_t>(state.range(1));
  std::vector<ProbVector> points;
  for (std::size_t i = 0; i < clients; ++i) points.push_back(random_point(rng, classes));
  for (auto _ : state) {
    benchmark::DoNotOptimize(geometric_median(points));
  }
}
BENCHMARK(BM_GeometricMedian)->Args({20, 10})->Args({20, 100})->Args({50, 10});

void BM_Cronus(benchmark::State& state) {
  Rng rng(5);
  const std::size_t clients = static_cast<std::size_t>(state.range(0));
  const std::size_t classes = static_cast<std::size_t>(state.range(1));
  std::vector<ProbVector> points;
  for (std::size_t i = 0; i < clients; ++i) points.push_back(random_point(rng, classes));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cronus_agg(points));
  }
}
BENCHMARK(BM_Cronus)->Args({20, 10})->Args({20, 100});

void BM_ExpguardFilterScores(benchmark::State& state) {
  const auto preds = make_preds(20, static_cast<std::size_t>(state.range(0)), 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(expguard_scores(preds, DefenceKind::kFilterScore));
  }
}
BENCHMARK(BM_ExpguardFilterScores)->Arg(100)->Arg(1000);

void BM_ExpguardGmScores(benchmark::State& state) {
  const auto preds = make_preds(20, static_cast<std::size_t>(state.range(0)), 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(expguard_scores(preds, DefenceKind::kGeometricMedian));
  }
}
BENCHMARK(BM_ExpguardGmScores)->Arg(100)->Arg(1000);

void BM_LmaRound(benchmark::State& state) {
  const auto preds = make_preds(11, static_cast<std::size_t>(state.range(0)), 10);
  for (auto _ : state) {
    for (std::size_t x = 0; x < preds.samples(); ++x) {
      const auto column = preds.column(x);
      benchmark::DoNotOptimize(lma(honest_mean(column), LossKind::kCel));
    }
  }
}
BENCHMARK(BM_LmaRound)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
