#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "feddist/attacks.hpp"
#include "test_util.hpp"

using namespace feddist;

TEST_SUITE_BEGIN("attacks");

TEST_CASE("honest mean of the worked four-client example") {
  // the fourth column as printed (0.61, 0.08, 0.21) sums to 0.9 and is not a
  // simplex point, so the typed path rejects it outright
  CHECK_THROWS_AS(ProbVector::validate({0.61, 0.08, 0.21}), SumNotOneError);

  // the arithmetic claim over the printed columns: per-coordinate means are
  // (0.77, 0.08, 0.125)
  const double col0 = (0.82 + 0.73 + 0.92 + 0.61) / 4.0;
  const double col1 = (0.14 + 0.06 + 0.04 + 0.08) / 4.0;
  const double col2 = (0.04 + 0.21 + 0.04 + 0.21) / 4.0;
  CHECK(col0 == doctest::Approx(0.77).epsilon(1e-12));
  CHECK(col1 == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(col2 == doctest::Approx(0.125).epsilon(1e-12));

  // with the fourth column's last entry read as 0.31 all four columns are
  // valid and the mean is the (0.77, 0.08, 0.15) the example reports
  const std::vector<ProbVector> honest = {
      ProbVector::validate({0.82, 0.14, 0.04}),
      ProbVector::validate({0.73, 0.06, 0.21}),
      ProbVector::validate({0.92, 0.04, 0.04}),
      ProbVector::validate({0.61, 0.08, 0.31}),
  };
  const ProbVector mean = honest_mean(honest);
  CHECK(mean[0] == doctest::Approx(0.77).epsilon(1e-12));
  CHECK(mean[1] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(mean[2] == doctest::Approx(0.15).epsilon(1e-12));

  CHECK(honest_mean(std::vector<ProbVector>{honest[0]}) == honest[0]);
  const std::vector<ProbVector> same = {honest[2], honest[2], honest[2]};
  const ProbVector m = honest_mean(same);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m[i] == doctest::Approx(honest[2][i]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(honest_mean({}), EmptyInputError);
}

TEST_CASE("rlf emits deterministic shared vertices") {
  const ProbVector a = rlf(5, 7, 123);
  const ProbVector b = rlf(5, 7, 123);
  CHECK(a == b);
  double max_entry = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    max_entry = std::max(max_entry, a[i]);
    sum += a[i];
  }
  CHECK(max_entry == 1.0);
  CHECK(sum == 1.0);
}

TEST_CASE("rlf class frequencies are uniform") {
  constexpr std::size_t kClasses = 10;
  constexpr std::size_t kSamples = 10'000;
  std::vector<std::size_t> counts(kClasses, 0);
  for (std::size_t x = 0; x < kSamples; ++x) {
    counts[rlf(kClasses, 424242, x).argmax()]++;
  }
  const double expected = static_cast<double>(kSamples) / kClasses;
  const double sigma = std::sqrt(kSamples * 0.1 * 0.9);
  for (std::size_t k = 0; k < kClasses; ++k) {
    CHECK(std::abs(static_cast<double>(counts[k]) - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("lma picks the least likely class with low-index ties") {
  for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
    CHECK(lma(ProbVector::validate({0.77, 0.08, 0.15}), kind).argmax() == 1);
    CHECK(lma(uniform_prob(4), kind).argmax() == 0);
    CHECK(lma(ProbVector::validate({0.98, 0.01, 0.01}), kind).argmax() == 1);
  }
}

TEST_CASE("lma closed form beats vertices and interior candidates") {
  Rng rng(31337);
  for (std::size_t c : {3ul, 5ul, 10ul}) {
    for (double alpha : {0.1, 0.3, 0.45}) {
      for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
        for (int trial = 0; trial < 50; ++trial) {
          const ProbVector y_h = testutil::random_point(rng, c);
          const ProbVector closed = lma(y_h, kind);
          const double best = lmax_objective(y_h, closed, alpha, kind);
          for (std::size_t i = 0; i < c; ++i) {
            CHECK(lmax_objective(y_h, one_hot(c, i), alpha, kind) <=
                  best + 1e-12);
          }
          for (int s = 0; s < 200; ++s) {
            CHECK(lmax_objective(y_h, testutil::random_point(rng, c), alpha,
                                 kind) <= best + 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("similarity from constant predictions is the zero matrix") {
  const std::vector<ProbVector> preds(5, ProbVector::validate({0.6, 0.3, 0.1}));
  const SimilarityMatrix sim = build_similarity(preds);
  // deviations from the accumulated mean are one ulp at worst
  for (double v : sim.values.values) CHECK(std::abs(v) < 1e-30);
}

TEST_CASE("similarity of two opposing vertices") {
  const std::vector<ProbVector> preds = {one_hot(3, 0), one_hot(3, 1)};
  const SimilarityMatrix sim = build_similarity(preds);
  CHECK(sim.at(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sim.at(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sim.at(0, 1) == doctest::Approx(-0.25).epsilon(1e-15));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(sim.at(2, k) == 0.0);
    CHECK(sim.at(k, 2) == 0.0);
  }
}

TEST_CASE("similarity is exactly symmetric") {
  Rng rng(55);
  std::vector<ProbVector> preds;
  for (int i = 0; i < 40; ++i) preds.push_back(testutil::random_point(rng, 6));
  const SimilarityMatrix sim = build_similarity(preds);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(sim.at(i, j) == sim.at(j, i));
    }
  }
  CHECK_THROWS_AS(build_similarity(std::vector<ProbVector>{preds[0]}),
                  TooFewSamplesError);
}

TEST_CASE("cpa targets the least similar class") {
  Matrix m(3, 3);
  m.values = {1.0, 0.2, 0.3, 0.2, 1.0, 0.8, 0.3, 0.8, 1.0};
  const SimilarityMatrix sim = SimilarityMatrix::validate(m);
  // honest mass on class 0 (ship): least similar per row 0 is class 1 (dog)
  CHECK(cpa(ProbVector::validate({0.77, 0.08, 0.15}), sim).argmax() == 1);

  Matrix ones(3, 3);
  for (double& v : ones.values) v = 1.0;
  CHECK(cpa(uniform_prob(3), SimilarityMatrix::validate(ones)).argmax() == 0);

  Matrix increasing(3, 3);
  increasing.values = {0.1, 0.2, 0.3, 0.2, 0.3, 0.4, 0.3, 0.4, 0.5};
  CHECK(cpa(ProbVector::validate({0.5, 0.3, 0.2}),
            SimilarityMatrix::validate(increasing))
            .argmax() == 0);
}

TEST_CASE("similarity matrix validation and file round-trip") {
  Matrix skew(2, 2);
  skew.values = {1.0, 0.5, 0.2, 1.0};
  CHECK_THROWS(SimilarityMatrix::validate(skew));

  Matrix m(3, 3);
  m.values = {1.0, 0.25, -0.5, 0.25, 2.0, 0.125, -0.5, 0.125, 0.75};
  const SimilarityMatrix sim = SimilarityMatrix::validate(m);
  const auto path =
      std::filesystem::temp_directory_path() / "feddist_test_sim.txt";
  write_similarity(sim, path.string());
  const SimilarityMatrix back = read_similarity(path.string());
  CHECK(back.values.values == sim.values.values);
  std::filesystem::remove(path);
}

TEST_CASE("hips hull deduplicates vertices") {
  const ProbVector a = ProbVector::validate({0.5, 0.3, 0.2});
  const ProbVector b = ProbVector::validate({0.1, 0.1, 0.8});
  const std::vector<ProbVector> three = {a, b, one_hot(3, 0)};
  CHECK(hips_hull(three).size() == 3);

  const std::vector<ProbVector> dup = {a, a, b};
  CHECK(hips_hull(dup).size() == 2);

  CHECK(hips_hull(std::vector<ProbVector>{a}).size() == 1);
}

TEST_CASE("hips lma picks a vertex and no hull point beats it") {
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ProbVector> honest;
    for (int i = 0; i < 5; ++i) honest.push_back(testutil::random_point(rng, 4));
    const ProbVector y_h = honest_mean(honest);
    for (LossKind kind : {LossKind::kCel, LossKind::kMse}) {
      const ProbVector pick = hips_lma(honest, y_h, 0.45, kind);
      // output is one of the vertices
      bool is_vertex = false;
      for (const ProbVector& v : honest) is_vertex = is_vertex || v == pick;
      CHECK(is_vertex);

      const double best = lmax_objective(y_h, pick, 0.45, kind);
      for (int s = 0; s < 2000; ++s) {
        const ProbVector lambda = testutil::random_point(rng, 5);
        std::vector<double> point(4, 0.0);
        for (std::size_t i = 0; i < 5; ++i) {
          for (std::size_t k = 0; k < 4; ++k) point[k] += lambda[i] * honest[i][k];
        }
        CHECK(lmax_objective(y_h, ProbVector::validate(point), 0.45, kind) <=
              best + 1e-9);
      }
    }
  }
}

TEST_CASE("hips lma edge cases") {
  const ProbVector only = ProbVector::validate({0.2, 0.3, 0.5});
  const std::vector<ProbVector> single = {only};
  CHECK(hips_lma(single, only, 0.3, LossKind::kCel) == only);
  CHECK_THROWS(hips_lma(single, only, 0.0, LossKind::kCel));
  CHECK_THROWS(hips_lma(single, only, 0.5, LossKind::kCel));
}

TEST_CASE("hips cpa solves the restricted linear program") {
  Matrix m(3, 3);
  m.values = {1.0, 0.9, 0.1, 0.9, 1.0, 0.5, 0.1, 0.5, 1.0};
  const SimilarityMatrix sim = SimilarityMatrix::validate(m);
  const ProbVector y_h = ProbVector::validate({0.8, 0.1, 0.1});  // argmax 0

  // mass on the dissimilar class 2 wins over mass on similar classes
  const ProbVector orthogonal = ProbVector::validate({0.1, 0.1, 0.8});
  const ProbVector aligned = ProbVector::validate({0.3, 0.3, 0.4});
  const std::vector<ProbVector> honest = {aligned, orthogonal};
  CHECK(hips_cpa(honest, y_h, sim) == orthogonal);

  // brute force over vertices plus dense hull samples
  Rng rng(707);
  std::vector<ProbVector> many;
  for (int i = 0; i < 6; ++i) many.push_back(testutil::random_point(rng, 3));
  const ProbVector pick = hips_cpa(many, y_h, sim);
  const auto value = [&](const ProbVector& y) {
    double v = 0.0;
    for (std::size_t k = 0; k < 3; ++k) v += y[k] * sim.at(0, k);
    return v;
  };
  for (const ProbVector& v : many) CHECK(value(pick) <= value(v) + 1e-12);
  for (int s = 0; s < 2000; ++s) {
    const ProbVector lambda = testutil::random_point(rng, 6);
    std::vector<double> point(3, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t k = 0; k < 3; ++k) point[k] += lambda[i] * many[i][k];
    }
    CHECK(value(pick) <= value(ProbVector::validate(point)) + 1e-9);
  }

  // constant row: ties resolve to the lowest client index
  Matrix flat(3, 3);
  for (double& v : flat.values) v = 0.5;
  CHECK(hips_cpa(many, y_h, SimilarityMatrix::validate(flat)) == many[0]);
  CHECK(hips_cpa(std::vector<ProbVector>{orthogonal}, y_h, sim) == orthogonal);
}

TEST_CASE("fedavg gaussian attack statistics") {
  constexpr std::size_t kCount = 100'000;
  const double scale = 2.0;
  const std::vector<double> noise = fedavg_gauss(kCount, scale, 9);
  double mean = 0.0;
  for (double v : noise) mean += v;
  mean /= kCount;
  CHECK(std::abs(mean) <= 4.0 * scale / std::sqrt(static_cast<double>(kCount)));

  CHECK(fedavg_gauss(kCount, scale, 9) == noise);
  CHECK(fedavg_gauss(64, scale, 10) != fedavg_gauss(64, scale, 11));
  CHECK_THROWS(fedavg_gauss(10, 0.0, 1));
}

TEST_CASE("fedavg takeover steers the mean exactly") {
  Rng rng(808);
  const std::size_t p = 50;

  std::vector<std::vector<double>> others;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> w(p);
    for (double& v : w) v = rng.uniform(-3.0, 3.0);
    others.push_back(std::move(w));
  }

  SUBCASE("zero target") {
    const std::vector<double> target(p, 0.0);
    const std::vector<double> crafted = fedavg_takeover(target, others, 5);
    for (std::size_t i = 0; i < p; ++i) {
      double mean = crafted[i];
      for (const auto& o : others) mean += o[i];
      CHECK(std::abs(mean / 5.0) <= 1e-12);
    }
  }

  SUBCASE("random target") {
    std::vector<double> target(p);
    for (double& v : target) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> crafted = fedavg_takeover(target, others, 5);
    for (std::size_t i = 0; i < p; ++i) {
      double mean = crafted[i];
      for (const auto& o : others) mean += o[i];
      CHECK(std::abs(mean / 5.0 - target[i]) <= 1e-10);
    }
  }

  SUBCASE("single client") {
    const std::vector<double> target{1.0, -2.0};
    CHECK(fedavg_takeover(target, {}, 1) == target);
  }

  SUBCASE("wrong client count") {
    CHECK_THROWS(fedavg_takeover(std::vector<double>(p, 0.0), others, 7));
  }
}

TEST_SUITE_END();
