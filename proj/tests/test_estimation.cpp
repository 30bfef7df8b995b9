#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlmg/estimation.hpp"
#include "rlmg/rng.hpp"

using namespace rlmg;

TEST_CASE("empty dataset gives the prior-only estimate") {
  const FitResult res = fit(std::span<const FitSample>{}, 3, 2.0);
  CHECK((res.gram.matrix() - 2.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.reward.theta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.transition.empty());
  const SignedMeasure m = res.transition.measure_at(Eigen::VectorXd::Ones(3), res.gram);
  CHECK(m.support.empty());
  // Empty measure feeds the dual as a zero term.
  CHECK(robust_q_backup(0.0, m, std::vector<double>{1.0, 2.0}, 0.3) == 0.0);
}

TEST_CASE("one-dimensional closed form") {
  std::vector<FitSample> samples(1);
  samples[0].phi = Eigen::VectorXd::Ones(1);
  samples[0].reward = 0.5;
  samples[0].next_state = 0;
  const FitResult res = fit(samples, 1, 1.0);
  CHECK(res.gram.matrix()(0, 0) == 2.0);
  CHECK(res.reward.theta(0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("tabular counts: weight = count / (count + lambda)") {
  // 4 samples at one pair, 3 to state 2 and 1 to state 0, lambda = 1.
  std::vector<FitSample> samples;
  for (int m = 0; m < 4; ++m) {
    FitSample s;
    s.phi = Eigen::VectorXd::Unit(4, 1);
    s.reward = 0.5;
    s.next_state = m < 3 ? 2 : 0;
    samples.push_back(s);
  }
  const FitResult res = fit(samples, 4, 1.0);
  const SignedMeasure m = res.transition.measure_at(Eigen::VectorXd::Unit(4, 1), res.gram);
  REQUIRE(m.support == std::vector<int>{0, 2});
  CHECK(m.weights[0] == doctest::Approx(1.0 / 5).epsilon(1e-10));
  CHECK(m.weights[1] == doctest::Approx(3.0 / 5).epsilon(1e-10));

  double total = 0.0;
  for (double w : m.weights) {
    CHECK(w >= 0.0);
    total += w;
  }
  CHECK(total == doctest::Approx(4.0 / 5).epsilon(1e-10));

  // Off-support pairs see an empty-weight (zero) measure under one-hot features.
  const SignedMeasure off = res.transition.measure_at(Eigen::VectorXd::Unit(4, 3), res.gram);
  for (double w : off.weights) CHECK(std::abs(w) <= 1e-12);

  // Reward estimate shrinks toward zero by the same factor.
  CHECK(res.reward.at(Eigen::VectorXd::Unit(4, 1)) == doctest::Approx(0.5 * 4.0 / 5));
}

TEST_CASE("normal-equation residual stays tiny") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + rng.next_index(6);
    std::vector<FitSample> samples;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int m = 0; m < 30; ++m) {
      FitSample s;
      s.phi = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < d; ++j) s.phi(j) = rng.next_gaussian();
      if (s.phi.norm() > 1.0) s.phi /= s.phi.norm();
      s.reward = rng.next_double();
      s.next_state = rng.next_index(4);
      rhs += s.phi * s.reward;
      samples.push_back(s);
    }
    const FitResult res = fit(samples, d, 1.0);
    CHECK((res.gram.matrix() * res.reward.theta - rhs).norm() <= 1e-9);
  }
}

TEST_CASE("bonus widths") {
  SUBCASE("identity Gram") {
    for (double lambda : {1.0, 4.0}) {
      const GramMatrix gram(lambda * Eigen::MatrixXd::Identity(3, 3), lambda);
      Eigen::VectorXd phi = Eigen::VectorXd::Zero(3);
      phi(1) = 1.0;
      CHECK(gram.bonus_width(phi) == doctest::Approx(1.0 / std::sqrt(lambda)).epsilon(1e-14));
      CHECK(gram.bonus_width(Eigen::VectorXd::Zero(3)) == 0.0);
    }
  }
  SUBCASE("random SPD matrix against the dense inverse") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + rng.next_index(5);
      Eigen::MatrixXd a(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) a(r, c) = rng.next_gaussian();
      Eigen::MatrixXd lambda = a * a.transpose() + 1.5 * Eigen::MatrixXd::Identity(d, d);
      lambda = ((lambda + lambda.transpose()) / 2).eval();
      const GramMatrix gram(lambda, 1.5);
      Eigen::VectorXd phi(d);
      for (int j = 0; j < d; ++j) phi(j) = rng.next_gaussian();
      const double direct = std::sqrt(phi.dot(lambda.inverse() * phi));
      CHECK(gram.bonus_width(phi) == doctest::Approx(direct).epsilon(1e-10));
    }
  }
  SUBCASE("width shrinks as samples accumulate") {
    Rng rng(23);
    const int d = 4;
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd probe(d);
    for (int j = 0; j < d; ++j) probe(j) = rng.next_gaussian();
    double prev = GramMatrix(lambda, 1.0).bonus_width(probe);
    CHECK(prev <= probe.norm() + 1e-12);
    for (int m = 0; m < 15; ++m) {
      Eigen::VectorXd phi(d);
      for (int j = 0; j < d; ++j) phi(j) = rng.next_gaussian();
      phi /= std::max(1.0, phi.norm());
      lambda += phi * phi.transpose();
      const double width = GramMatrix(lambda, 1.0).bonus_width(probe);
      CHECK(width <= prev + 1e-12);
      prev = width;
    }
  }
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(fit(std::span<const FitSample>{}, 3, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(GramMatrix(Eigen::MatrixXd::Identity(2, 2), 0.2), std::invalid_argument);
  Eigen::MatrixXd skew(2, 2);
  skew << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(GramMatrix(skew, 1.0), std::invalid_argument);
}
