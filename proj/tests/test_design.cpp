#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlmg/design.hpp"
#include "rlmg/rng.hpp"

using namespace rlmg;

namespace {

std::vector<Eigen::VectorXd> random_cloud(int d, int count, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x(j) = rng.next_gaussian();
    if (x.norm() > 1.0) x /= x.norm();
    out.push_back(x);
  }
  return out;
}

double exhaustive_max_leverage(const std::vector<Eigen::VectorXd>& feats,
                               const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd inv = sigma.inverse();  // independent of the LDLT path
  double worst = 0.0;
  for (const auto& f : feats) worst = std::max(worst, double(f.transpose() * inv * f));
  return worst;
}

}  // namespace

TEST_CASE("basis vectors: uniform design with leverage d") {
  for (int d : {2, 4, 6}) {
    std::vector<Eigen::VectorXd> feats;
    for (int j = 0; j < d; ++j) feats.push_back(Eigen::VectorXd::Unit(d, j));
    const DesignResult res = optimal_design(feats);
    REQUIRE(static_cast<int>(res.support.size()) == d);
    for (double r : res.rho) CHECK(r == doctest::Approx(1.0 / d).epsilon(1e-12));
    CHECK((res.second_moment - Eigen::MatrixXd::Identity(d, d) / d).cwiseAbs().maxCoeff() <=
          1e-12);
    CHECK(res.max_leverage == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("one dimension: all weight on the largest norm") {
  std::vector<Eigen::VectorXd> feats(2, Eigen::VectorXd(1));
  feats[0](0) = 0.5;
  feats[1](0) = 1.0;
  const DesignResult res = optimal_design(feats);
  REQUIRE(res.support == std::vector<int>{1});
  CHECK(res.rho[0] == doctest::Approx(1.0));
  CHECK(res.max_leverage == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("random clouds meet the leverage and support bounds") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + rng.next_index(5);
    const auto feats = random_cloud(d, 50, rng);
    const DesignResult res = optimal_design(feats, 0.05);
    CHECK(static_cast<int>(res.support.size()) <= d * (d + 1) / 2);
    CHECK(exhaustive_max_leverage(feats, res.second_moment) <= 1.1 * d + 1e-9);

    // Stored Sigma matches reconstruction from (support, rho).
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < res.support.size(); ++i)
      rebuilt += res.rho[i] * feats[res.support[i]] * feats[res.support[i]].transpose();
    CHECK((rebuilt - res.second_moment).cwiseAbs().maxCoeff() <= 1e-10);

    double total = 0.0;
    for (double r : res.rho) total += r;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("3-D cloud example against the exhaustive scan") {
  Rng rng(7);
  const auto feats = random_cloud(3, 50, rng);
  const DesignResult res = optimal_design(feats, 0.05);
  CHECK(exhaustive_max_leverage(feats, res.second_moment) <= 1.05 * 3 + 1e-9);
}

TEST_CASE("deterministic given identical input") {
  Rng rng(9);
  const auto feats = random_cloud(4, 30, rng);
  const DesignResult a = optimal_design(feats);
  const DesignResult b = optimal_design(feats);
  CHECK(a.support == b.support);
  CHECK(a.rho == b.rho);
  CHECK(a.max_leverage == b.max_leverage);
}

TEST_CASE("rank-deficient feature sets are rejected") {
  std::vector<Eigen::VectorXd> flat;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x(0) = 0.1 * (i + 1);
    x(1) = 0.05 * (i + 1);
    flat.push_back(x);  // spans only a line in R^3
  }
  CHECK_THROWS_AS(optimal_design(flat), std::invalid_argument);
}

TEST_CASE("allocate_samples") {
  SUBCASE("uniform rho, exact split") {
    std::vector<Eigen::VectorXd> feats;
    for (int j = 0; j < 4; ++j) feats.push_back(Eigen::VectorXd::Unit(4, j));
    const DesignResult res = optimal_design(feats);
    const auto counts = allocate_samples(res, 100);
    int total = 0;
    for (int c : counts) {
      CHECK(c == 25);
      total += c;
    }
    CHECK(total == 100);
  }
  SUBCASE("ceiling arithmetic") {
    DesignResult res;
    res.support = {0, 1};
    res.rho = {0.301, 0.699};
    const auto counts = allocate_samples(res, 10);
    CHECK(counts == std::vector<int>{4, 7});
  }
  SUBCASE("total bound over random designs") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const int d = 2 + rng.next_index(4);
      const auto feats = random_cloud(d, 40, rng);
      const DesignResult res = optimal_design(feats);
      for (int n : {1, 7, 100}) {
        int total = 0;
        for (int c : allocate_samples(res, n)) total += c;
        CHECK(total <= n + d * (d + 1) / 2);
      }
    }
  }
}
