#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "rlmg/game.hpp"

using namespace rlmg;

namespace {

TabularSpec two_state_spec() {
  // 2 agents, H=1, S=2, A=2; kernel rows chosen by joint action parity.
  TabularSpec spec;
  spec.dims = {2, 1, 2, {2, 2}, {}};
  spec.sigma = {0.0, 0.0};
  const int j_count = 4;
  spec.kernel.assign(2 * j_count * 2, 0.0);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < j_count; ++a) {
      const int target = a % 2;
      spec.kernel[(s * j_count + a) * 2 + target] = 1.0;
    }
  spec.reward.assign(2 * 2 * j_count, 0.5);
  return spec;
}

}  // namespace

TEST_CASE("joint index round trips") {
  GameDims dims{3, 1, 1, {2, 3, 2}, {1, 1, 1}};
  std::vector<int> tuple(3);
  for (int j = 0; j < dims.joint_actions(); ++j) {
    joint_decode(dims, j, tuple);
    CHECK(joint_index(dims, tuple) == j);
  }
  CHECK(dims.joint_actions() == 12);
}

TEST_CASE("marginal kernel: single agent is the kernel row") {
  TabularSpec spec;
  spec.dims = {1, 1, 3, {2}, {}};
  spec.sigma = {0.3};
  spec.kernel = {0.2, 0.3, 0.5, 0.1, 0.1, 0.8,   0.6, 0.2, 0.2, 1.0, 0.0, 0.0,
                 0.3, 0.3, 0.4, 0.25, 0.25, 0.5};
  spec.reward.assign(1 * 3 * 2, 0.7);
  const GameInstance game = build_tabular(spec);
  const StepPolicy pi = StepPolicy::uniform(game.dims());
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      const auto mk = marginal_kernel(game, 0, 0, s, a, pi);
      const auto row = game.kernel_row(0, s, a);
      for (int sp = 0; sp < 3; ++sp) CHECK(mk[sp] == row[sp]);
      CHECK(marginal_reward(game, 0, 0, s, a, pi) == 0.7);
    }
}

TEST_CASE("marginal kernel: deterministic and uniform opponents") {
  const GameInstance game = build_tabular(two_state_spec());
  StepPolicy others = StepPolicy::uniform(game.dims());

  // Opponent (agent 1) deterministic at action 1: marginal equals the joint row.
  const double det[2] = {0.0, 1.0};
  for (int s = 0; s < 2; ++s) others.set_row(1, s, det);
  for (int a0 = 0; a0 < 2; ++a0) {
    const auto mk = marginal_kernel(game, 0, 0, 0, a0, others);
    const int joint = a0 + 2 * 1;
    const auto row = game.kernel_row(0, 0, joint);
    for (int sp = 0; sp < 2; ++sp) CHECK(mk[sp] == row[sp]);
  }

  // Uniform opponent over rows (1,0) and (0,1) -> (0.5, 0.5). Agent 1's view:
  // joint rows for its fixed a1 differ in agent 0's action parity.
  const StepPolicy uniform = StepPolicy::uniform(game.dims());
  const auto mk = marginal_kernel(game, 1, 0, 0, 0, uniform);
  CHECK(mk[0] == doctest::Approx(0.5));
  CHECK(mk[1] == doctest::Approx(0.5));
}

TEST_CASE("marginal reward: opponent average") {
  // Rewards 0.2 / 0.8 under the two opponent actions -> 0.5 under uniform.
  TabularSpec spec = two_state_spec();
  for (int s = 0; s < 2; ++s)
    for (int a0 = 0; a0 < 2; ++a0) {
      spec.reward[(0 * 2 + s) * 4 + (a0 + 2 * 0)] = 0.2;
      spec.reward[(0 * 2 + s) * 4 + (a0 + 2 * 1)] = 0.8;
    }
  const GameInstance game = build_tabular(spec);
  const StepPolicy uniform = StepPolicy::uniform(game.dims());
  CHECK(marginal_reward(game, 0, 0, 0, 0, uniform) == doctest::Approx(0.5));
}

TEST_CASE("marginal kernel is affine in an opponent row") {
  const GameInstance game = build_random_tabular({2, 1, 3, {2, 3}, {}}, {0.1, 0.1}, 11);
  Rng rng(5);
  StepPolicy a = random_step_policy(game.dims(), rng);
  StepPolicy b = random_step_policy(game.dims(), rng);
  const double w = 0.37;
  StepPolicy mixed = a;
  for (int s = 0; s < 3; ++s) {
    std::vector<double> row(3);
    for (int x = 0; x < 3; ++x) row[x] = w * a.row(1, s)[x] + (1 - w) * b.row(1, s)[x];
    mixed.set_row(1, s, row);
  }
  for (int s = 0; s < 3; ++s) {
    const auto ka = marginal_kernel(game, 0, 0, s, 1, a);
    const auto kb = marginal_kernel(game, 0, 0, s, 1, b);
    const auto km = marginal_kernel(game, 0, 0, s, 1, mixed);
    double sum = 0.0;
    for (int sp = 0; sp < 3; ++sp) {
      CHECK(km[sp] == doctest::Approx(w * ka[sp] + (1 - w) * kb[sp]).epsilon(1e-12));
      CHECK(km[sp] >= 0.0);
      sum += km[sp];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const double r = marginal_reward(game, 0, 0, s, 1, mixed);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("marginal kernel rows are distributions across random games") {
  Rng rng(314);
  for (int trial = 0; trial < 10; ++trial) {
    const GameInstance game =
        build_random_tabular({2, 2, 3, {2, 3}, {}}, {0.2, 0.2}, 900 + trial);
    const StepPolicy others = random_step_policy(game.dims(), rng);
    for (int i = 0; i < 2; ++i)
      for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s)
          for (int a = 0; a < game.dims().n_actions[i]; ++a) {
            const auto mk = marginal_kernel(game, i, h, s, a, others);
            double sum = 0.0;
            for (double p : mk) {
              CHECK(p >= 0.0);
              sum += p;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            const double r = marginal_reward(game, i, h, s, a, others);
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
          }
  }
}

TEST_CASE("sample_nominal: deterministic row, frequencies, seed determinism") {
  TabularSpec spec;
  spec.dims = {1, 1, 2, {2}, {}};
  spec.sigma = {0.0};
  // Rows indexed (s, a): (0,0) deterministic to state 1, (0,1) a coin flip.
  spec.kernel = {0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75};
  spec.reward = {0.25, 0.75, 0.5, 0.5};
  const GameInstance game = build_tabular(spec);

  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) CHECK(sample_nominal(game, 0, 0, 0, rng).next_state == 1);

  long long ones = 0;
  const int draws = 100000;
  for (int rep = 0; rep < draws; ++rep) ones += sample_nominal(game, 0, 0, 1, rng).next_state;
  CHECK(std::abs(static_cast<double>(ones) / draws - 0.5) < 0.01);

  Rng r1(99), r2(99);
  for (int rep = 0; rep < 20; ++rep)
    CHECK(sample_nominal(game, 0, 0, 1, r1).next_state ==
          sample_nominal(game, 0, 0, 1, r2).next_state);
}

TEST_CASE("build_tabular: one-hot features") {
  const GameInstance game = build_tabular(two_state_spec());
  CHECK(game.dims().feature_dim[0] == 4);
  // The 4 feature vectors are the standard basis of R^4.
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) {
      auto f = game.feature(0, s, a);
      double norm2 = 0.0;
      for (int j = 0; j < 4; ++j) {
        CHECK(f[j] == ((j == s * 2 + a) ? 1.0 : 0.0));
        norm2 += f[j] * f[j];
      }
      CHECK(norm2 == 1.0);
    }
  Rng rng(1);
  CHECK(validate_linear_structure(game, 3, rng) <= 1e-12);
}

TEST_CASE("build_random_linear: contract") {
  GameDims dims{2, 2, 3, {2, 2}, {4, 4}};
  const GameInstance game = build_random_linear(dims, {0.2, 0.3}, 7);
  Rng rng(2);
  CHECK(validate_linear_structure(game, 4, rng) <= 1e-9);

  // Separable features cannot span more than S + A - 1 dimensions.
  GameDims too_wide{2, 2, 3, {2, 2}, {5, 5}};
  CHECK_THROWS_AS(build_random_linear(too_wide, {0.2, 0.3}, 7), std::invalid_argument);
  // The generated feature set spans R^d, so the sampling design accepts it.
  Eigen::MatrixXd stacked(6, 4);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      auto f = game.feature(0, s, a);
      for (int j = 0; j < 4; ++j) stacked(s * 2 + a, j) = f[j];
    }
  CHECK(Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(stacked).rank() == 4);

  // Same seed: bitwise-identical serialization.
  const GameInstance again = build_random_linear(dims, {0.2, 0.3}, 7);
  CHECK(game.to_json().dump() == again.to_json().dump());

  // Kernel rows are validated to sum to 1 within 1e-12 at construction; spot
  // check one row anyway.
  double sum = 0.0;
  for (double p : game.kernel_row(1, 2, 3)) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("validate_linear_structure detects off-span perturbations") {
  GameDims dims{2, 1, 3, {2, 2}, {4, 4}};
  const GameInstance game = build_random_linear(dims, {0.0, 0.0}, 13);

  // Left-null direction of agent 0's feature matrix.
  const int rows = 3 * 2, d = 4;
  Eigen::MatrixXd phi(rows, d);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      auto f = game.feature(0, s, a);
      for (int j = 0; j < d; ++j) phi(s * 2 + a, j) = f[j];
    }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, d);
  // The feature span only contains separable f(s) + g(a) row patterns, so an
  // interaction pattern has a component off the span.
  Eigen::VectorXd y(rows);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) y(s * 2 + a) = static_cast<double>(s * a);
  Eigen::VectorXd z = y - q * (q.transpose() * y);
  REQUIRE(z.norm() > 1e-6);
  z.normalize();

  // Rebuild the game with kernel rows shifted by 1e-3 z_(s,a0) w(s'), the
  // same shift for every opponent action, with w summing to zero.
  nlohmann::json j = game.to_json();
  const double w[3] = {M_SQRT1_2, -M_SQRT1_2, 0.0};
  for (int s = 0; s < 3; ++s)
    for (int a0 = 0; a0 < 2; ++a0)
      for (int a1 = 0; a1 < 2; ++a1) {
        const int joint = a0 + 2 * a1;
        for (int sp = 0; sp < 3; ++sp) {
          double v = j["kernel"][0][s][joint][sp].get<double>();
          j["kernel"][0][s][joint][sp] = v + 1e-3 * z(s * 2 + a0) * w[sp];
        }
      }
  const GameInstance perturbed = GameInstance::from_json(j);
  Rng rng(3);
  CHECK(validate_linear_structure(perturbed, 3, rng) > 1e-4);
}

TEST_CASE("game JSON round trip is bit exact") {
  const GameInstance game = build_random_linear({2, 2, 3, {2, 2}, {4, 4}}, {0.2, 0.3}, 17);
  const std::string once = game.to_json().dump();
  const GameInstance back = GameInstance::from_json(nlohmann::json::parse(once));
  CHECK(back.to_json().dump() == once);
}

TEST_CASE("dims and policy validation errors") {
  GameDims bad{0, 1, 1, {}, {}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const GameInstance game = build_tabular(two_state_spec());
  StepPolicy p = StepPolicy::uniform(game.dims());
  const double not_a_distribution[2] = {0.7, 0.7};
  p.set_row(0, 0, not_a_distribution);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(marginal_kernel(game, 0, 0, 0, 5, p), std::invalid_argument);
  // Non-normalized opponent row is rejected by the marginal ops.
  CHECK_THROWS_AS(marginal_kernel(game, 1, 0, 0, 0, p), std::invalid_argument);
  CHECK_THROWS_AS(marginal_reward(game, 1, 0, 0, 0, p), std::invalid_argument);
}
