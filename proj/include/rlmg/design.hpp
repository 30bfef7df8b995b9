#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rlmg/game.hpp"

namespace rlmg {

struct DesignPoint {
  int state = 0;
  int action = 0;
};

// Sampling design over a finite feature set: at most d(d+1)/2 support points
// whose weighted second moment bounds every feature's leverage by ~d.
struct DesignResult {
  std::vector<int> support;          // indices into the input feature list, ascending
  std::vector<DesignPoint> points;   // (s, a) pairs when built for an agent
  std::vector<double> rho;           // weights aligned with support, sums to 1
  Eigen::MatrixXd second_moment;     // sum_y rho(y) phi(y) phi(y)^T
  double max_leverage = 0.0;         // max over ALL input features of |phi|^2_{Sigma^-1}
};

// Frank-Wolfe on the log-det objective with the Kiefer-Wolfowitz equivalence
// criterion as the stopping rule (max leverage <= (1+tolerance) d), greedy
// volume initialization, and support pruning. Throws if the features do not
// span R^d or the iteration cap is hit.
DesignResult optimal_design(const std::vector<Eigen::VectorXd>& features, double tolerance = 0.05,
                            int max_iterations = 100000);

// Design over agent `agent`'s (state, action) feature set.
DesignResult design_for_agent(const GameInstance& game, int agent, double tolerance = 0.05);

// ceil(N * rho) per support point; total <= N + d(d+1)/2.
std::vector<int> allocate_samples(const DesignResult& design, int n);

}  // namespace rlmg
