#pragma once

#include <span>
#include <vector>

#include "rlmg/game.hpp"

namespace rlmg {

// softmax(eta * cumulative_q), computed with max subtraction.
std::vector<double> ftrl_policy(std::span<const double> cumulative_q, double eta);

// Learning-rate schedule sqrt(ln A / k) / H; realizes the 2H sqrt(K ln A)
// regret rate for gains in [0, H].
double eta_schedule(int k, int horizon, int n_actions);

// Independent FTRL cells per (agent, state) for one step of the backward
// recursion. Iteration 1 starts from zero cumulative gains (uniform play).
class FtrlState {
 public:
  explicit FtrlState(const GameDims& dims);

  int iteration() const { return iteration_; }

  std::vector<double> policy_row(int agent, int state) const;
  StepPolicy current_policy() const;

  void add_gains(int agent, int state, std::span<const double> q_row);
  void advance() { ++iteration_; }

 private:
  GameDims dims_;
  int iteration_ = 1;
  std::vector<std::vector<double>> cumulative_;  // [agent][state * A_i + a]
};

}  // namespace rlmg
