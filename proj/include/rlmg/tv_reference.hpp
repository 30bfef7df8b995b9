#pragma once

#include <span>
#include <vector>

namespace rlmg {

// Reference primal solver for min P'V over {P' in simplex, TV(P', P) <= sigma}.
// Used to cross-check the dual-breakpoint evaluation; written as a bottom-up
// transport over the V-ascending order, independent of the dual code path.
struct TvBallSolution {
  double value = 0.0;
  std::vector<double> argmin;
};

TvBallSolution tv_ball_minimum(std::span<const double> p, std::span<const double> v, double sigma);

}  // namespace rlmg
