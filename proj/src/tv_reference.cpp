#include "rlmg/tv_reference.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rlmg {

TvBallSolution tv_ball_minimum(std::span<const double> p, std::span<const double> v,
                               double sigma) {
  if (p.empty() || p.size() != v.size())
    throw std::invalid_argument("tv_ball_minimum: empty or mismatched input");
  if (!(sigma >= 0.0 && sigma <= 1.0))
    throw std::invalid_argument("tv_ball_minimum: sigma outside [0,1]");

  std::vector<int> asc(p.size());
  std::iota(asc.begin(), asc.end(), 0);
  std::sort(asc.begin(), asc.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] < v[b];
    return a < b;
  });

  TvBallSolution sol;
  sol.argmin.assign(p.begin(), p.end());
  sol.value = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sol.value += p[i] * v[i];

  // Grant up to sigma of probability mass to the cheapest state, pulled from
  // the most expensive states first.
  const int cheapest = asc.front();
  double budget = sigma;
  for (auto it = asc.rbegin(); it != asc.rend() && budget > 0.0; ++it) {
    const int donor = *it;
    if (donor == cheapest) continue;
    const double moved = std::min(sol.argmin[donor], budget);
    if (moved <= 0.0) continue;
    sol.argmin[donor] -= moved;
    sol.argmin[cheapest] += moved;
    sol.value -= moved * (v[donor] - v[cheapest]);
    budget -= moved;
  }
  return sol;
}

}  // namespace rlmg
