#pragma once

#include <span>
#include <vector>

#include "rlmg/game.hpp"

namespace rlmg {

// Per-step value tables, slices indexed 0..H with slice H the terminal zeros.
struct ValueTable {
  std::vector<std::vector<double>> slices;

  static ValueTable zeros(int horizon, int n_states) {
    ValueTable t;
    t.slices.assign(horizon + 1, std::vector<double>(n_states, 0.0));
    return t;
  }
};

// Finitely supported signed measure over states (the shape ridge-regression
// transition estimates take). Support indices are distinct and sorted.
struct SignedMeasure {
  std::vector<int> support;
  std::vector<double> weights;
};

// Pointwise min(V, alpha).
std::vector<double> clip_value(std::span<const double> v, double alpha);

// max over alpha of { P [V]_alpha - sigma (alpha - min(alpha, min V)) }, the
// dual form of inf P'V over the TV ball. The objective is piecewise linear in
// alpha with breakpoints at attained V values, so the maximization is exact
// over the finite candidate set; ties break toward the smallest alpha. For a
// proper distribution this equals the TV-ball infimum exactly.
double tv_dual_inf(std::span<const double> p, std::span<const double> v, double sigma);

// Same dual applied to a signed measure; alpha candidates are the V values on
// the measure's support plus the global min/max of V. Empty support evaluates
// the measure term as zero.
double tv_dual_inf(const SignedMeasure& p, std::span<const double> v, double sigma);

// Argmin kernel of the TV-ball infimum: mass is removed from states in
// descending V order (ties: highest index first) and deposited on the
// lowest-index minimizer of V. Requires a proper distribution.
std::vector<double> tv_worst_case_kernel(std::span<const double> p, std::span<const double> v,
                                         double sigma);

inline double robust_q_backup(double r, const SignedMeasure& p, std::span<const double> v_next,
                              double sigma) {
  return r + tv_dual_inf(p, v_next, sigma);
}
inline double robust_q_backup(double r, std::span<const double> p, std::span<const double> v_next,
                              double sigma) {
  return r + tv_dual_inf(p, v_next, sigma);
}

// Exact robust evaluation of agent `agent` under a per-step uniform mixture,
// against the true kernel: backward recursion averaging marginal rewards and
// worst-case transitions over the K slices of each step.
ValueTable robust_policy_eval(const GameInstance& game, const PolicyMixture& mixture, int agent);

struct BestResponse {
  ValueTable value;
  std::vector<std::vector<int>> greedy_action;  // [h][s], ties to lowest index
};

// Exact robust best response of `agent` to the per-step mixture.
BestResponse robust_best_response(const GameInstance& game, const PolicyMixture& mixture,
                                  int agent);

struct CceGap {
  std::vector<double> per_agent;
  double max_gap = 0.0;
};

// Best-response advantage at step 1, maximized over states (generative
// variant) or at a fixed initial state (online variant).
CceGap cce_gap(const GameInstance& game, const PolicyMixture& mixture);
CceGap cce_gap_at(const GameInstance& game, const PolicyMixture& mixture, int initial_state);

}  // namespace rlmg
