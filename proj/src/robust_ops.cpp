#include "rlmg/robust_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rlmg {
namespace {

void check_sigma(double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0))
    throw std::invalid_argument("tv robust op: sigma must lie in [0,1]");
}

// Shared maximization of f(alpha) = measure_term(alpha) - sigma * (alpha -
// min(alpha, v_min)) over a candidate list. Candidates are scanned in
// ascending order and only strict improvements replace the incumbent.
double maximize_over_candidates(std::vector<double> candidates, double v_min, double sigma,
                                const std::vector<int>& support, std::span<const double> weights,
                                std::span<const double> v) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best = -std::numeric_limits<double>::infinity();
  for (double alpha : candidates) {
    double term = 0.0;
    for (std::size_t m = 0; m < support.size(); ++m)
      term += weights[m] * std::min(v[support[m]], alpha);
    const double penalty = sigma * (alpha - std::min(alpha, v_min));
    if (term - penalty > best) best = term - penalty;
  }
  return best;
}

}  // namespace

std::vector<double> clip_value(std::span<const double> v, double alpha) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::min(v[i], alpha);
  return out;
}

double tv_dual_inf(std::span<const double> p, std::span<const double> v, double sigma) {
  check_sigma(sigma);
  if (p.empty() || v.empty() || p.size() != v.size())
    throw std::invalid_argument("tv_dual_inf: empty or mismatched support");
  const double v_min = *std::min_element(v.begin(), v.end());
  std::vector<int> support(p.size());
  std::iota(support.begin(), support.end(), 0);
  std::vector<double> candidates(v.begin(), v.end());
  return maximize_over_candidates(std::move(candidates), v_min, sigma, support, p, v);
}

double tv_dual_inf(const SignedMeasure& p, std::span<const double> v, double sigma) {
  check_sigma(sigma);
  if (v.empty()) throw std::invalid_argument("tv_dual_inf: empty value vector");
  if (p.support.size() != p.weights.size())
    throw std::invalid_argument("tv_dual_inf: measure support/weight size mismatch");
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  std::vector<double> candidates;
  candidates.reserve(p.support.size() + 2);
  for (int s : p.support) {
    if (s < 0 || s >= static_cast<int>(v.size()))
      throw std::invalid_argument("tv_dual_inf: support index out of range");
    candidates.push_back(v[s]);
  }
  candidates.push_back(*mn);
  candidates.push_back(*mx);
  return maximize_over_candidates(std::move(candidates), *mn, sigma, p.support, p.weights, v);
}

std::vector<double> tv_worst_case_kernel(std::span<const double> p, std::span<const double> v,
                                         double sigma) {
  check_sigma(sigma);
  if (p.empty() || p.size() != v.size())
    throw std::invalid_argument("tv_worst_case_kernel: empty or mismatched support");
  double sum = 0.0;
  for (double x : p) {
    if (x < -1e-12) throw std::invalid_argument("tv_worst_case_kernel: P not a distribution");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("tv_worst_case_kernel: P does not sum to 1");

  const int n = static_cast<int>(p.size());
  int recipient = 0;
  for (int s = 1; s < n; ++s)
    if (v[s] < v[recipient]) recipient = s;  // lowest index among minimizers

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a > b;
  });

  std::vector<double> out(p.begin(), p.end());
  double budget = sigma;
  for (int s : order) {
    if (s == recipient || budget <= 0.0) continue;
    const double moved = std::min(out[s], budget);
    out[s] -= moved;
    out[recipient] += moved;
    budget -= moved;
  }
  return out;
}

namespace {

// Backward recursion shared by robust evaluation and best response. The
// per-action value at (h, s) averages, over the K slices, the marginal reward
// plus the TV dual of the marginalized true kernel against the next slice.
enum class BackupMode { kEvaluate, kBestRespond };

void backward_pass(const GameInstance& game, const PolicyMixture& mixture, int agent,
                   BackupMode mode, ValueTable& value, std::vector<std::vector<int>>* greedy) {
  const GameDims& dims = game.dims();
  if (agent < 0 || agent >= dims.n_agents)
    throw std::invalid_argument("robust backward pass: agent out of range");
  if (mixture.horizon() != dims.horizon)
    throw std::invalid_argument("robust backward pass: mixture horizon mismatch");
  const int k_count = mixture.n_slices();
  const int a_count = dims.n_actions[agent];
  const double sigma = game.sigma(agent);
  const double h_total = static_cast<double>(dims.horizon);

  value = ValueTable::zeros(dims.horizon, dims.n_states);
  if (greedy) greedy->assign(dims.horizon, std::vector<int>(dims.n_states, 0));

  // Per-(slice, action) backup values at one (h, s) cell.
  std::vector<double> backup(static_cast<std::size_t>(k_count) * a_count);

  for (int h = dims.horizon - 1; h >= 0; --h) {
    const auto& next = value.slices[h + 1];
    for (int s = 0; s < dims.n_states; ++s) {
      for (int k = 0; k < k_count; ++k) {
        const StepPolicy& slice = mixture.slices[h][k];
        for (int a = 0; a < a_count; ++a) {
          const double r = marginal_reward(game, agent, h, s, a, slice);
          const auto kernel = marginal_kernel(game, agent, h, s, a, slice);
          backup[static_cast<std::size_t>(k) * a_count + a] = r + tv_dual_inf(kernel, next, sigma);
        }
      }
      double out;
      if (mode == BackupMode::kEvaluate) {
        out = 0.0;
        for (int k = 0; k < k_count; ++k) {
          const auto own_row = mixture.slices[h][k].row(agent, s);
          for (int a = 0; a < a_count; ++a)
            out += own_row[a] * backup[static_cast<std::size_t>(k) * a_count + a];
        }
        out /= k_count;
      } else {
        int best_a = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < a_count; ++a) {
          double total = 0.0;
          for (int k = 0; k < k_count; ++k)
            total += backup[static_cast<std::size_t>(k) * a_count + a];
          if (total > best) {
            best = total;
            best_a = a;
          }
        }
        out = best / k_count;
        if (greedy) (*greedy)[h][s] = best_a;
      }
      const double cap = h_total - h;
      if (out < -1e-9 || out > cap + 1e-9)
        throw std::logic_error("robust backward pass: value escaped [0, H-h]");
      value.slices[h][s] = out;
    }
  }
}

}  // namespace

ValueTable robust_policy_eval(const GameInstance& game, const PolicyMixture& mixture, int agent) {
  ValueTable value;
  backward_pass(game, mixture, agent, BackupMode::kEvaluate, value, nullptr);
  return value;
}

BestResponse robust_best_response(const GameInstance& game, const PolicyMixture& mixture,
                                  int agent) {
  BestResponse br;
  backward_pass(game, mixture, agent, BackupMode::kBestRespond, br.value, &br.greedy_action);
  return br;
}

namespace {

CceGap gap_impl(const GameInstance& game, const PolicyMixture& mixture, int initial_state) {
  CceGap gap;
  gap.per_agent.resize(game.dims().n_agents);
  for (int i = 0; i < game.dims().n_agents; ++i) {
    const ValueTable star = robust_best_response(game, mixture, i).value;
    const ValueTable own = robust_policy_eval(game, mixture, i);
    double g = -std::numeric_limits<double>::infinity();
    if (initial_state >= 0) {
      g = star.slices[0][initial_state] - own.slices[0][initial_state];
    } else {
      for (int s = 0; s < game.dims().n_states; ++s)
        g = std::max(g, star.slices[0][s] - own.slices[0][s]);
    }
    gap.per_agent[i] = g;
  }
  gap.max_gap = *std::max_element(gap.per_agent.begin(), gap.per_agent.end());
  return gap;
}

}  // namespace

CceGap cce_gap(const GameInstance& game, const PolicyMixture& mixture) {
  return gap_impl(game, mixture, -1);
}

CceGap cce_gap_at(const GameInstance& game, const PolicyMixture& mixture, int initial_state) {
  if (initial_state < 0 || initial_state >= game.dims().n_states)
    throw std::invalid_argument("cce_gap_at: initial state out of range");
  return gap_impl(game, mixture, initial_state);
}

}  // namespace rlmg
