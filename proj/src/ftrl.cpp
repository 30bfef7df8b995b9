#include "rlmg/ftrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rlmg {

std::vector<double> ftrl_policy(std::span<const double> cumulative_q, double eta) {
  if (cumulative_q.empty()) throw std::invalid_argument("ftrl_policy: empty gain vector");
  if (!(eta >= 0.0)) throw std::invalid_argument("ftrl_policy: eta must be nonnegative");
  double peak = -std::numeric_limits<double>::infinity();
  for (double q : cumulative_q) peak = std::max(peak, eta * q);
  std::vector<double> out(cumulative_q.size());
  double total = 0.0;
  for (std::size_t a = 0; a < out.size(); ++a) {
    out[a] = std::exp(eta * cumulative_q[a] - peak);
    total += out[a];
  }
  for (double& x : out) x /= total;
  return out;
}

double eta_schedule(int k, int horizon, int n_actions) {
  if (k < 1 || horizon < 1 || n_actions < 1)
    throw std::invalid_argument("eta_schedule: arguments must be positive");
  return std::sqrt(std::log(static_cast<double>(n_actions)) / k) / horizon;
}

FtrlState::FtrlState(const GameDims& dims) : dims_(dims) {
  dims_.validate();
  cumulative_.resize(dims_.n_agents);
  for (int i = 0; i < dims_.n_agents; ++i)
    cumulative_[i].assign(static_cast<std::size_t>(dims_.n_states) * dims_.n_actions[i], 0.0);
}

std::vector<double> FtrlState::policy_row(int agent, int state) const {
  const int a_count = dims_.n_actions.at(agent);
  std::span<const double> cum(cumulative_[agent].data() +
                                  static_cast<std::size_t>(state) * a_count,
                              static_cast<std::size_t>(a_count));
  return ftrl_policy(cum, eta_schedule(iteration_, dims_.horizon, a_count));
}

StepPolicy FtrlState::current_policy() const {
  StepPolicy p = StepPolicy::uniform(dims_);
  for (int i = 0; i < dims_.n_agents; ++i)
    for (int s = 0; s < dims_.n_states; ++s) p.set_row(i, s, policy_row(i, s));
  return p;
}

void FtrlState::add_gains(int agent, int state, std::span<const double> q_row) {
  const int a_count = dims_.n_actions.at(agent);
  if (static_cast<int>(q_row.size()) != a_count)
    throw std::invalid_argument("FtrlState::add_gains: row size mismatch");
  double* cum = cumulative_[agent].data() + static_cast<std::size_t>(state) * a_count;
  for (int a = 0; a < a_count; ++a) cum[a] += q_row[a];
}

}  // namespace rlmg
