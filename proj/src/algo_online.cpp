#include "rlmg/algo_online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rlmg/ftrl.hpp"

namespace rlmg {

namespace {
constexpr std::uint64_t kRoleOnline = 0x6f6e6cULL;
}

double OnlineConfig::effective_ridge(const GameDims& dims) const {
  if (ridge > 0.0) return ridge;
  const int d = *std::max_element(dims.feature_dim.begin(), dims.feature_dim.end());
  const double arg = 2.0 * d * dims.n_agents * effective_iterations() * dims.horizon * rounds /
                     delta;
  return std::max(1.0, std::ceil(std::log(arg)));
}

void OnlineConfig::validate(const GameDims& dims) const {
  if (rounds < 1) throw std::invalid_argument("OnlineConfig: T must be >= 1");
  if (samples < 0 || iterations < 0)
    throw std::invalid_argument("OnlineConfig: N and K must be positive (or 0 for N=K=T)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("OnlineConfig: delta in (0,1)");
  if (ridge != 0.0 && ridge < 1.0)
    throw std::invalid_argument("OnlineConfig: ridge must be >= 1 (or 0 for the default)");
  if (initial_state < 0 || initial_state >= dims.n_states)
    throw std::invalid_argument("OnlineConfig: initial state out of range");
  if (!(bonus_scale >= 0.0)) throw std::invalid_argument("OnlineConfig: bonus_scale >= 0");
}

int adversarial_step(const GameInstance& game, int agent, int h, int s, int a,
                     const StepPolicy& others, std::span<const double> v_next, Rng& rng) {
  const std::vector<double> nominal = marginal_kernel(game, agent, h, s, a, others);
  const auto [mn, mx] = std::minmax_element(v_next.begin(), v_next.end());
  if (game.sigma(agent) == 0.0 || *mn == *mx) return rng.next_categorical(nominal);
  const std::vector<double> worst = tv_worst_case_kernel(nominal, v_next, game.sigma(agent));
  return rng.next_categorical(worst);
}

namespace {

// One trajectory: adversarial prefix along steps 0..h-1, nominal draw at h.
DataRecord collect_trajectory(const GameInstance& game, int agent, int h, int initial_state,
                              const PolicyMixture& policies,
                              const std::vector<std::vector<double>>& v_under, Rng& rng) {
  const GameDims& dims = game.dims();
  const int k_count = policies.n_slices();
  std::vector<int> tuple(dims.n_agents);
  int s = initial_state;
  for (int j = 0; j < h; ++j) {
    const StepPolicy& pi = policies.slices[j][rng.next_index(k_count)];
    for (int m = 0; m < dims.n_agents; ++m) tuple[m] = rng.next_categorical(pi.row(m, s));
    s = adversarial_step(game, agent, j, s, tuple[agent], pi, v_under[j + 1], rng);
  }
  const StepPolicy& pi_h = policies.slices[h][rng.next_index(k_count)];
  for (int m = 0; m < dims.n_agents; ++m)
    tuple[m] = (m == agent) ? rng.next_index(dims.n_actions[agent])
                            : rng.next_categorical(pi_h.row(m, s));
  const int joint = joint_index(dims, tuple);
  const SampleResult draw = sample_nominal(game, h, s, joint, rng);
  return {s, tuple[agent], draw.rewards[agent], draw.next_state};
}

}  // namespace

Dataset hybrid_sampling(const GameInstance& game, int agent, int h, int round, int initial_state,
                        const RoundHistory& history, int n, Rng& rng) {
  if (round < 1) throw std::invalid_argument("hybrid_sampling: round must be >= 1");
  if (static_cast<int>(history.size()) != round - 1)
    throw std::invalid_argument("hybrid_sampling: history must hold the first round-1 rounds");
  const GameDims& dims = game.dims();
  Dataset data;
  data.agent = agent;
  data.step = h;

  if (round == 1) {
    // No past rounds: uniform policies and zero pessimistic values, so the
    // prefix degenerates to nominal transitions.
    PolicyMixture uniform = PolicyMixture::from_profile(
        PolicyProfile{std::vector<StepPolicy>(dims.horizon, StepPolicy::uniform(dims))});
    const std::vector<std::vector<double>> zeros(dims.horizon + 1,
                                                 std::vector<double>(dims.n_states, 0.0));
    for (int rep = 0; rep < n; ++rep)
      data.records.push_back(
          collect_trajectory(game, agent, h, initial_state, uniform, zeros, rng));
    return data;
  }

  const int reps = (n + round - 1) / round;  // ceil(N / t)
  for (int l = 0; l < round - 1; ++l) {
    const RoundRecord& past = history[l];
    for (int rep = 0; rep < reps; ++rep)
      data.records.push_back(collect_trajectory(game, agent, h, initial_state, past.policies,
                                                past.v_under[agent].slices, rng));
  }
  return data;
}

QPair online_q_pair(double r_hat, const SignedMeasure& p_hat, std::span<const double> v_bar_next,
                    std::span<const double> v_under_next, double sigma) {
  return {r_hat + tv_dual_inf(p_hat, v_bar_next, sigma),
          r_hat + tv_dual_inf(p_hat, v_under_next, sigma)};
}

double online_bonus_factor(const OnlineBonusParams& p) {
  const double h = p.horizon;
  const double d = p.dim;
  const double log_net =
      d * std::log(static_cast<double>(p.n_samples) * p.horizon + 1.0) +
      std::log(3.0 * p.rounds * p.n_samples * p.horizon * p.n_agents * p.iterations / p.delta);
  const double bias =
      p.variant == BonusVariant::kProofConsistent ? std::sqrt(d * p.ridge) : std::sqrt(d);
  return 4.0 * h * std::sqrt(log_net) + 2.0 * h * bias;
}

double beta_online_optimistic(const std::vector<std::vector<double>>& widths,
                              const OnlineBonusParams& p, int n_actions) {
  const int k_count = static_cast<int>(widths.size());
  double best = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    double avg = 0.0;
    for (int k = 0; k < k_count; ++k) avg += widths[k][a];
    best = std::max(best, avg / k_count);
  }
  return best * online_bonus_factor(p) + 1.0 / p.n_samples +
         2.0 * p.horizon * std::sqrt(std::log(static_cast<double>(n_actions)) / p.iterations);
}

double beta_online_pessimistic(const std::vector<std::vector<double>>& widths,
                               const std::vector<std::vector<double>>& policy_rows,
                               const OnlineBonusParams& p) {
  const int k_count = static_cast<int>(widths.size());
  double avg = 0.0;
  for (int k = 0; k < k_count; ++k) {
    double e = 0.0;
    for (std::size_t a = 0; a < widths[k].size(); ++a) e += policy_rows[k][a] * widths[k][a];
    avg += e;
  }
  return (avg / k_count) * online_bonus_factor(p) + 1.0 / p.n_samples;
}

OnlineResult run_online(const GameInstance& game, const OnlineConfig& config) {
  const GameDims& dims = game.dims();
  config.validate(dims);
  const int n_agents = dims.n_agents;
  const int t_count = config.rounds;
  const int k_count = config.effective_iterations();
  const int n_samples = config.effective_samples();
  const double ridge = config.effective_ridge(dims);

  OnlineResult out;
  out.ridge_used = ridge;
  RoundHistory history;
  const Rng base = Rng(config.seed).substream({kRoleOnline});

  for (int t = 1; t <= t_count; ++t) {
    std::vector<ValueTable> v_bar(n_agents, ValueTable::zeros(dims.horizon, dims.n_states));
    std::vector<ValueTable> v_under(n_agents, ValueTable::zeros(dims.horizon, dims.n_states));
    PolicyMixture mixture;
    mixture.slices.assign(dims.horizon, {});

    for (int h = dims.horizon - 1; h >= 0; --h) {
      FtrlState ftrl(dims);
      mixture.slices[h].reserve(k_count);
      std::vector<std::vector<double>> acc_bar(n_agents,
                                               std::vector<double>(dims.n_states, 0.0));
      std::vector<std::vector<double>> acc_under(n_agents,
                                                 std::vector<double>(dims.n_states, 0.0));
      // widths[i][s][k][a]: elliptical norms per iteration for the bonuses.
      std::vector<std::vector<std::vector<std::vector<double>>>> widths(n_agents);
      for (int i = 0; i < n_agents; ++i)
        widths[i].assign(dims.n_states, {});

      for (int k = 0; k < k_count; ++k) {
        const StepPolicy current = ftrl.current_policy();
        mixture.slices[h].push_back(current);

        for (int i = 0; i < n_agents; ++i) {
          Rng rng = base.substream({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(h),
                                    static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)});
          Dataset data = hybrid_sampling(game, i, h, t, config.initial_state, history, n_samples,
                                         rng);
          const FitResult est = fit(data, game, ridge);

          const int a_count = dims.n_actions[i];
          std::vector<double> q_bar(a_count), q_under(a_count), width_row(a_count);
          for (int s = 0; s < dims.n_states; ++s) {
            for (int a = 0; a < a_count; ++a) {
              auto f = game.feature(i, s, a);
              const Eigen::Map<const Eigen::VectorXd> phi(f.data(), f.size());
              const SignedMeasure measure = est.transition.measure_at(phi, est.gram);
              const QPair pair =
                  online_q_pair(est.reward.at(phi), measure, v_bar[i].slices[h + 1],
                                v_under[i].slices[h + 1], game.sigma(i));
              q_bar[a] = pair.optimistic;
              q_under[a] = pair.pessimistic;
              width_row[a] = est.gram.bonus_width(phi);
            }
            const auto own_row = current.row(i, s);
            for (int a = 0; a < a_count; ++a) {
              acc_bar[i][s] += own_row[a] * q_bar[a];
              acc_under[i][s] += own_row[a] * q_under[a];
            }
            widths[i][s].push_back(width_row);
            ftrl.add_gains(i, s, q_bar);  // FTRL consumes optimistic gains only
          }
        }
        ftrl.advance();
      }

      const double cap = static_cast<double>(dims.horizon - h);
      for (int i = 0; i < n_agents; ++i) {
        OnlineBonusParams params{dims.feature_dim[i], n_samples, dims.horizon,  t_count,
                                 n_agents,            k_count,   config.delta, ridge,
                                 config.bonus_variant};
        for (int s = 0; s < dims.n_states; ++s) {
          std::vector<std::vector<double>> policy_rows;
          policy_rows.reserve(k_count);
          for (int k = 0; k < k_count; ++k) {
            const auto r = mixture.slices[h][k].row(i, s);
            policy_rows.emplace_back(r.begin(), r.end());
          }
          const double b1 = config.bonus_scale *
                            beta_online_optimistic(widths[i][s], params, dims.n_actions[i]);
          const double b2 =
              config.bonus_scale * beta_online_pessimistic(widths[i][s], policy_rows, params);
          const double bar = std::min(acc_bar[i][s] / k_count + b1, cap);
          const double under = std::max(acc_under[i][s] / k_count - b2, 0.0);
          if (under > bar + 1e-12)
            throw std::logic_error("run_online: pessimistic value exceeded optimistic value");
          v_bar[i].slices[h][s] = bar;
          v_under[i].slices[h][s] = under;
        }
      }
    }

    out.round_mixtures.push_back(mixture);
    out.rounds.push_back({v_bar, v_under});
    history.push_back({std::move(mixture), std::move(v_under)});
  }
  return out;
}

RegretSeries regret_eval(const GameInstance& game, std::span<const PolicyMixture> rounds,
                         int initial_state) {
  if (initial_state < 0 || initial_state >= game.dims().n_states)
    throw std::invalid_argument("regret_eval: initial state out of range");
  const int n_agents = game.dims().n_agents;
  RegretSeries series;
  std::vector<double> cum(n_agents, 0.0);
  for (const PolicyMixture& mixture : rounds) {
    std::vector<double> star(n_agents), own(n_agents), gap(n_agents);
    for (int i = 0; i < n_agents; ++i) {
      star[i] = robust_best_response(game, mixture, i).value.slices[0][initial_state];
      own[i] = robust_policy_eval(game, mixture, i).slices[0][initial_state];
      gap[i] = star[i] - own[i];
      cum[i] += gap[i];
    }
    series.star.push_back(std::move(star));
    series.own.push_back(std::move(own));
    series.per_round_gap.push_back(gap);
    series.cumulative.push_back(cum);
    series.regret.push_back(*std::max_element(cum.begin(), cum.end()));
  }
  return series;
}

CceGap mixture_of_rounds_gap(const RegretSeries& series) {
  if (series.per_round_gap.empty()) throw std::invalid_argument("mixture_of_rounds_gap: empty");
  const int t_count = static_cast<int>(series.per_round_gap.size());
  CceGap gap;
  gap.per_agent = series.cumulative.back();
  for (double& g : gap.per_agent) g /= t_count;
  gap.max_gap = *std::max_element(gap.per_agent.begin(), gap.per_agent.end());
  return gap;
}

}  // namespace rlmg
