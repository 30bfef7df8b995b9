#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rlmg/estimation.hpp"
#include "rlmg/game.hpp"
#include "rlmg/robust_ops.hpp"

namespace rlmg {

enum class BonusVariant {
  kProofConsistent,  // ridge bias term 2H sqrt(d * lambda)
  kPrinted,          // 2H sqrt(d)
};

struct OnlineConfig {
  int rounds = 4;      // T
  int samples = 0;     // N; 0 means N = T
  int iterations = 0;  // K; 0 means K = T
  double delta = 0.1;
  double ridge = 0.0;  // 0 means max(1, ceil(ln(2 d n K H T / delta)))
  int initial_state = 0;
  std::uint64_t seed = 0;
  double bonus_scale = 1.0;
  BonusVariant bonus_variant = BonusVariant::kProofConsistent;

  int effective_samples() const { return samples > 0 ? samples : rounds; }
  int effective_iterations() const { return iterations > 0 ? iterations : rounds; }
  double effective_ridge(const GameDims& dims) const;
  void validate(const GameDims& dims) const;
};

// One finished round: its per-step policy slices and the pessimistic tables
// Hybrid-Sampling replays as the approximate adversarial environment.
struct RoundRecord {
  PolicyMixture policies;
  std::vector<ValueTable> v_under;  // per agent
};

using RoundHistory = std::vector<RoundRecord>;

// Draws the next state from the worst-case TV-ball kernel around the
// opponent-marginalized nominal row. A constant V makes every feasible kernel
// optimal; the nominal row is used unchanged in that case.
int adversarial_step(const GameInstance& game, int agent, int h, int s, int a,
                     const StepPolicy& others, std::span<const double> v_next, Rng& rng);

// Trajectory collection: adversarial prefix for steps < h driven by past
// rounds' policies and pessimistic values, uniform own-action exploration and
// a nominal transition at step h. Round 1 bootstraps with uniform policies
// and zero pessimistic values.
Dataset hybrid_sampling(const GameInstance& game, int agent, int h, int round, int initial_state,
                        const RoundHistory& history, int n, Rng& rng);

// Paired optimistic/pessimistic backups from one model estimate.
struct QPair {
  double optimistic = 0.0;
  double pessimistic = 0.0;
};
QPair online_q_pair(double r_hat, const SignedMeasure& p_hat, std::span<const double> v_bar_next,
                    std::span<const double> v_under_next, double sigma);

struct OnlineBonusParams {
  int dim = 0;
  int n_samples = 0;
  int horizon = 0;
  int rounds = 0;
  int n_agents = 0;
  int iterations = 0;
  double delta = 0.1;
  double ridge = 1.0;
  BonusVariant variant = BonusVariant::kProofConsistent;
};

// Shared multiplier of the elliptical widths in both bonuses.
double online_bonus_factor(const OnlineBonusParams& p);

// Optimistic bonus: max over own actions of the k-averaged width, plus 1/N
// and the FTRL term. `widths[k][a]` are elliptical norms for one state.
double beta_online_optimistic(const std::vector<std::vector<double>>& widths,
                              const OnlineBonusParams& p, int n_actions);

// Pessimistic bonus: policy-averaged widths, no FTRL term. `policy_rows[k]`
// is the acting agent's row at this state in iteration k.
double beta_online_pessimistic(const std::vector<std::vector<double>>& widths,
                               const std::vector<std::vector<double>>& policy_rows,
                               const OnlineBonusParams& p);

struct OnlineRoundDiag {
  std::vector<ValueTable> v_bar;    // per agent
  std::vector<ValueTable> v_under;  // per agent
};

struct OnlineResult {
  std::vector<PolicyMixture> round_mixtures;  // xi^t
  std::vector<OnlineRoundDiag> rounds;
  double ridge_used = 0.0;
};

OnlineResult run_online(const GameInstance& game, const OnlineConfig& config);

// Oracle regret series over the round mixtures, evaluated at the initial
// state with the exact robust DP oracles.
struct RegretSeries {
  std::vector<std::vector<double>> star;           // [t][agent], best-response value at s1
  std::vector<std::vector<double>> own;            // [t][agent], mixture value at s1
  std::vector<std::vector<double>> per_round_gap;  // [t][agent], star - own
  std::vector<std::vector<double>> cumulative;     // [t][agent]
  std::vector<double> regret;                      // [t], max over agents of cumulative
};

RegretSeries regret_eval(const GameInstance& game, std::span<const PolicyMixture> rounds,
                         int initial_state);

// Gap of the uniform round mixture, evaluated by linearity over rounds (draw
// a round, then its per-step mixture); equals Regret(T)/T by construction.
CceGap mixture_of_rounds_gap(const RegretSeries& series);

}  // namespace rlmg
