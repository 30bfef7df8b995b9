#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlmg/rng.hpp"

namespace rlmg {

// Sizes of a finite robust linear Markov game. Steps, states and actions are
// 0-indexed throughout the library.
struct GameDims {
  int n_agents = 0;
  int horizon = 0;
  int n_states = 0;
  std::vector<int> n_actions;    // per agent
  std::vector<int> feature_dim;  // per agent

  int joint_actions() const;
  void validate() const;
};

// Flat mixed-radix encoding of a joint action (agent 0 is the fastest digit).
int joint_index(const GameDims& dims, std::span<const int> actions);
void joint_decode(const GameDims& dims, int joint, std::span<int> actions_out);

// One step h of a joint product policy: a distribution over own actions per
// (agent, state) cell.
class StepPolicy {
 public:
  StepPolicy() = default;
  static StepPolicy uniform(const GameDims& dims);

  std::span<const double> row(int agent, int state) const;
  void set_row(int agent, int state, std::span<const double> probs);

  int n_agents() const { return static_cast<int>(n_actions_.size()); }
  int n_states() const { return n_states_; }
  int n_actions(int agent) const { return n_actions_.at(agent); }

  void validate() const;  // every row a distribution within 1e-12

  friend bool operator==(const StepPolicy&, const StepPolicy&) = default;

 private:
  std::vector<int> n_actions_;
  std::vector<int> agent_offset_;
  int n_states_ = 0;
  std::vector<double> probs_;
};

// A full product policy: one StepPolicy per step.
struct PolicyProfile {
  std::vector<StepPolicy> steps;

  int horizon() const { return static_cast<int>(steps.size()); }
  void validate() const;
};

// Per-step uniform mixture over K step slices, the object both algorithms
// output: slices[h][k] carries weight 1/K at step h.
struct PolicyMixture {
  std::vector<std::vector<StepPolicy>> slices;  // [h][k]

  int horizon() const { return static_cast<int>(slices.size()); }
  int n_slices() const;  // K, identical across steps
  void validate() const;

  static PolicyMixture from_profile(const PolicyProfile& profile);

  nlohmann::json to_json() const;
  static PolicyMixture from_json(const nlohmann::json& j);
};

// Ground-truth robust linear MG: nominal kernel, rewards, per-agent feature
// maps and TV radii. Immutable after construction; the constructor validates
// kernel rows, reward ranges, sigma ranges and feature norms.
class GameInstance {
 public:
  GameInstance(GameDims dims, std::vector<double> kernel, std::vector<double> reward,
               std::vector<std::vector<double>> features, std::vector<double> sigma);

  const GameDims& dims() const { return dims_; }

  std::span<const double> kernel_row(int h, int s, int joint_a) const;
  double reward(int agent, int h, int s, int joint_a) const;
  std::span<const double> feature(int agent, int s, int a) const;
  double sigma(int agent) const { return sigma_.at(agent); }
  const std::vector<double>& sigmas() const { return sigma_; }

  // Returns a copy with the TV radii replaced (handy for sigma sweeps).
  GameInstance with_sigma(std::vector<double> sigma) const;

  nlohmann::json to_json() const;
  static GameInstance from_json(const nlohmann::json& j);

 private:
  GameDims dims_;
  std::vector<double> kernel_;                  // [h][s][joint_a][s']
  std::vector<double> reward_;                  // [i][h][s][joint_a]
  std::vector<std::vector<double>> features_;   // per agent: [s][a][d]
  std::vector<double> sigma_;
};

// Opponent-marginalized nominal kernel row: sum over a_{-i} of the product of
// the other agents' policy rows times the nominal kernel.
std::vector<double> marginal_kernel(const GameInstance& game, int agent, int h, int s, int a,
                                    const StepPolicy& others);

// Opponent-marginalized reward.
double marginal_reward(const GameInstance& game, int agent, int h, int s, int a,
                       const StepPolicy& others);

struct SampleResult {
  std::vector<double> rewards;  // per agent
  int next_state = 0;
};

// One generative-model query: deterministic rewards, next state drawn from
// the nominal kernel row.
SampleResult sample_nominal(const GameInstance& game, int h, int s, int joint_a, Rng& rng);

// Tabular game description; build_tabular attaches one-hot features over
// (s, a_i) pairs, so d_i = S * A_i.
struct TabularSpec {
  GameDims dims;                 // feature_dim ignored, derived as S * A_i
  std::vector<double> kernel;    // [h][s][joint_a][s']
  std::vector<double> reward;    // [i][h][s][joint_a]
  std::vector<double> sigma;     // per agent
};

GameInstance build_tabular(const TabularSpec& spec);

// Random dense tabular instance (Dirichlet(1) kernel rows, uniform rewards).
GameInstance build_random_tabular(const GameDims& dims, std::vector<double> sigma,
                                  std::uint64_t seed);

// Random instance with non-trivial features that provably satisfies the
// per-agent linear structure: features are [state one-hot ; action block]
// scaled to unit norm, transitions are a base kernel plus per-agent additive
// perturbations whose rows sum to zero. Retries a bounded number of draws if
// the normalization bounds fail, then throws.
GameInstance build_random_linear(const GameDims& dims, std::vector<double> sigma,
                                 std::uint64_t seed);

// Max least-squares residual of the per-agent linear model over random
// opponent profiles; ~0 certifies the linear assumption holds.
double validate_linear_structure(const GameInstance& game, int trial_policies, Rng& rng);

// Random step policy with Dirichlet(1) rows (test and validation helper).
StepPolicy random_step_policy(const GameDims& dims, Rng& rng);

}  // namespace rlmg
