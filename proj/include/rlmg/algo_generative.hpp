#pragma once

#include <cstdint>
#include <vector>

#include "rlmg/design.hpp"
#include "rlmg/estimation.hpp"
#include "rlmg/game.hpp"
#include "rlmg/robust_ops.hpp"

namespace rlmg {

struct GenerativeConfig {
  int samples_per_iteration = 100;  // N
  int iterations = 10;              // K
  double delta = 0.1;
  double ridge = 1.0;
  std::uint64_t seed = 0;
  double bonus_scale = 1.0;
  double design_tolerance = 0.05;

  void validate() const;
};

// Optimistic bonus; `leverage` is the achieved design leverage standing in
// for the d of the support-set lemma, `dim` the feature dimension.
double beta_generative(double leverage, int dim, int n_samples, int horizon, int iterations,
                       int n_agents, double delta, int n_actions);

// Queries the generative model ceil(N rho) times per design point, opponents
// drawn from the current iteration's policies.
Dataset sample_design_batch(const GameInstance& game, int agent, int h, const StepPolicy& current,
                            const DesignResult& design, int n, Rng& rng);

struct GenerativeDiagRow {
  int h = 0, k = 0, agent = 0, state = 0;
  double v_hat = 0.0, beta = 0.0, q_min = 0.0, q_max = 0.0;
};

struct GenerativeDiagnostics {
  std::vector<GenerativeDiagRow> rows;
  std::vector<ValueTable> v_hat;  // per agent
  std::vector<double> beta;       // per agent (state-independent here)
  long long total_queries = 0;
};

struct GenerativeResult {
  PolicyMixture mixture;
  GenerativeDiagnostics diagnostics;
};

// Backward recursion over steps; at each step, K FTRL iterations of
// design-based sampling, ridge fits and dual q-backups; the output mixture is
// uniform over the K per-step policies.
GenerativeResult run_generative(const GameInstance& game, const GenerativeConfig& config);

}  // namespace rlmg
