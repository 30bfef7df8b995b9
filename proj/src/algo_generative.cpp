#include "rlmg/algo_generative.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rlmg/ftrl.hpp"

namespace rlmg {

namespace {
constexpr std::uint64_t kRoleGenerative = 0x67656eULL;
}

void GenerativeConfig::validate() const {
  if (samples_per_iteration < 1) throw std::invalid_argument("GenerativeConfig: N must be >= 1");
  if (iterations < 1) throw std::invalid_argument("GenerativeConfig: K must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("GenerativeConfig: delta in (0,1)");
  if (ridge < 1.0) throw std::invalid_argument("GenerativeConfig: ridge must be >= 1");
  if (!(bonus_scale >= 0.0)) throw std::invalid_argument("GenerativeConfig: bonus_scale >= 0");
  if (!(design_tolerance > 0.0))
    throw std::invalid_argument("GenerativeConfig: design_tolerance > 0");
}

double beta_generative(double leverage, int dim, int n_samples, int horizon, int iterations,
                       int n_agents, double delta, int n_actions) {
  const double n = n_samples;
  const double h = horizon;
  const double d = dim;
  const double log_net = d * std::log(n * h + 1.0) +
                         2.0 * std::log(3.0 * iterations * n * h * n_agents / delta);
  const double ridge_term = 2.0 * h * std::sqrt(log_net) + h * std::sqrt(d);
  return 8.0 * std::sqrt(leverage / n) * ridge_term +
         2.0 * h * std::sqrt(std::log(static_cast<double>(n_actions)) / iterations);
}

Dataset sample_design_batch(const GameInstance& game, int agent, int h, const StepPolicy& current,
                            const DesignResult& design, int n, Rng& rng) {
  const GameDims& dims = game.dims();
  Dataset data;
  data.agent = agent;
  data.step = h;
  const std::vector<int> counts = allocate_samples(design, n);
  std::vector<int> tuple(dims.n_agents);
  for (std::size_t y = 0; y < design.points.size(); ++y) {
    const int s = design.points[y].state;
    const int a = design.points[y].action;
    for (int u = 0; u < counts[y]; ++u) {
      for (int m = 0; m < dims.n_agents; ++m)
        tuple[m] = (m == agent) ? a : rng.next_categorical(current.row(m, s));
      const int joint = joint_index(dims, tuple);
      SampleResult draw = sample_nominal(game, h, s, joint, rng);
      data.records.push_back({s, a, draw.rewards[agent], draw.next_state});
    }
  }
  return data;
}

GenerativeResult run_generative(const GameInstance& game, const GenerativeConfig& config) {
  config.validate();
  const GameDims& dims = game.dims();
  const int n_agents = dims.n_agents;
  const int k_count = config.iterations;
  const int n_samples = config.samples_per_iteration;

  std::vector<DesignResult> designs;
  designs.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i)
    designs.push_back(design_for_agent(game, i, config.design_tolerance));

  GenerativeResult out;
  out.diagnostics.v_hat.assign(n_agents, ValueTable::zeros(dims.horizon, dims.n_states));
  out.diagnostics.beta.resize(n_agents);
  for (int i = 0; i < n_agents; ++i)
    out.diagnostics.beta[i] =
        config.bonus_scale * beta_generative(designs[i].max_leverage, dims.feature_dim[i],
                                             n_samples, dims.horizon, k_count, n_agents,
                                             config.delta, dims.n_actions[i]);
  out.mixture.slices.assign(dims.horizon, {});

  const Rng base = Rng(config.seed).substream({kRoleGenerative});
  auto& v_hat = out.diagnostics.v_hat;

  // q tables per agent for one iteration: [s][a].
  std::vector<std::vector<std::vector<double>>> q(n_agents);
  for (int i = 0; i < n_agents; ++i)
    q[i].assign(dims.n_states, std::vector<double>(dims.n_actions[i], 0.0));

  std::vector<GenerativeDiagRow> qrange(static_cast<std::size_t>(k_count) * n_agents);

  for (int h = dims.horizon - 1; h >= 0; --h) {
    FtrlState ftrl(dims);
    out.mixture.slices[h].reserve(k_count);
    // Running sums of <pi_i^k(s), q_i^k(s, .)> for the optimistic value.
    std::vector<std::vector<double>> value_acc(n_agents,
                                               std::vector<double>(dims.n_states, 0.0));

    for (int k = 0; k < k_count; ++k) {
      const StepPolicy current = ftrl.current_policy();
      out.mixture.slices[h].push_back(current);

      for (int i = 0; i < n_agents; ++i) {
        Rng rng = base.substream({static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(i)});
        Dataset data =
            sample_design_batch(game, i, h, current, designs[i], n_samples, rng);
        out.diagnostics.total_queries += static_cast<long long>(data.records.size());
        const FitResult est = fit(data, game, config.ridge);

        double q_min = std::numeric_limits<double>::infinity();
        double q_max = -q_min;
        for (int s = 0; s < dims.n_states; ++s) {
          for (int a = 0; a < dims.n_actions[i]; ++a) {
            auto f = game.feature(i, s, a);
            const Eigen::Map<const Eigen::VectorXd> phi(f.data(), f.size());
            const double r_hat = est.reward.at(phi);
            const SignedMeasure measure = est.transition.measure_at(phi, est.gram);
            const double qv =
                robust_q_backup(r_hat, measure, v_hat[i].slices[h + 1], game.sigma(i));
            q[i][s][a] = qv;
            q_min = std::min(q_min, qv);
            q_max = std::max(q_max, qv);
          }
          const auto own_row = current.row(i, s);
          double dot = 0.0;
          for (int a = 0; a < dims.n_actions[i]; ++a) dot += own_row[a] * q[i][s][a];
          value_acc[i][s] += dot;
          ftrl.add_gains(i, s, q[i][s]);
        }
        qrange[static_cast<std::size_t>(k) * n_agents + i] = {h, k, i, 0, 0.0, 0.0, q_min, q_max};
      }
      ftrl.advance();
    }

    const double cap = static_cast<double>(dims.horizon - h);
    for (int i = 0; i < n_agents; ++i) {
      for (int s = 0; s < dims.n_states; ++s) {
        const double raw = value_acc[i][s] / k_count + out.diagnostics.beta[i];
        if (raw < -1e-9)
          throw std::logic_error("run_generative: optimistic value went negative");
        v_hat[i].slices[h][s] = std::min(raw, cap);
      }
    }
    for (int k = 0; k < k_count; ++k)
      for (int i = 0; i < n_agents; ++i) {
        const GenerativeDiagRow& qr = qrange[static_cast<std::size_t>(k) * n_agents + i];
        for (int s = 0; s < dims.n_states; ++s)
          out.diagnostics.rows.push_back({h, k, i, s, v_hat[i].slices[h][s],
                                          out.diagnostics.beta[i], qr.q_min, qr.q_max});
      }
  }
  return out;
}

}  // namespace rlmg
