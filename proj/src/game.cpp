#include "rlmg/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace rlmg {
namespace {

constexpr double kRowSumTol = 1e-12;

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

int GameDims::joint_actions() const {
  int j = 1;
  for (int a : n_actions) j *= a;
  return j;
}

void GameDims::validate() const {
  check(n_agents >= 1, "GameDims: n_agents must be >= 1");
  check(horizon >= 1, "GameDims: horizon must be >= 1");
  check(n_states >= 1, "GameDims: n_states must be >= 1");
  check(static_cast<int>(n_actions.size()) == n_agents, "GameDims: n_actions size mismatch");
  check(static_cast<int>(feature_dim.size()) == n_agents, "GameDims: feature_dim size mismatch");
  for (int a : n_actions) check(a >= 1, "GameDims: every action count must be >= 1");
  for (int d : feature_dim) check(d >= 1, "GameDims: every feature dim must be >= 1");
}

int joint_index(const GameDims& dims, std::span<const int> actions) {
  check(static_cast<int>(actions.size()) == dims.n_agents, "joint_index: wrong tuple size");
  int idx = 0;
  for (int i = dims.n_agents - 1; i >= 0; --i) {
    check(actions[i] >= 0 && actions[i] < dims.n_actions[i], "joint_index: action out of range");
    idx = idx * dims.n_actions[i] + actions[i];
  }
  return idx;
}

void joint_decode(const GameDims& dims, int joint, std::span<int> actions_out) {
  check(static_cast<int>(actions_out.size()) == dims.n_agents, "joint_decode: wrong tuple size");
  check(joint >= 0 && joint < dims.joint_actions(), "joint_decode: index out of range");
  for (int i = 0; i < dims.n_agents; ++i) {
    actions_out[i] = joint % dims.n_actions[i];
    joint /= dims.n_actions[i];
  }
}

StepPolicy StepPolicy::uniform(const GameDims& dims) {
  StepPolicy p;
  p.n_actions_ = dims.n_actions;
  p.n_states_ = dims.n_states;
  p.agent_offset_.resize(dims.n_agents);
  int total = 0;
  for (int i = 0; i < dims.n_agents; ++i) {
    p.agent_offset_[i] = total;
    total += dims.n_states * dims.n_actions[i];
  }
  p.probs_.resize(total);
  for (int i = 0; i < dims.n_agents; ++i) {
    const double u = 1.0 / dims.n_actions[i];
    for (int s = 0; s < dims.n_states; ++s)
      for (int a = 0; a < dims.n_actions[i]; ++a)
        p.probs_[p.agent_offset_[i] + s * dims.n_actions[i] + a] = u;
  }
  return p;
}

std::span<const double> StepPolicy::row(int agent, int state) const {
  const int a_count = n_actions_.at(agent);
  check(state >= 0 && state < n_states_, "StepPolicy::row: state out of range");
  return {probs_.data() + agent_offset_[agent] + state * a_count,
          static_cast<std::size_t>(a_count)};
}

void StepPolicy::set_row(int agent, int state, std::span<const double> probs) {
  const int a_count = n_actions_.at(agent);
  check(state >= 0 && state < n_states_, "StepPolicy::set_row: state out of range");
  check(static_cast<int>(probs.size()) == a_count, "StepPolicy::set_row: row size mismatch");
  std::copy(probs.begin(), probs.end(),
            probs_.begin() + agent_offset_[agent] + state * a_count);
}

void StepPolicy::validate() const {
  for (int i = 0; i < n_agents(); ++i) {
    for (int s = 0; s < n_states_; ++s) {
      double sum = 0.0;
      for (double p : row(i, s)) {
        check(p >= 0.0, "StepPolicy: negative probability");
        sum += p;
      }
      check(std::abs(sum - 1.0) <= kRowSumTol, "StepPolicy: row does not sum to 1");
    }
  }
}

void PolicyProfile::validate() const {
  for (const auto& step : steps) step.validate();
}

int PolicyMixture::n_slices() const {
  return slices.empty() ? 0 : static_cast<int>(slices.front().size());
}

void PolicyMixture::validate() const {
  check(!slices.empty(), "PolicyMixture: empty");
  const int k = n_slices();
  check(k >= 1, "PolicyMixture: needs at least one slice per step");
  for (const auto& step : slices) {
    check(static_cast<int>(step.size()) == k, "PolicyMixture: ragged slice counts");
    for (const auto& slice : step) slice.validate();
  }
}

PolicyMixture PolicyMixture::from_profile(const PolicyProfile& profile) {
  PolicyMixture m;
  m.slices.reserve(profile.steps.size());
  for (const auto& step : profile.steps) m.slices.push_back({step});
  return m;
}

nlohmann::json PolicyMixture::to_json() const {
  nlohmann::json j;
  j["horizon"] = horizon();
  j["k"] = n_slices();
  nlohmann::json hs = nlohmann::json::array();
  for (const auto& step : slices) {
    nlohmann::json ks = nlohmann::json::array();
    for (const auto& slice : step) {
      nlohmann::json agents = nlohmann::json::array();
      for (int i = 0; i < slice.n_agents(); ++i) {
        nlohmann::json states = nlohmann::json::array();
        for (int s = 0; s < slice.n_states(); ++s) {
          auto r = slice.row(i, s);
          states.push_back(std::vector<double>(r.begin(), r.end()));
        }
        agents.push_back(states);
      }
      ks.push_back(agents);
    }
    hs.push_back(ks);
  }
  j["slices"] = hs;
  return j;
}

PolicyMixture PolicyMixture::from_json(const nlohmann::json& j) {
  PolicyMixture m;
  const auto& hs = j.at("slices");
  for (const auto& ks : hs) {
    std::vector<StepPolicy> step;
    for (const auto& agents : ks) {
      GameDims d;
      d.n_agents = static_cast<int>(agents.size());
      d.n_states = static_cast<int>(agents.at(0).size());
      d.horizon = 1;
      for (const auto& states : agents) d.n_actions.push_back(static_cast<int>(states.at(0).size()));
      d.feature_dim.assign(d.n_agents, 1);
      StepPolicy slice = StepPolicy::uniform(d);
      for (int i = 0; i < d.n_agents; ++i)
        for (int s = 0; s < d.n_states; ++s) {
          std::vector<double> row = agents.at(i).at(s).get<std::vector<double>>();
          slice.set_row(i, s, row);
        }
      step.push_back(std::move(slice));
    }
    m.slices.push_back(std::move(step));
  }
  m.validate();
  return m;
}

GameInstance::GameInstance(GameDims dims, std::vector<double> kernel, std::vector<double> reward,
                           std::vector<std::vector<double>> features, std::vector<double> sigma)
    : dims_(std::move(dims)),
      kernel_(std::move(kernel)),
      reward_(std::move(reward)),
      features_(std::move(features)),
      sigma_(std::move(sigma)) {
  dims_.validate();
  const int h_count = dims_.horizon;
  const int s_count = dims_.n_states;
  const int j_count = dims_.joint_actions();
  check(static_cast<int>(kernel_.size()) == h_count * s_count * j_count * s_count,
        "GameInstance: kernel size mismatch");
  check(static_cast<int>(reward_.size()) == dims_.n_agents * h_count * s_count * j_count,
        "GameInstance: reward size mismatch");
  check(static_cast<int>(features_.size()) == dims_.n_agents, "GameInstance: features size mismatch");
  check(static_cast<int>(sigma_.size()) == dims_.n_agents, "GameInstance: sigma size mismatch");

  for (int h = 0; h < h_count; ++h)
    for (int s = 0; s < s_count; ++s)
      for (int a = 0; a < j_count; ++a) {
        double sum = 0.0;
        for (double p : kernel_row(h, s, a)) {
          check(p >= 0.0, "GameInstance: negative kernel entry");
          sum += p;
        }
        check(std::abs(sum - 1.0) <= kRowSumTol, "GameInstance: kernel row does not sum to 1");
      }
  for (double r : reward_) check(r >= 0.0 && r <= 1.0, "GameInstance: reward outside [0,1]");
  for (double s : sigma_) check(s >= 0.0 && s <= 1.0, "GameInstance: sigma outside [0,1]");
  for (int i = 0; i < dims_.n_agents; ++i) {
    const int d = dims_.feature_dim[i];
    check(static_cast<int>(features_[i].size()) == s_count * dims_.n_actions[i] * d,
          "GameInstance: feature table size mismatch");
    for (int s = 0; s < s_count; ++s)
      for (int a = 0; a < dims_.n_actions[i]; ++a) {
        double norm2 = 0.0;
        for (double x : feature(i, s, a)) norm2 += x * x;
        check(norm2 <= 1.0 + 1e-9, "GameInstance: feature norm exceeds 1");
      }
  }
}

std::span<const double> GameInstance::kernel_row(int h, int s, int joint_a) const {
  const int s_count = dims_.n_states;
  const int j_count = dims_.joint_actions();
  check(h >= 0 && h < dims_.horizon && s >= 0 && s < s_count && joint_a >= 0 && joint_a < j_count,
        "GameInstance::kernel_row: index out of range");
  const std::size_t base = (static_cast<std::size_t>(h) * s_count + s) * j_count + joint_a;
  return {kernel_.data() + base * s_count, static_cast<std::size_t>(s_count)};
}

double GameInstance::reward(int agent, int h, int s, int joint_a) const {
  const int s_count = dims_.n_states;
  const int j_count = dims_.joint_actions();
  check(agent >= 0 && agent < dims_.n_agents && h >= 0 && h < dims_.horizon && s >= 0 &&
            s < s_count && joint_a >= 0 && joint_a < j_count,
        "GameInstance::reward: index out of range");
  return reward_[((static_cast<std::size_t>(agent) * dims_.horizon + h) * s_count + s) * j_count +
                 joint_a];
}

std::span<const double> GameInstance::feature(int agent, int s, int a) const {
  const int d = dims_.feature_dim.at(agent);
  check(s >= 0 && s < dims_.n_states && a >= 0 && a < dims_.n_actions[agent],
        "GameInstance::feature: index out of range");
  const std::size_t base = (static_cast<std::size_t>(s) * dims_.n_actions[agent] + a) * d;
  return {features_[agent].data() + base, static_cast<std::size_t>(d)};
}

GameInstance GameInstance::with_sigma(std::vector<double> sigma) const {
  return GameInstance(dims_, kernel_, reward_, features_, std::move(sigma));
}

nlohmann::json GameInstance::to_json() const {
  nlohmann::json j;
  j["dims"] = {{"n_agents", dims_.n_agents},
               {"horizon", dims_.horizon},
               {"n_states", dims_.n_states},
               {"n_actions", dims_.n_actions},
               {"feature_dim", dims_.feature_dim}};
  const int s_count = dims_.n_states;
  const int j_count = dims_.joint_actions();

  nlohmann::json kernel = nlohmann::json::array();
  for (int h = 0; h < dims_.horizon; ++h) {
    nlohmann::json hs = nlohmann::json::array();
    for (int s = 0; s < s_count; ++s) {
      nlohmann::json as = nlohmann::json::array();
      for (int a = 0; a < j_count; ++a) {
        auto r = kernel_row(h, s, a);
        as.push_back(std::vector<double>(r.begin(), r.end()));
      }
      hs.push_back(as);
    }
    kernel.push_back(hs);
  }
  j["kernel"] = kernel;

  nlohmann::json reward = nlohmann::json::array();
  for (int i = 0; i < dims_.n_agents; ++i) {
    nlohmann::json is = nlohmann::json::array();
    for (int h = 0; h < dims_.horizon; ++h) {
      nlohmann::json hs = nlohmann::json::array();
      for (int s = 0; s < s_count; ++s) {
        std::vector<double> row(j_count);
        for (int a = 0; a < j_count; ++a) row[a] = this->reward(i, h, s, a);
        hs.push_back(row);
      }
      is.push_back(hs);
    }
    reward.push_back(is);
  }
  j["reward"] = reward;

  nlohmann::json features = nlohmann::json::array();
  for (int i = 0; i < dims_.n_agents; ++i) {
    nlohmann::json is = nlohmann::json::array();
    for (int s = 0; s < s_count; ++s) {
      nlohmann::json ss = nlohmann::json::array();
      for (int a = 0; a < dims_.n_actions[i]; ++a) {
        auto f = feature(i, s, a);
        ss.push_back(std::vector<double>(f.begin(), f.end()));
      }
      is.push_back(ss);
    }
    features.push_back(is);
  }
  j["features"] = features;
  j["sigma"] = sigma_;
  return j;
}

GameInstance GameInstance::from_json(const nlohmann::json& j) {
  GameDims dims;
  const auto& jd = j.at("dims");
  dims.n_agents = jd.at("n_agents").get<int>();
  dims.horizon = jd.at("horizon").get<int>();
  dims.n_states = jd.at("n_states").get<int>();
  dims.n_actions = jd.at("n_actions").get<std::vector<int>>();
  dims.feature_dim = jd.at("feature_dim").get<std::vector<int>>();
  dims.validate();

  const int s_count = dims.n_states;
  const int j_count = dims.joint_actions();
  std::vector<double> kernel;
  kernel.reserve(static_cast<std::size_t>(dims.horizon) * s_count * j_count * s_count);
  for (const auto& hs : j.at("kernel"))
    for (const auto& as : hs)
      for (const auto& row : as)
        for (const auto& p : row) kernel.push_back(p.get<double>());

  std::vector<double> reward;
  reward.reserve(static_cast<std::size_t>(dims.n_agents) * dims.horizon * s_count * j_count);
  for (const auto& is : j.at("reward"))
    for (const auto& hs : is)
      for (const auto& row : hs)
        for (const auto& r : row) reward.push_back(r.get<double>());

  std::vector<std::vector<double>> features;
  for (const auto& is : j.at("features")) {
    std::vector<double> table;
    for (const auto& ss : is)
      for (const auto& f : ss)
        for (const auto& x : f) table.push_back(x.get<double>());
    features.push_back(std::move(table));
  }
  auto sigma = j.at("sigma").get<std::vector<double>>();
  return GameInstance(std::move(dims), std::move(kernel), std::move(reward), std::move(features),
                      std::move(sigma));
}

namespace {

// Cheap per-call guard on the opponent rows actually used.
void check_opponent_rows(const GameDims& dims, int agent, int s, const StepPolicy& others,
                         const char* op) {
  for (int m = 0; m < dims.n_agents; ++m) {
    if (m == agent) continue;
    double sum = 0.0;
    for (double p : others.row(m, s)) {
      check(p >= 0.0, std::string(op) + ": negative policy probability");
      sum += p;
    }
    check(std::abs(sum - 1.0) <= 1e-9, std::string(op) + ": policy row does not sum to 1");
  }
}

}  // namespace

std::vector<double> marginal_kernel(const GameInstance& game, int agent, int h, int s, int a,
                                    const StepPolicy& others) {
  const GameDims& dims = game.dims();
  check(agent >= 0 && agent < dims.n_agents, "marginal_kernel: agent out of range");
  check(a >= 0 && a < dims.n_actions[agent], "marginal_kernel: action out of range");
  check_opponent_rows(dims, agent, s, others, "marginal_kernel");
  std::vector<double> out(dims.n_states, 0.0);
  std::vector<int> tuple(dims.n_agents);
  const int j_count = dims.joint_actions();
  for (int joint = 0; joint < j_count; ++joint) {
    joint_decode(dims, joint, tuple);
    if (tuple[agent] != a) continue;
    double w = 1.0;
    for (int m = 0; m < dims.n_agents; ++m) {
      if (m == agent) continue;
      w *= others.row(m, s)[tuple[m]];
    }
    if (w == 0.0) continue;
    auto row = game.kernel_row(h, s, joint);
    for (int sp = 0; sp < dims.n_states; ++sp) out[sp] += w * row[sp];
  }
  return out;
}

double marginal_reward(const GameInstance& game, int agent, int h, int s, int a,
                       const StepPolicy& others) {
  const GameDims& dims = game.dims();
  check(agent >= 0 && agent < dims.n_agents, "marginal_reward: agent out of range");
  check(a >= 0 && a < dims.n_actions[agent], "marginal_reward: action out of range");
  check_opponent_rows(dims, agent, s, others, "marginal_reward");
  double out = 0.0;
  std::vector<int> tuple(dims.n_agents);
  const int j_count = dims.joint_actions();
  for (int joint = 0; joint < j_count; ++joint) {
    joint_decode(dims, joint, tuple);
    if (tuple[agent] != a) continue;
    double w = 1.0;
    for (int m = 0; m < dims.n_agents; ++m) {
      if (m == agent) continue;
      w *= others.row(m, s)[tuple[m]];
    }
    if (w == 0.0) continue;
    out += w * game.reward(agent, h, s, joint);
  }
  return out;
}

SampleResult sample_nominal(const GameInstance& game, int h, int s, int joint_a, Rng& rng) {
  SampleResult res;
  res.rewards.resize(game.dims().n_agents);
  for (int i = 0; i < game.dims().n_agents; ++i) res.rewards[i] = game.reward(i, h, s, joint_a);
  res.next_state = rng.next_categorical(game.kernel_row(h, s, joint_a));
  return res;
}

GameInstance build_tabular(const TabularSpec& spec) {
  GameDims dims = spec.dims;
  dims.feature_dim.resize(dims.n_agents);
  for (int i = 0; i < dims.n_agents; ++i) dims.feature_dim[i] = dims.n_states * dims.n_actions[i];

  std::vector<std::vector<double>> features(dims.n_agents);
  for (int i = 0; i < dims.n_agents; ++i) {
    const int d = dims.feature_dim[i];
    features[i].assign(static_cast<std::size_t>(dims.n_states) * dims.n_actions[i] * d, 0.0);
    for (int s = 0; s < dims.n_states; ++s)
      for (int a = 0; a < dims.n_actions[i]; ++a) {
        const int pair = s * dims.n_actions[i] + a;
        features[i][static_cast<std::size_t>(pair) * d + pair] = 1.0;
      }
  }
  return GameInstance(std::move(dims), spec.kernel, spec.reward, std::move(features), spec.sigma);
}

GameInstance build_random_tabular(const GameDims& dims_in, std::vector<double> sigma,
                                  std::uint64_t seed) {
  GameDims dims = dims_in;
  dims.feature_dim.assign(dims.n_agents, 1);  // placeholder, rebuilt by build_tabular
  for (int i = 0; i < dims.n_agents; ++i) dims.feature_dim[i] = dims.n_states * dims.n_actions[i];
  dims.validate();
  Rng rng = Rng(seed).substream({0x7ab01u});

  const int s_count = dims.n_states;
  const int j_count = dims.joint_actions();
  TabularSpec spec;
  spec.dims = dims;
  spec.sigma = std::move(sigma);
  spec.kernel.resize(static_cast<std::size_t>(dims.horizon) * s_count * j_count * s_count);
  spec.reward.resize(static_cast<std::size_t>(dims.n_agents) * dims.horizon * s_count * j_count);

  std::size_t pos = 0;
  for (int h = 0; h < dims.horizon; ++h)
    for (int s = 0; s < s_count; ++s)
      for (int a = 0; a < j_count; ++a) {
        double sum = 0.0;
        std::vector<double> row(s_count);
        for (int sp = 0; sp < s_count; ++sp) {
          row[sp] = -std::log(1.0 - rng.next_double());  // Exp(1), Dirichlet(1) after normalizing
          sum += row[sp];
        }
        for (int sp = 0; sp < s_count; ++sp) spec.kernel[pos++] = row[sp] / sum;
      }
  for (double& r : spec.reward) r = rng.next_double();
  return build_tabular(spec);
}

namespace {

struct LinearParts {
  std::vector<double> base_kernel;                // [h][s][s']
  std::vector<Eigen::MatrixXd> kernel_perturb;    // per agent per h (flattened h-major): d x S
  std::vector<double> reward_base;                // [i][h][s]
  std::vector<Eigen::VectorXd> reward_perturb;    // per (i, j, h): d_j
};

// Least-squares recovery of (mu, theta) for one agent and opponent profile;
// used both to validate the linear structure and to check the paper's
// normalization bounds inside the generator.
struct RecoveredModel {
  Eigen::MatrixXd mu;       // d x S
  Eigen::VectorXd theta;    // d
  double residual = 0.0;    // max of transition/reward residual Frobenius norms
};

RecoveredModel recover_linear_model(const GameInstance& game, int agent, int h,
                                    const StepPolicy& others) {
  const GameDims& dims = game.dims();
  const int d = dims.feature_dim[agent];
  const int rows = dims.n_states * dims.n_actions[agent];
  Eigen::MatrixXd phi(rows, d);
  Eigen::MatrixXd target_p(rows, dims.n_states);
  Eigen::VectorXd target_r(rows);
  int r = 0;
  for (int s = 0; s < dims.n_states; ++s)
    for (int a = 0; a < dims.n_actions[agent]; ++a, ++r) {
      auto f = game.feature(agent, s, a);
      for (int j = 0; j < d; ++j) phi(r, j) = f[j];
      auto mk = marginal_kernel(game, agent, h, s, a, others);
      for (int sp = 0; sp < dims.n_states; ++sp) target_p(r, sp) = mk[sp];
      target_r(r) = marginal_reward(game, agent, h, s, a, others);
    }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  RecoveredModel out;
  out.mu = qr.solve(target_p);
  out.theta = qr.solve(target_r);
  const double res_p = (phi * out.mu - target_p).norm();
  const double res_r = (phi * out.theta - target_r).norm();
  out.residual = std::max(res_p, res_r);
  return out;
}

}  // namespace

StepPolicy random_step_policy(const GameDims& dims, Rng& rng) {
  StepPolicy p = StepPolicy::uniform(dims);
  std::vector<double> row;
  for (int i = 0; i < dims.n_agents; ++i) {
    row.resize(dims.n_actions[i]);
    for (int s = 0; s < dims.n_states; ++s) {
      double sum = 0.0;
      for (double& x : row) {
        x = -std::log(1.0 - rng.next_double());
        sum += x;
      }
      for (double& x : row) x /= sum;
      p.set_row(i, s, row);
    }
  }
  return p;
}

GameInstance build_random_linear(const GameDims& dims_in, std::vector<double> sigma,
                                 std::uint64_t seed) {
  GameDims dims = dims_in;
  dims.validate();
  for (int i = 0; i < dims.n_agents; ++i) {
    if (dims.feature_dim[i] <= dims.n_states)
      throw std::invalid_argument(
          "build_random_linear: feature_dim must exceed n_states (one-hot state block plus "
          "action block)");
    // Separable [f(s); g(a)] features span at most S + A_i - 1 dimensions, so
    // a larger d would leave the feature set rank deficient and unusable for
    // the sampling design.
    if (dims.feature_dim[i] > dims.n_states + dims.n_actions[i] - 1)
      throw std::invalid_argument(
          "build_random_linear: feature_dim must be at most n_states + n_actions - 1");
  }

  constexpr int kMaxAttempts = 20;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = Rng(seed).substream({0x11e4au, static_cast<std::uint64_t>(attempt)});
    const int s_count = dims.n_states;
    const int j_count = dims.joint_actions();
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    // Features: [one-hot(s) ; zero-mean action block] / sqrt(2). Centering
    // the block across actions keeps it clear of the state block's span
    // (which already contains the constants), so the feature set is
    // full-dimensional.
    std::vector<std::vector<double>> features(dims.n_agents);
    bool full_rank = true;
    for (int i = 0; i < dims.n_agents; ++i) {
      const int d = dims.feature_dim[i];
      const int d_act = d - s_count;
      const int a_count = dims.n_actions[i];
      features[i].assign(static_cast<std::size_t>(s_count) * a_count * d, 0.0);
      Eigen::MatrixXd block(d_act, a_count);
      for (int j = 0; j < d_act; ++j) {
        for (int a = 0; a < a_count; ++a) block(j, a) = rng.next_gaussian();
        block.row(j).array() -= block.row(j).mean();
      }
      double peak = 0.0;
      for (int a = 0; a < a_count; ++a) peak = std::max(peak, block.col(a).norm());
      if (peak > 0.0) block /= peak;
      for (int s = 0; s < s_count; ++s)
        for (int a = 0; a < a_count; ++a) {
          double* f = features[i].data() + (static_cast<std::size_t>(s) * a_count + a) * d;
          f[s] = inv_sqrt2;
          for (int j = 0; j < d_act; ++j) f[s_count + j] = inv_sqrt2 * block(j, a);
        }
      Eigen::MatrixXd stacked(s_count * a_count, d);
      for (int s = 0; s < s_count; ++s)
        for (int a = 0; a < a_count; ++a)
          for (int j = 0; j < d; ++j)
            stacked(s * a_count + a, j) =
                features[i][(static_cast<std::size_t>(s) * a_count + a) * d + j];
      if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(stacked).rank() < d) full_rank = false;
    }
    if (!full_rank) continue;

    // Base kernel: interior rows so additive perturbations stay in the simplex.
    std::vector<double> base(static_cast<std::size_t>(dims.horizon) * s_count * s_count);
    double floor = 1.0;
    for (int h = 0; h < dims.horizon; ++h)
      for (int s = 0; s < s_count; ++s) {
        double sum = 0.0;
        std::vector<double> row(s_count);
        for (double& x : row) {
          x = -std::log(1.0 - rng.next_double());
          sum += x;
        }
        for (int sp = 0; sp < s_count; ++sp) {
          double v = 0.5 * row[sp] / sum + 0.5 / s_count;
          base[(static_cast<std::size_t>(h) * s_count + s) * s_count + sp] = v;
          floor = std::min(floor, v);
        }
      }

    // Per-agent kernel perturbations with zero row sums, scaled into the floor.
    std::vector<std::vector<Eigen::MatrixXd>> w(dims.n_agents);
    for (int i = 0; i < dims.n_agents; ++i) {
      const int d = dims.feature_dim[i];
      w[i].resize(dims.horizon);
      for (int h = 0; h < dims.horizon; ++h) {
        Eigen::MatrixXd m(d, s_count);
        for (int r = 0; r < d; ++r) {
          double mean = 0.0;
          for (int c = 0; c < s_count; ++c) {
            m(r, c) = rng.next_gaussian();
            mean += m(r, c);
          }
          mean /= s_count;
          for (int c = 0; c < s_count; ++c) m(r, c) -= mean;
        }
        double peak = 0.0;
        for (int s = 0; s < s_count; ++s)
          for (int a = 0; a < dims.n_actions[i]; ++a) {
            Eigen::Map<const Eigen::VectorXd> f(
                features[i].data() + (static_cast<std::size_t>(s) * dims.n_actions[i] + a) * d, d);
            peak = std::max(peak, (f.transpose() * m).cwiseAbs().maxCoeff());
          }
        if (peak > 0.0) m *= 0.9 * floor / (dims.n_agents * peak);
        w[i][h] = std::move(m);
      }
    }

    std::vector<double> kernel(static_cast<std::size_t>(dims.horizon) * s_count * j_count * s_count);
    std::vector<int> tuple(dims.n_agents);
    for (int h = 0; h < dims.horizon; ++h)
      for (int s = 0; s < s_count; ++s)
        for (int a = 0; a < j_count; ++a) {
          joint_decode(dims, a, tuple);
          double* row =
              kernel.data() + ((static_cast<std::size_t>(h) * s_count + s) * j_count + a) * s_count;
          const double* b = base.data() + (static_cast<std::size_t>(h) * s_count + s) * s_count;
          for (int sp = 0; sp < s_count; ++sp) row[sp] = b[sp];
          for (int i = 0; i < dims.n_agents; ++i) {
            const int d = dims.feature_dim[i];
            Eigen::Map<const Eigen::VectorXd> f(
                features[i].data() +
                    (static_cast<std::size_t>(s) * dims.n_actions[i] + tuple[i]) * d,
                d);
            Eigen::VectorXd delta = w[i][h].transpose() * f;
            for (int sp = 0; sp < s_count; ++sp) row[sp] += delta(sp);
          }
        }

    // Rewards: base(s) in [0.3, 0.7] plus per-agent feature terms bounded by 0.25.
    std::vector<double> reward(static_cast<std::size_t>(dims.n_agents) * dims.horizon * s_count *
                               j_count);
    std::vector<std::vector<Eigen::VectorXd>> u(dims.n_agents);
    for (int i = 0; i < dims.n_agents; ++i) {
      u[i].resize(static_cast<std::size_t>(dims.n_agents) * dims.horizon);
      for (int jff = 0; jff < dims.n_agents * dims.horizon; ++jff) {
        const int owner = jff / dims.horizon;
        const int d = dims.feature_dim[owner];
        Eigen::VectorXd v(d);
        for (int r = 0; r < d; ++r) v(r) = rng.next_gaussian();
        u[i][jff] = v;
      }
    }
    for (int i = 0; i < dims.n_agents; ++i)
      for (int h = 0; h < dims.horizon; ++h) {
        double peak_total = 0.0;
        std::vector<double> peaks(dims.n_agents, 0.0);
        for (int owner = 0; owner < dims.n_agents; ++owner) {
          const int d = dims.feature_dim[owner];
          const Eigen::VectorXd& v = u[i][owner * dims.horizon + h];
          for (int s = 0; s < s_count; ++s)
            for (int a = 0; a < dims.n_actions[owner]; ++a) {
              Eigen::Map<const Eigen::VectorXd> f(
                  features[owner].data() +
                      (static_cast<std::size_t>(s) * dims.n_actions[owner] + a) * d,
                  d);
              peaks[owner] = std::max(peaks[owner], std::abs(f.dot(v)));
            }
          peak_total += peaks[owner];
        }
        for (int owner = 0; owner < dims.n_agents; ++owner)
          if (peaks[owner] > 0.0)
            u[i][owner * dims.horizon + h] *= 0.25 / (dims.n_agents * peaks[owner]);
      }

    for (int i = 0; i < dims.n_agents; ++i)
      for (int h = 0; h < dims.horizon; ++h) {
        std::vector<double> rbase(s_count);
        for (double& x : rbase) x = 0.3 + 0.4 * rng.next_double();
        for (int s = 0; s < s_count; ++s)
          for (int a = 0; a < j_count; ++a) {
            joint_decode(dims, a, tuple);
            double r = rbase[s];
            for (int owner = 0; owner < dims.n_agents; ++owner) {
              const int d = dims.feature_dim[owner];
              Eigen::Map<const Eigen::VectorXd> f(
                  features[owner].data() +
                      (static_cast<std::size_t>(s) * dims.n_actions[owner] + tuple[owner]) * d,
                  d);
              r += f.dot(u[i][owner * dims.horizon + h]);
            }
            reward[((static_cast<std::size_t>(i) * dims.horizon + h) * s_count + s) * j_count + a] =
                r;
          }
      }

    GameInstance game(dims, std::move(kernel), std::move(reward), std::move(features), sigma);

    // Enforce the normalization bounds by rejection: recover (mu, theta) for a
    // few random opponent profiles and retry on violation.
    Rng check_rng = Rng(seed).substream({0xc4ecu, static_cast<std::uint64_t>(attempt)});
    bool ok = true;
    for (int trial = 0; trial < 3 && ok; ++trial) {
      StepPolicy others = random_step_policy(dims, check_rng);
      for (int i = 0; i < dims.n_agents && ok; ++i)
        for (int h = 0; h < dims.horizon && ok; ++h) {
          RecoveredModel model = recover_linear_model(game, i, h, others);
          if (model.residual > 1e-9) ok = false;
          if (model.theta.norm() > dims.feature_dim[i]) ok = false;
          for (int sp = 0; sp < s_count; ++sp)
            if (model.mu.col(sp).norm() > std::sqrt(static_cast<double>(dims.feature_dim[i])))
              ok = false;
        }
    }
    if (ok) return game;
  }
  throw std::runtime_error("build_random_linear: no draw satisfied the normalization bounds");
}

double validate_linear_structure(const GameInstance& game, int trial_policies, Rng& rng) {
  const GameDims& dims = game.dims();
  double worst = 0.0;
  for (int trial = 0; trial < trial_policies; ++trial) {
    StepPolicy others = random_step_policy(dims, rng);
    for (int i = 0; i < dims.n_agents; ++i)
      for (int h = 0; h < dims.horizon; ++h)
        worst = std::max(worst, recover_linear_model(game, i, h, others).residual);
  }
  return worst;
}

}  // namespace rlmg
