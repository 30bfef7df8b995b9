#include "rlmg/design.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlmg {
namespace {

constexpr double kPruneWeight = 1e-6;

Eigen::MatrixXd second_moment_of(const std::vector<Eigen::VectorXd>& features,
                                 const std::vector<double>& weights) {
  const int d = static_cast<int>(features.front().size());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < features.size(); ++i)
    if (weights[i] > 0.0) sigma.noalias() += weights[i] * features[i] * features[i].transpose();
  return sigma;
}

// Exhaustive leverage scan; returns (max leverage, argmax index).
std::pair<double, int> scan_leverage(const std::vector<Eigen::VectorXd>& features,
                                     const Eigen::MatrixXd& sigma) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("optimal_design: second-moment factorization failed");
  double best = -1.0;
  int arg = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double g = features[i].dot(ldlt.solve(features[i]));
    if (g > best) {
      best = g;
      arg = static_cast<int>(i);
    }
  }
  return {best, arg};
}

// Caratheodory reduction in moment space: while the support carries more
// than d(d+1)/2 + 1 atoms, their moment matrices (plus the mass constraint)
// are linearly dependent, so weight can be walked along a null direction
// until an atom hits zero. Sigma and the total mass are preserved exactly,
// hence so is every leverage.
void caratheodory_reduce(const std::vector<Eigen::VectorXd>& features, std::vector<double>& w,
                         int d) {
  const int moment_dim = d * (d + 1) / 2 + 1;
  for (;;) {
    std::vector<int> support;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] > 0.0) support.push_back(static_cast<int>(i));
    const int m = static_cast<int>(support.size());
    if (m <= moment_dim) return;

    Eigen::MatrixXd v(moment_dim, m);
    for (int c = 0; c < m; ++c) {
      const Eigen::VectorXd& f = features[support[c]];
      int row = 0;
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) v(row++, c) = f(i) * f(j);
      v(row, c) = 1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
    const Eigen::MatrixXd null_space = lu.kernel();
    if (null_space.cols() == 0 || null_space.col(0).cwiseAbs().maxCoeff() < 1e-12) return;
    Eigen::VectorXd gamma = null_space.col(0);
    if (gamma.maxCoeff() <= 0.0) gamma = -gamma;

    double t = std::numeric_limits<double>::infinity();
    for (int c = 0; c < m; ++c)
      if (gamma(c) > 0.0) t = std::min(t, w[support[c]] / gamma(c));
    for (int c = 0; c < m; ++c) {
      w[support[c]] -= t * gamma(c);
      if (w[support[c]] < 1e-14) w[support[c]] = 0.0;
    }
  }
}

// Greedy volume seed: d indices chosen by largest residual orthogonal to the
// span of those already picked.
std::vector<int> greedy_spanning_subset(const std::vector<Eigen::VectorXd>& features, int d) {
  std::vector<Eigen::VectorXd> basis;  // orthonormal
  std::vector<int> chosen;
  std::vector<Eigen::VectorXd> residual(features.begin(), features.end());
  for (int round = 0; round < d; ++round) {
    double best = -1.0;
    int arg = -1;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double n = residual[i].norm();
      if (n > best + 1e-15) {
        best = n;
        arg = static_cast<int>(i);
      }
    }
    if (arg < 0 || best < 1e-10)
      throw std::invalid_argument(
          "optimal_design: feature set does not span R^d; reduce the feature dimension");
    Eigen::VectorXd q = residual[arg] / best;
    basis.push_back(q);
    chosen.push_back(arg);
    for (auto& r : residual) r -= q * q.dot(r);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

DesignResult optimal_design(const std::vector<Eigen::VectorXd>& features, double tolerance,
                            int max_iterations) {
  if (features.empty()) throw std::invalid_argument("optimal_design: empty feature set");
  const int d = static_cast<int>(features.front().size());
  for (const auto& f : features)
    if (static_cast<int>(f.size()) != d)
      throw std::invalid_argument("optimal_design: inconsistent feature dimensions");
  if (!(tolerance > 0.0)) throw std::invalid_argument("optimal_design: tolerance must be positive");

  std::vector<double> w(features.size(), 0.0);
  for (int idx : greedy_spanning_subset(features, d)) w[idx] = 1.0 / d;

  struct Leverages {
    double g_max, g_min;
    int arg_max, arg_min;  // arg_min over the current support
  };
  const auto scan = [&](const std::vector<double>& weights) -> Leverages {
    const Eigen::MatrixXd sigma = second_moment_of(features, weights);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("optimal_design: second-moment factorization failed");
    Leverages lev{-1.0, std::numeric_limits<double>::infinity(), 0, -1};
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double g = features[i].dot(ldlt.solve(features[i]));
      if (g > lev.g_max) {
        lev.g_max = g;
        lev.arg_max = static_cast<int>(i);
      }
      if (weights[i] > 0.0 && g < lev.g_min) {
        lev.g_min = g;
        lev.arg_min = static_cast<int>(i);
      }
    }
    return lev;
  };
  // Exact line optimum of log det along (1-l) w + l e_k, written in the
  // u = l/(1-l) parametrization: u* = (g-d)/(g(d-1)). Away steps clamp at
  // u = -w_k, which zeroes the atom.
  const auto move = [&](int k, double u) {
    const double l = u / (1.0 + u);
    for (double& x : w) x *= 1.0 - l;
    w[k] += l;
    if (w[k] < 1e-15) w[k] = 0.0;
  };
  const auto step = [&](int k, double g, bool away) {
    double u = (g - d) / (g * (d - 1.0));
    if (away) u = std::max(u, -w[k]);
    move(k, u);
  };

  // Frank-Wolfe with away steps: add steps pull weight toward the
  // max-leverage point, away steps drain low-leverage support atoms. The
  // internal stopping rule is tighter than the contract tolerance so the
  // support-reduction stage has slack to work with.
  const double tol_internal = std::min(tolerance, 0.005);
  int budget = max_iterations;
  const auto converge = [&]() {
    while (budget-- > 0) {
      const Leverages lev = scan(w);
      if (lev.g_max <= (1.0 + tol_internal) * d) return;
      const bool add = (lev.g_max - d) >= (d - lev.g_min) || lev.arg_min < 0;
      step(add ? lev.arg_max : lev.arg_min, add ? lev.g_max : lev.g_min, !add);
    }
    throw std::runtime_error("optimal_design: Frank-Wolfe did not converge within iteration cap");
  };

  // Converge, collapse the support by exact Caratheodory reduction (leverage
  // preserved), then close the residual d(d+1)/2 + 1 case by walking the
  // smallest singular direction of the square moment system — near the
  // optimum that direction is tolerance-sized, so the (1 + 2 tol) post-prune
  // bound absorbs it.
  const int cap = d * (d + 1) / 2;
  bool reduced = false;
  for (int round = 0; round < 5 && !reduced; ++round) {
    converge();
    for (double& x : w)
      if (x < kPruneWeight) x = 0.0;
    caratheodory_reduce(features, w, d);

    std::vector<int> support;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] > 0.0) support.push_back(static_cast<int>(i));
    if (static_cast<int>(support.size()) > cap) {
      const int m = static_cast<int>(support.size());
      Eigen::MatrixXd v(cap + 1, m);
      for (int c = 0; c < m; ++c) {
        const Eigen::VectorXd& f = features[support[c]];
        int row = 0;
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) v(row++, c) = f(i) * f(j);
        v(row, c) = 1.0;
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
      Eigen::VectorXd gamma = svd.matrixV().col(m - 1);
      if (gamma.maxCoeff() < -gamma.minCoeff()) gamma = -gamma;
      double t = std::numeric_limits<double>::infinity();
      for (int c = 0; c < m; ++c)
        if (gamma(c) > 1e-12) t = std::min(t, w[support[c]] / gamma(c));
      if (std::isfinite(t))
        for (int c = 0; c < m; ++c) {
          w[support[c]] -= t * gamma(c);
          if (w[support[c]] < 1e-14) w[support[c]] = 0.0;
        }
    }
    reduced = static_cast<int>(std::count_if(w.begin(), w.end(),
                                             [](double x) { return x > 0.0; })) <= cap;
  }
  if (!reduced)
    throw std::runtime_error("optimal_design: cannot reduce support under d(d+1)/2");

  // Renormalize after pruning and re-verify the leverage bound end to end.
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  DesignResult result;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) {
      result.support.push_back(static_cast<int>(i));
      result.rho.push_back(w[i]);
    }
  result.second_moment = second_moment_of(features, w);
  result.max_leverage = scan_leverage(features, result.second_moment).first;
  if (result.max_leverage > (1.0 + 2.0 * tolerance) * d)
    throw std::runtime_error("optimal_design: leverage bound failed after pruning");
  return result;
}

DesignResult design_for_agent(const GameInstance& game, int agent, double tolerance) {
  const GameDims& dims = game.dims();
  if (agent < 0 || agent >= dims.n_agents)
    throw std::invalid_argument("design_for_agent: agent out of range");
  std::vector<Eigen::VectorXd> feats;
  std::vector<DesignPoint> points;
  feats.reserve(static_cast<std::size_t>(dims.n_states) * dims.n_actions[agent]);
  for (int s = 0; s < dims.n_states; ++s)
    for (int a = 0; a < dims.n_actions[agent]; ++a) {
      auto f = game.feature(agent, s, a);
      feats.emplace_back(Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()));
      points.push_back({s, a});
    }
  DesignResult result = optimal_design(feats, tolerance);
  result.points.reserve(result.support.size());
  for (int idx : result.support) result.points.push_back(points[idx]);
  return result;
}

std::vector<int> allocate_samples(const DesignResult& design, int n) {
  if (n < 1) throw std::invalid_argument("allocate_samples: n must be >= 1");
  std::vector<int> counts(design.rho.size());
  for (std::size_t i = 0; i < design.rho.size(); ++i)
    counts[i] = static_cast<int>(std::ceil(n * design.rho[i]));
  return counts;
}

}  // namespace rlmg
