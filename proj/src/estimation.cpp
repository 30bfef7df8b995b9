#include "rlmg/estimation.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace rlmg {

GramMatrix::GramMatrix(Eigen::MatrixXd lambda_matrix, double ridge)
    : lambda_(std::move(lambda_matrix)), ridge_(ridge) {
  if (ridge_ < 1.0) throw std::invalid_argument("GramMatrix: ridge parameter must be >= 1");
  if (lambda_.rows() != lambda_.cols()) throw std::invalid_argument("GramMatrix: not square");
  if ((lambda_ - lambda_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("GramMatrix: not symmetric");
  llt_.compute(lambda_);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("GramMatrix: Cholesky factorization failed");
}

double GramMatrix::bonus_width(const Eigen::VectorXd& phi) const {
  const double q = phi.dot(llt_.solve(phi));
  return std::sqrt(std::max(q, 0.0));
}

TransitionEstimate::TransitionEstimate(std::vector<int> next_states, Eigen::MatrixXd psi,
                                       const GramMatrix& gram)
    : next_states_(std::move(next_states)), psi_(std::move(psi)) {
  if (psi_.cols() != static_cast<Eigen::Index>(next_states_.size()) ||
      (psi_.cols() > 0 && psi_.rows() != gram.dim()))
    throw std::invalid_argument("TransitionEstimate: shape mismatch");
}

SignedMeasure TransitionEstimate::measure_at(const Eigen::VectorXd& phi,
                                             const GramMatrix& gram) const {
  SignedMeasure m;
  if (next_states_.empty()) return m;
  const Eigen::VectorXd y = gram.solve(phi);
  m.support = next_states_;
  m.weights.resize(next_states_.size());
  for (std::size_t c = 0; c < next_states_.size(); ++c)
    m.weights[c] = psi_.col(static_cast<Eigen::Index>(c)).dot(y);
  return m;
}

FitResult fit(std::span<const FitSample> samples, int dim, double ridge) {
  if (dim < 1) throw std::invalid_argument("fit: dimension must be >= 1");
  if (ridge < 1.0) throw std::invalid_argument("fit: ridge parameter must be >= 1");

  Eigen::MatrixXd lambda = ridge * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd reward_rhs = Eigen::VectorXd::Zero(dim);
  std::map<int, Eigen::VectorXd> psi_by_state;  // ordered: deterministic support
  for (const FitSample& s : samples) {
    if (s.phi.size() != dim) throw std::invalid_argument("fit: feature dimension mismatch");
    lambda.noalias() += s.phi * s.phi.transpose();
    reward_rhs.noalias() += s.phi * s.reward;
    auto [it, inserted] = psi_by_state.try_emplace(s.next_state, Eigen::VectorXd::Zero(dim));
    it->second += s.phi;
  }

  GramMatrix gram(std::move(lambda), ridge);
  RewardEstimate reward{gram.solve(reward_rhs)};

  std::vector<int> states;
  Eigen::MatrixXd psi(dim, static_cast<Eigen::Index>(psi_by_state.size()));
  Eigen::Index c = 0;
  for (auto& [state, vec] : psi_by_state) {
    states.push_back(state);
    psi.col(c++) = vec;
  }
  TransitionEstimate transition(std::move(states), std::move(psi), gram);
  return FitResult{std::move(gram), std::move(reward), std::move(transition)};
}

FitResult fit(const Dataset& data, const GameInstance& game, double ridge) {
  const int d = game.dims().feature_dim.at(data.agent);
  std::vector<FitSample> samples;
  samples.reserve(data.records.size());
  for (const DataRecord& r : data.records) {
    auto f = game.feature(data.agent, r.state, r.action);
    samples.push_back({Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()), r.reward,
                       r.next_state});
  }
  return fit(samples, d, ridge);
}

}  // namespace rlmg
