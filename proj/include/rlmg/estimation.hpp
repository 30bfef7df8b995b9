#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rlmg/game.hpp"
#include "rlmg/robust_ops.hpp"

namespace rlmg {

struct DataRecord {
  int state = 0;
  int action = 0;       // acting agent's own action
  double reward = 0.0;  // in [0, 1]
  int next_state = 0;
};

// Samples for one (agent, step); both samplers produce this shape.
struct Dataset {
  int agent = 0;
  int step = 0;
  std::vector<DataRecord> records;
};

// Regularized feature second-moment matrix with a cached factorization.
class GramMatrix {
 public:
  GramMatrix(Eigen::MatrixXd lambda_matrix, double ridge);

  const Eigen::MatrixXd& matrix() const { return lambda_; }
  double ridge() const { return ridge_; }
  int dim() const { return static_cast<int>(lambda_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

  // Elliptical norm sqrt(phi^T Lambda^-1 phi).
  double bonus_width(const Eigen::VectorXd& phi) const;

 private:
  Eigen::MatrixXd lambda_;
  double ridge_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct RewardEstimate {
  Eigen::VectorXd theta;

  double at(const Eigen::VectorXd& phi) const { return theta.dot(phi); }
};

// Ridge transition model: evaluating at phi yields a signed measure supported
// on the observed next states (duplicates merged at construction).
class TransitionEstimate {
 public:
  TransitionEstimate() = default;
  TransitionEstimate(std::vector<int> next_states, Eigen::MatrixXd psi, const GramMatrix& gram);

  bool empty() const { return next_states_.empty(); }
  const std::vector<int>& next_states() const { return next_states_; }

  SignedMeasure measure_at(const Eigen::VectorXd& phi, const GramMatrix& gram) const;

 private:
  std::vector<int> next_states_;  // distinct, ascending
  Eigen::MatrixXd psi_;           // d x |next_states|, column = sum of phis hitting that state
};

struct FitResult {
  GramMatrix gram;
  RewardEstimate reward;
  TransitionEstimate transition;
};

struct FitSample {
  Eigen::VectorXd phi;
  double reward = 0.0;
  int next_state = 0;
};

// Ridge regression over explicit feature samples. Empty input yields the
// prior-only estimate: Lambda = ridge * I, theta = 0, empty measure.
FitResult fit(std::span<const FitSample> samples, int dim, double ridge);

// Convenience overload reading features for the dataset's agent off the game.
FitResult fit(const Dataset& data, const GameInstance& game, double ridge);

}  // namespace rlmg
