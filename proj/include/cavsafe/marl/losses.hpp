#pragma once

#include <Eigen/Core>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cavsafe/marl/features.hpp"
#include "cavsafe/marl/mlp.hpp"

namespace cavsafe::marl {

class DegenerateBatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySafeSet : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Column-wise softmax with max subtraction.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// pi_theta(. | s) for one encoded local state.
Eigen::VectorXd policy_forward(const Mlp& actor, std::span<const double> theta,
                               const Eigen::VectorXd& x);

struct ReturnsAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// R^t = sum_{t'>=t} gamma^(t'-t) r^t' + gamma^(T-t) V(s^T) and A^t = R^t - V(s^t).
/// Pass bootstrap_value = 0 for a terminal trajectory.
ReturnsAdvantages compute_returns_advantages(const std::vector<double>& rewards,
                                             const std::vector<double>& values,
                                             double bootstrap_value, double gamma);

inline double robust_advantage(double advantage, double worst_q, double kappa_wst) {
  return advantage + kappa_wst * worst_q;
}

struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;  // d value / d params
};

struct PolicyBatch {
  Eigen::MatrixXd states;        // one column per sample
  std::vector<int> actions;
  std::vector<double> old_probs; // pi_old(a | s)
  std::vector<double> advantages;
};

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A) for one sample.
double clipped_term(double ratio, double advantage, double clip_eps);

/// Mean clipped surrogate (to maximize) and its gradient.
LossGrad rcs_loss(const Mlp& actor, std::span<const double> theta, const PolicyBatch& batch,
                  double clip_eps);

/// Mean (V(s) - R)^2.
LossGrad value_loss(const Mlp& critic, std::span<const double> phi, const Eigen::MatrixXd& states,
                    const std::vector<double>& returns);

struct QBatch {
  Eigen::MatrixXd states;
  std::vector<int> actions;
  std::vector<double> rewards;
  Eigen::MatrixXd next_states;
  std::vector<char> terminal;
};

/// r + gamma min_a' Q_target(s', a'), or r on terminal transitions.
std::vector<double> worst_q_targets(const Mlp& q, std::span<const double> omega_target,
                                    const QBatch& batch, double gamma);

/// Mean (Q(s, a) - target)^2.
LossGrad worst_q_loss(const Mlp& q, std::span<const double> omega, const QBatch& batch,
                      const std::vector<double>& targets);

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// w(s) = max(0, V(s) - min_a Q(s, a)) on centralized states.
std::vector<double> importance_weights(const Mlp& critic, std::span<const double> phi,
                                       const Mlp& q, std::span<const double> omega,
                                       const Eigen::MatrixXd& central_states);

struct RegBatch {
  Eigen::MatrixXd states;       // clean local features
  Eigen::MatrixXd adversarial;  // chosen s~ per column
  std::vector<double> weights;  // w(s)
};

/// Mean w(s) KL(pi(s) || pi(s~)) with s~ held fixed, gradient through both sides.
LossGrad reg_loss(const Mlp& actor, std::span<const double> theta, const RegBatch& batch);

/// Approximate inner maximization: for each state the candidate with the largest
/// KL among `n_adv` uniform draws in the per-slot epsilon-disk and the +-epsilon
/// corners along each error axis of each occupied slot.
Eigen::MatrixXd adversarial_states(const Mlp& actor, std::span<const double> theta,
                                   const std::vector<EncodedState>& states,
                                   const FeatureLayout& layout, double epsilon, int n_adv,
                                   std::mt19937_64& rng);

/// With probability eps_explore uniform over safe_set, otherwise sampled from
/// `dist` restricted to safe_set and renormalized.
int select_action(const Eigen::VectorXd& dist, const std::vector<int>& safe_set,
                  double eps_explore, std::mt19937_64& rng);

/// `dist` restricted to `safe_set` (in safe_set order) and renormalized.
std::vector<double> restricted_distribution(const Eigen::VectorXd& dist,
                                            const std::vector<int>& safe_set);

}  // namespace cavsafe::marl
