#include "cavsafe/marl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cavsafe::marl {

namespace {

Eigen::MatrixXd log_softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

Eigen::MatrixXd to_matrix(const std::vector<Eigen::VectorXd>& cols, Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
  return m;
}

}  // namespace

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  return log_softmax_columns(logits).array().exp().matrix();
}

Eigen::VectorXd policy_forward(const Mlp& actor, std::span<const double> theta,
                               const Eigen::VectorXd& x) {
  Eigen::VectorXd p = softmax_columns(actor.forward(theta, x)).col(0);
  return p / p.sum();
}

ReturnsAdvantages compute_returns_advantages(const std::vector<double>& rewards,
                                             const std::vector<double>& values,
                                             double bootstrap_value, double gamma) {
  if (rewards.size() != values.size()) throw std::invalid_argument("rewards/values length mismatch");
  ReturnsAdvantages out;
  out.returns.assign(rewards.size(), 0.0);
  out.advantages.assign(rewards.size(), 0.0);
  double running = bootstrap_value;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out.returns[t] = running;
    out.advantages[t] = running - values[t];
  }
  return out;
}

double clipped_term(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossGrad rcs_loss(const Mlp& actor, std::span<const double> theta, const PolicyBatch& batch,
                  double clip_eps) {
  const Eigen::Index n = batch.states.cols();
  if (static_cast<std::size_t>(n) != batch.actions.size() ||
      batch.actions.size() != batch.old_probs.size() ||
      batch.actions.size() != batch.advantages.size())
    throw std::invalid_argument("policy batch fields disagree in length");
  for (double p : batch.old_probs)
    if (!(p >= 1e-12)) throw DegenerateBatch("behavior probability below 1e-12");

  LossGrad out;
  out.grad.assign(actor.parameter_count(), 0.0);
  if (n == 0) return out;

  Mlp::Tape tape;
  const Eigen::MatrixXd logits = actor.forward(theta, batch.states, tape);
  const Eigen::MatrixXd probs = softmax_columns(logits);
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(logits.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto i = static_cast<std::size_t>(b);
    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double ratio = probs(a, b) / batch.old_probs[i];
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    out.value += std::min(ratio * adv, clipped * adv) * inv_n;
    // Only the unclipped branch depends on theta.
    if (ratio * adv <= clipped * adv) {
      const double g = adv * ratio * inv_n;
      d_logits.col(b) = -g * probs.col(b);
      d_logits(a, b) += g;
    }
  }
  actor.backward(theta, tape, d_logits, out.grad);
  return out;
}

LossGrad value_loss(const Mlp& critic, std::span<const double> phi, const Eigen::MatrixXd& states,
                    const std::vector<double>& returns) {
  const Eigen::Index n = states.cols();
  if (static_cast<std::size_t>(n) != returns.size()) throw std::invalid_argument("returns length mismatch");
  LossGrad out;
  out.grad.assign(critic.parameter_count(), 0.0);
  if (n == 0) return out;
  Mlp::Tape tape;
  const Eigen::MatrixXd v = critic.forward(phi, states, tape);
  Eigen::MatrixXd d(1, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double r = v(0, b) - returns[static_cast<std::size_t>(b)];
    out.value += r * r * inv_n;
    d(0, b) = 2.0 * r * inv_n;
  }
  critic.backward(phi, tape, d, out.grad);
  return out;
}

std::vector<double> worst_q_targets(const Mlp& q, std::span<const double> omega_target,
                                    const QBatch& batch, double gamma) {
  const auto n = batch.rewards.size();
  std::vector<double> targets(n, 0.0);
  if (n == 0) return targets;
  const Eigen::MatrixXd next = q.forward(omega_target, batch.next_states);
  for (std::size_t b = 0; b < n; ++b) {
    targets[b] = batch.rewards[b];
    if (!batch.terminal[b])
      targets[b] += gamma * next.col(static_cast<Eigen::Index>(b)).minCoeff();
  }
  return targets;
}

LossGrad worst_q_loss(const Mlp& q, std::span<const double> omega, const QBatch& batch,
                      const std::vector<double>& targets) {
  const Eigen::Index n = batch.states.cols();
  if (static_cast<std::size_t>(n) != batch.actions.size() ||
      batch.actions.size() != targets.size())
    throw std::invalid_argument("worst-Q batch fields disagree in length");
  LossGrad out;
  out.grad.assign(q.parameter_count(), 0.0);
  if (n == 0) return out;
  Mlp::Tape tape;
  const Eigen::MatrixXd values = q.forward(omega, batch.states, tape);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(values.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto i = static_cast<std::size_t>(b);
    const double r = values(batch.actions[i], b) - targets[i];
    out.value += r * r * inv_n;
    d(batch.actions[i], b) = 2.0 * r * inv_n;
  }
  q.backward(omega, tape, d, out.grad);
  return out;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  return kl;
}

std::vector<double> importance_weights(const Mlp& critic, std::span<const double> phi,
                                       const Mlp& q, std::span<const double> omega,
                                       const Eigen::MatrixXd& central_states) {
  const Eigen::MatrixXd v = critic.forward(phi, central_states);
  const Eigen::MatrixXd qs = q.forward(omega, central_states);
  std::vector<double> w(static_cast<std::size_t>(central_states.cols()));
  for (Eigen::Index b = 0; b < central_states.cols(); ++b)
    w[static_cast<std::size_t>(b)] = std::max(0.0, v(0, b) - qs.col(b).minCoeff());
  return w;
}

LossGrad reg_loss(const Mlp& actor, std::span<const double> theta, const RegBatch& batch) {
  const Eigen::Index n = batch.states.cols();
  if (batch.adversarial.cols() != n || static_cast<std::size_t>(n) != batch.weights.size())
    throw std::invalid_argument("regularizer batch fields disagree in length");
  LossGrad out;
  out.grad.assign(actor.parameter_count(), 0.0);
  if (n == 0) return out;

  Eigen::MatrixXd stacked(batch.states.rows(), 2 * n);
  stacked << batch.states, batch.adversarial;
  Mlp::Tape tape;
  const Eigen::MatrixXd logits = actor.forward(theta, stacked, tape);
  const Eigen::MatrixXd logp = log_softmax_columns(logits);
  const Eigen::MatrixXd probs = logp.array().exp().matrix();

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(logits.rows(), 2 * n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Eigen::VectorXd p = probs.col(b);
    const Eigen::VectorXd l = logp.col(b) - logp.col(n + b);
    const double kl = p.dot(l);
    const double w = batch.weights[static_cast<std::size_t>(b)] * inv_n;
    out.value += w * kl;
    d.col(b) = w * p.cwiseProduct(l - Eigen::VectorXd::Constant(l.size(), kl));
    d.col(n + b) = w * (probs.col(n + b) - p);
  }
  actor.backward(theta, tape, d, out.grad);
  return out;
}

Eigen::MatrixXd adversarial_states(const Mlp& actor, std::span<const double> theta,
                                   const std::vector<EncodedState>& states,
                                   const FeatureLayout& layout, double epsilon, int n_adv,
                                   std::mt19937_64& rng) {
  const Eigen::Index dim = layout.size();
  Eigen::MatrixXd chosen(dim, static_cast<Eigen::Index>(states.size()));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto slots = static_cast<std::size_t>(layout.slot_count());

  for (std::size_t i = 0; i < states.size(); ++i) {
    const EncodedState& s = states[i];
    std::vector<Eigen::VectorXd> candidates;
    if (epsilon > 0.0) {
      for (int k = 0; k < n_adv; ++k) {
        std::vector<perturb::ErrorPair> errs(slots);
        for (auto& e : errs) {
          const double r = epsilon * std::sqrt(unit(rng));
          const double ang = 2.0 * std::numbers::pi * unit(rng);
          e = {r * std::cos(ang), r * std::sin(ang)};
        }
        candidates.push_back(perturb_features(s, errs, layout));
      }
      for (std::size_t k = 0; k < slots; ++k) {
        if (s.slots[k].offset < 0) continue;
        for (const perturb::ErrorPair corner : {perturb::ErrorPair{epsilon, 0.0}, perturb::ErrorPair{-epsilon, 0.0},
                                                perturb::ErrorPair{0.0, epsilon}, perturb::ErrorPair{0.0, -epsilon}}) {
          std::vector<perturb::ErrorPair> errs(slots);
          errs[k] = corner;
          candidates.push_back(perturb_features(s, errs, layout));
        }
      }
    }
    if (candidates.empty()) {
      chosen.col(static_cast<Eigen::Index>(i)) = s.x;
      continue;
    }
    Eigen::MatrixXd all(dim, static_cast<Eigen::Index>(candidates.size() + 1));
    all.col(0) = s.x;
    all.rightCols(static_cast<Eigen::Index>(candidates.size())) = to_matrix(candidates, dim);
    const Eigen::MatrixXd p = softmax_columns(actor.forward(theta, all));
    Eigen::Index best = 1;
    double best_kl = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 1; c < all.cols(); ++c) {
      const double kl = kl_divergence(p.col(0), p.col(c));
      if (kl > best_kl) {
        best_kl = kl;
        best = c;
      }
    }
    chosen.col(static_cast<Eigen::Index>(i)) = all.col(best);
  }
  return chosen;
}

std::vector<double> restricted_distribution(const Eigen::VectorXd& dist,
                                            const std::vector<int>& safe_set) {
  std::vector<double> out;
  out.reserve(safe_set.size());
  double total = 0.0;
  for (int a : safe_set) {
    const double p = (a >= 0 && a < dist.size()) ? std::max(0.0, dist[a]) : 0.0;
    out.push_back(p);
    total += p;
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (double& p : out) p /= total;
  return out;
}

int select_action(const Eigen::VectorXd& dist, const std::vector<int>& safe_set,
                  double eps_explore, std::mt19937_64& rng) {
  if (safe_set.empty()) throw EmptySafeSet("safe set is empty");
  if (safe_set.size() == 1) return safe_set.front();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < eps_explore) {
    std::uniform_int_distribution<std::size_t> pick(0, safe_set.size() - 1);
    return safe_set[pick(rng)];
  }
  const std::vector<double> p = restricted_distribution(dist, safe_set);
  double u = unit(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    u -= p[i];
    if (u < 0.0) return safe_set[i];
  }
  return safe_set.back();
}

}  // namespace cavsafe::marl
