#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cavsafe/marl/agent.hpp"
#include "cavsafe/marl/losses.hpp"

namespace gradcheck {

using namespace cavsafe;
using Loss = std::function<marl::LossGrad(const std::vector<double>&)>;

// Worst relative error between the analytic gradient and central differences,
// over `coords` sampled coordinates (as a vector) and one random full direction.
inline double relative_error(const Loss& f, std::vector<double> p, std::mt19937_64& rng, int coords = 150,
                             double h = 1e-5) {
  const marl::LossGrad at = f(p);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  double diff2 = 0.0, ref2 = 0.0;
  for (int k = 0; k < coords; ++k) {
    const std::size_t i = pick(rng);
    const double keep = p[i];
    p[i] = keep + h;
    const double up = f(p).value;
    p[i] = keep - h;
    const double down = f(p).value;
    p[i] = keep;
    const double fd = (up - down) / (2 * h);
    diff2 += (fd - at.grad[i]) * (fd - at.grad[i]);
    ref2 += fd * fd;
  }
  const double coord_err = std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-12);

  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> d(p.size()), up = p, down = p;
  double norm = 0.0;
  for (double& x : d) norm += (x = n(rng)) * x;
  norm = std::sqrt(norm);
  double analytic = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d[i] /= norm;
    up[i] += h * d[i];
    down[i] -= h * d[i];
    analytic += at.grad[i] * d[i];
  }
  const double fd = (f(up).value - f(down).value) / (2 * h);
  const double dir_err = std::abs(fd - analytic) / std::max(std::abs(fd), 1e-12);
  return std::max(coord_err, dir_err);
}

inline marl::Architecture arch() {
  return marl::Architecture::make(marl::FeatureLayout{}, 3, dyn::ActionSpace{}, 64, 2);
}

inline Eigen::MatrixXd random_states(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = n(rng);
  return m;
}

struct Errors {
  double actor = 0, value = 0, worst_q = 0, reg = 0;
};

// One random parameter point per call for each of the four losses.
inline Errors check_point(const marl::Architecture& a, std::mt19937_64& rng, int batch = 8) {
  Errors e;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> act(0, a.action_count - 1);
  const int local = a.layout.size(), central = a.central_size();

  const std::vector<double> theta = a.actor.initial_parameters(rng, false);
  marl::PolicyBatch pb;
  pb.states = random_states(local, batch, rng);
  const Eigen::MatrixXd probs = marl::softmax_columns(a.actor.forward(theta, pb.states));
  for (int b = 0; b < batch; ++b) {
    const int action = act(rng);
    pb.actions.push_back(action);
    // ratios well away from the clip corners at 1 +- 0.2
    const double bands[3][2] = {{0.5, 0.7}, {0.9, 1.1}, {1.35, 1.6}};
    const auto& band = bands[b % 3];
    const double ratio = band[0] + (band[1] - band[0]) * u(rng);
    pb.old_probs.push_back(probs(action, b) / ratio);
    pb.advantages.push_back(4.0 * u(rng) - 2.0);
  }
  e.actor = relative_error([&](const std::vector<double>& t) { return marl::rcs_loss(a.actor, t, pb, 0.2); },
                           theta, rng);

  const Eigen::MatrixXd cs = random_states(central, batch, rng);
  std::vector<double> returns;
  for (int b = 0; b < batch; ++b) returns.push_back(6.0 * u(rng) - 3.0);
  e.value = relative_error([&](const std::vector<double>& p) { return marl::value_loss(a.critic, p, cs, returns); },
                           a.critic.initial_parameters(rng), rng);

  marl::QBatch qb;
  qb.states = cs;
  std::vector<double> targets;
  for (int b = 0; b < batch; ++b) {
    qb.actions.push_back(act(rng));
    targets.push_back(6.0 * u(rng) - 3.0);
  }
  e.worst_q = relative_error(
      [&](const std::vector<double>& p) { return marl::worst_q_loss(a.worst_q, p, qb, targets); },
      a.worst_q.initial_parameters(rng), rng);

  marl::RegBatch rb;
  rb.states = pb.states;
  rb.adversarial = pb.states + 0.3 * random_states(local, batch, rng);
  for (int b = 0; b < batch; ++b) rb.weights.push_back(2.0 * u(rng));
  e.reg = relative_error([&](const std::vector<double>& t) { return marl::reg_loss(a.actor, t, rb); }, theta, rng);
  return e;
}

}  // namespace gradcheck
