#include "cavsafe/marl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cavsafe::marl {

namespace {

Eigen::MatrixXd gather(const std::vector<Eigen::VectorXd>& cols, const std::vector<std::size_t>& idx,
                       Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = cols[idx[k]];
  return m;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

std::vector<std::vector<std::size_t>> minibatches(std::vector<std::size_t> idx, int size,
                                                  std::mt19937_64& rng) {
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  const auto step = static_cast<std::size_t>(std::max(1, size));
  for (std::size_t b = 0; b < idx.size(); b += step)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + step)));
  return out;
}

void negate(std::vector<double>& g) {
  for (double& x : g) x = -x;
}

struct Optimizers {
  Adam actor, critic, worst_q;
};

struct UpdateStats {
  double value_loss = 0.0, worst_q_loss = 0.0, rcs = 0.0, reg = 0.0;
};

UpdateStats update_agent(const Architecture& arch, ParameterSet& p, Optimizers& opt,
                         const std::vector<double>& omega_target, const AgentMemory& mem,
                         const Hyperparameters& hp, std::mt19937_64& rng) {
  UpdateStats stats;
  const std::size_t n = mem.rewards.size();
  if (n == 0) return stats;
  const Eigen::Index dc = arch.central_size();
  const Eigen::Index dl = arch.layout.size();

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Eigen::MatrixXd x = gather(mem.central, all, dc);
  std::vector<Eigen::VectorXd> next(n);
  for (std::size_t t = 0; t < n; ++t) next[t] = t + 1 < n ? mem.central[t + 1] : mem.final_central;

  // Advantages from the rollout-time critics.
  const Eigen::MatrixXd v = arch.critic.forward(p.phi, x);
  std::vector<double> values(n);
  for (std::size_t t = 0; t < n; ++t) values[t] = v(0, static_cast<Eigen::Index>(t));
  const double bootstrap =
      mem.terminal ? 0.0 : arch.critic.forward(p.phi, mem.final_central)(0, 0);
  const ReturnsAdvantages ra = compute_returns_advantages(mem.rewards, values, bootstrap, hp.gamma);

  std::vector<std::size_t> valid;
  for (std::size_t t = 0; t < n; ++t)
    if (mem.actions[t] >= 0 && mem.old_probs[t] >= 1e-12) valid.push_back(t);

  const Eigen::MatrixXd q = arch.worst_q.forward(p.omega, x);
  std::vector<double> robust(n, 0.0);
  for (std::size_t t : valid)
    robust[t] = robust_advantage(ra.advantages[t], q(mem.actions[t], static_cast<Eigen::Index>(t)), p.kappa_wst);
  if (hp.normalize_advantages && valid.size() > 1) {
    double mean = 0.0, var = 0.0;
    for (std::size_t t : valid) mean += robust[t];
    mean /= static_cast<double>(valid.size());
    for (std::size_t t : valid) var += (robust[t] - mean) * (robust[t] - mean);
    const double sd = std::sqrt(var / static_cast<double>(valid.size()));
    for (std::size_t t : valid) robust[t] = (robust[t] - mean) / (sd + 1e-8);
  }
  std::vector<double> weights(n, 0.0);
  if (p.kappa_reg > 0.0) weights = importance_weights(arch.critic, p.phi, arch.worst_q, p.omega, x);

  QBatch qall;
  qall.rewards = mem.rewards;
  qall.terminal.assign(n, 0);
  if (mem.terminal) qall.terminal[n - 1] = 1;
  qall.actions = mem.actions;
  qall.next_states = gather(next, all, dc);
  const std::vector<double> q_targets = worst_q_targets(arch.worst_q, omega_target, qall, hp.gamma);

  int value_steps = 0, q_steps = 0, actor_steps = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (const auto& mb : minibatches(all, hp.minibatch, rng)) {
      LossGrad lg = value_loss(arch.critic, p.phi, gather(mem.central, mb, dc), pick(ra.returns, mb));
      opt.critic.step(p.phi, lg.grad);
      stats.value_loss += lg.value;
      ++value_steps;
    }
  }
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (const auto& mb : minibatches(valid, hp.minibatch, rng)) {
      QBatch b;
      b.states = gather(mem.central, mb, dc);
      b.actions = pick(mem.actions, mb);
      LossGrad lg = worst_q_loss(arch.worst_q, p.omega, b, pick(q_targets, mb));
      opt.worst_q.step(p.omega, lg.grad);
      stats.worst_q_loss += lg.value;
      ++q_steps;
    }
  }
  std::vector<Eigen::VectorXd> local_x(n);
  for (std::size_t t = 0; t < n; ++t) local_x[t] = mem.local[t].x;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (const auto& mb : minibatches(valid, hp.minibatch, rng)) {
      PolicyBatch b;
      b.states = gather(local_x, mb, dl);
      b.actions = pick(mem.actions, mb);
      b.old_probs = pick(mem.old_probs, mb);
      b.advantages = pick(robust, mb);
      const ActorStepStats s =
          actor_step(arch, p, opt.actor, b, pick(mem.local, mb), pick(weights, mb), hp, rng);
      stats.rcs += s.rcs;
      stats.reg += s.reg;
      ++actor_steps;
    }
  }
  if (value_steps) stats.value_loss /= value_steps;
  if (q_steps) stats.worst_q_loss /= q_steps;
  if (actor_steps) {
    stats.rcs /= actor_steps;
    stats.reg /= actor_steps;
  }
  return stats;
}

}  // namespace

MarlPolicy::MarlPolicy(const Architecture& arch, const std::vector<ParameterSet>& params, Mode mode,
                       double eps_explore, double reward_scale, double comm_range, std::uint64_t seed)
    : arch_(arch),
      params_(params),
      mode_(mode),
      eps_explore_(eps_explore),
      reward_scale_(reward_scale),
      comm_range_(comm_range),
      rng_(seed),
      memories_(params.size()) {}

std::vector<EncodedState> MarlPolicy::encode_all(const world::JointState& joint,
                                                 const harness::ScenarioInstance& scenario,
                                                 const world::World& w) const {
  const std::vector<int> idx = w.agent_indices();
  std::vector<EncodedState> enc;
  enc.reserve(joint.agents.size());
  for (std::size_t k = 0; k < joint.agents.size(); ++k)
    enc.push_back(encode_local(joint.agents[k], scenario.destinations[static_cast<std::size_t>(idx[k])],
                               arch_.layout));
  return enc;
}

Eigen::VectorXd MarlPolicy::central_of(const std::vector<EncodedState>& enc) const {
  const Eigen::Index d = arch_.layout.size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(arch_.central_size());
  for (std::size_t k = 0; k < enc.size() && static_cast<int>(k) < arch_.agent_count; ++k)
    c.segment(static_cast<Eigen::Index>(k) * d, d) = enc[k].x;
  return c;
}

std::vector<int> MarlPolicy::act(const harness::StepView& view) {
  if (view.joint.agents.size() != params_.size())
    throw std::invalid_argument("policy has parameters for a different number of agents");
  const std::vector<EncodedState> enc = encode_all(view.joint, view.scenario, view.world);
  const Eigen::VectorXd central = central_of(enc);
  std::vector<int> actions(enc.size(), dyn::kEmergencyStop);
  for (std::size_t k = 0; k < enc.size(); ++k) {
    if (view.wrecked[k]) continue;
    const std::vector<int>& safe = view.shield.agents[k].safe_set;
    const Eigen::VectorXd dist = policy_forward(arch_.actor, params_[k].theta, enc[k].x);
    int a = safe.front();
    if (a != dyn::kEmergencyStop) {
      if (mode_ == Mode::Sample) {
        a = select_action(dist, safe, eps_explore_, rng_);
      } else {
        for (int c : safe)
          if (dist[c] > dist[a]) a = c;
      }
    }
    actions[k] = a;
    AgentMemory& m = memories_[k];
    if (mode_ == Mode::Sample && !m.done) {
      m.local.push_back(enc[k]);
      m.central.push_back(central);
      m.actions.push_back(a);
      m.old_probs.push_back(a >= 0 ? dist[a] : 1.0);
    }
  }
  return actions;
}

void MarlPolicy::after_step(const harness::StepView& view, const std::vector<double>& rewards,
                            const std::vector<char>& wrecked_after) {
  if (mode_ != Mode::Sample) return;
  const world::JointState next =
      world::build_joint_state(view.world, comm_range_, perturb::PerturbationSchedule::none());
  const Eigen::VectorXd central = central_of(encode_all(next, view.scenario, view.world));
  for (std::size_t k = 0; k < memories_.size(); ++k) {
    AgentMemory& m = memories_[k];
    if (m.done || view.wrecked[k]) continue;
    m.rewards.push_back(rewards[k] * reward_scale_);
    m.final_central = central;
    if (wrecked_after[k]) {
      m.terminal = true;
      m.done = true;
    }
  }
}

nlohmann::json EpisodeMetrics::to_json() const {
  return {{"episode", episode},
          {"returns", returns},
          {"mean_return", mean_return},
          {"collisions", collisions},
          {"emergency_stops", emergency_stops},
          {"eps_explore", eps_explore},
          {"value_loss", value_loss},
          {"worst_q_loss", worst_q_loss},
          {"rcs", rcs},
          {"reg", reg},
          {"lambda", lambda}};
}

Architecture architecture_for(const harness::ScenarioSpec& spec, const harness::HarnessConfig& cfg) {
  int agents = 0;
  for (const auto& s : spec.spawns) agents += s.connected ? 1 : 0;
  return Architecture::make(cfg.features, agents, cfg.actions, cfg.train.hidden, cfg.train.hidden_layers);
}

std::vector<ParameterSet> initial_agent_parameters(const Architecture& arch, Algorithm algo,
                                                   const Hyperparameters& hp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool robust = algo == Algorithm::SrMappo;
  std::vector<ParameterSet> out;
  for (int i = 0; i < arch.agent_count; ++i)
    out.push_back(initial_parameters(arch, rng, robust ? hp.kappa_wst : 0.0, robust ? hp.kappa_reg : 0.0));
  return out;
}

harness::EpisodeSettings episode_settings(const harness::HarnessConfig& cfg, shield::ShieldMode mode) {
  harness::EpisodeSettings s;
  s.dynamics = cfg.dynamics;
  s.actions = cfg.actions;
  s.shield = cfg.shield;
  s.mode = mode;
  s.comm_range = cfg.comm_range;
  s.episode_len = cfg.episode_len;
  return s;
}

ActorStepStats actor_step(const Architecture& arch, ParameterSet& p, Adam& opt,
                          const PolicyBatch& batch, const std::vector<EncodedState>& encoded,
                          const std::vector<double>& weights, const Hyperparameters& hp,
                          std::mt19937_64& rng) {
  ActorStepStats stats;
  LossGrad rcs = rcs_loss(arch.actor, p.theta, batch, hp.clip_eps);
  stats.rcs = rcs.value;
  std::vector<double> grad = std::move(rcs.grad);
  negate(grad);
  if (p.kappa_reg > 0.0) {
    RegBatch rb;
    rb.states = batch.states;
    rb.adversarial = adversarial_states(arch.actor, p.theta, encoded, arch.layout, hp.reg_epsilon, hp.n_adv, rng);
    rb.weights = weights;
    const LossGrad reg = reg_loss(arch.actor, p.theta, rb);
    stats.reg = reg.value;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += p.kappa_reg * reg.grad[i];
  }
  opt.step(p.theta, grad);
  return stats;
}

TrainResult train(const TrainSetup& setup, const std::function<void(const EpisodeMetrics&)>& on_episode) {
  const harness::HarnessConfig& cfg = setup.config;
  const Hyperparameters& hp = cfg.train;
  TrainResult result;
  result.arch = architecture_for(setup.scenario, cfg);
  result.params = initial_agent_parameters(result.arch, setup.algo, hp, setup.seed);
  const Architecture& arch = result.arch;
  std::vector<ParameterSet>& params = result.params;

  std::vector<Optimizers> opts;
  std::vector<std::vector<double>> targets;
  for (const auto& p : params) {
    opts.push_back({Adam(p.theta.size(), hp.actor_lr), Adam(p.phi.size(), hp.critic_lr),
                    Adam(p.omega.size(), hp.critic_lr)});
    targets.push_back(p.omega);
  }

  const harness::EpisodeSettings settings = [&] {
    harness::EpisodeSettings s = episode_settings(cfg, setup.shield);
    s.record_observations = false;
    return s;
  }();
  std::mt19937_64 master(setup.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 update_rng(master());

  for (int e = 0; e < setup.episodes; ++e) {
    const double frac = setup.episodes > 1 ? static_cast<double>(e) / (setup.episodes - 1) : 0.0;
    const double eps = hp.eps_explore_start + (hp.eps_explore_end - hp.eps_explore_start) * frac;
    const std::uint64_t policy_seed = master();
    const std::uint64_t episode_seed = master();
    MarlPolicy policy(arch, params, MarlPolicy::Mode::Sample, eps, hp.reward_scale, cfg.comm_range, policy_seed);
    const harness::EpisodeLog log =
        harness::run_episode(setup.scenario, harness::ScenarioMode::Train, policy, settings, episode_seed);

    EpisodeMetrics m;
    m.episode = e;
    m.returns = log.summary.agent_returns;
    m.mean_return = log.summary.mean_return;
    m.collisions = log.summary.collisions;
    m.emergency_stops = log.summary.emergency_stops;
    m.eps_explore = eps;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const UpdateStats s = update_agent(arch, params[i], opts[i], targets[i], policy.memories()[i], hp, update_rng);
      if (!params[i].finite()) throw TrainingDiverged(e, "agent " + std::to_string(i));
      m.value_loss.push_back(s.value_loss);
      m.worst_q_loss.push_back(s.worst_q_loss);
      m.rcs.push_back(s.rcs);
      m.reg.push_back(s.reg);
      m.lambda.push_back(params[i].lambda_w);
    }
    if (hp.target_sync > 0 && (e + 1) % hp.target_sync == 0)
      for (std::size_t i = 0; i < params.size(); ++i) targets[i] = params[i].omega;
    if (on_episode) on_episode(m);
    result.metrics.push_back(std::move(m));
  }
  return result;
}

}  // namespace cavsafe::marl
