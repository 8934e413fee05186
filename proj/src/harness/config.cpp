#include "cavsafe/harness/config.hpp"

#include <fstream>
#include <stdexcept>

namespace cavsafe::harness {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

}  // namespace

HarnessConfig default_config() {
  HarnessConfig cfg;
  resolve_derived(cfg);
  return cfg;
}

void resolve_derived(HarnessConfig& cfg) {
  cfg.shield.epsilon = cfg.perturbation.epsilon_bound;
  cfg.shield.ego_max_braking = cfg.dynamics.max_braking();
  cfg.shield.lane_width = 3.5;
  if (cfg.auto_euler_margin) cfg.shield.discretization_margin = shield::euler_margin(cfg.shield, cfg.dynamics);
  if (cfg.auto_lipschitz) cfg.shield.lipschitz_sum = shield::estimate_lipschitz_sum(cfg.shield, cfg.dynamics);
}

json to_json(const HarnessConfig& c) {
  const auto& d = c.dynamics;
  const auto& s = c.shield;
  const auto& t = c.train;
  const auto& f = c.features;
  return {
      {"dynamics",
       {{"dt", d.dt}, {"accel_min", d.accel_min}, {"accel_max", d.accel_max},
        {"steer_min", d.steer_min}, {"steer_max", d.steer_max}, {"speed_max", d.speed_max},
        {"lf", d.lf}, {"lr", d.lr}, {"lateral_kp", d.lateral_kp}, {"lateral_kd", d.lateral_kd},
        {"speed_kp", d.speed_kp}, {"keep_authority", d.keep_authority},
        {"brake_value", d.brake_value}, {"lane_change_lookahead", d.lane_change_lookahead}}},
      {"actions", {{"k", c.actions.k}}},
      {"shield",
       {{"c1", s.c1}, {"c2", s.c2}, {"c3", s.c3}, {"gamma_cbf", s.gamma_cbf},
        {"lipschitz_sum", s.lipschitz_sum}, {"horizon", s.horizon},
        {"target_max_braking", s.target_max_braking},
        {"discretization_margin", s.discretization_margin},
        {"collision_penalty", s.collision_penalty}, {"emergency_penalty", s.emergency_penalty},
        {"auto_lipschitz", c.auto_lipschitz}, {"auto_euler_margin", c.auto_euler_margin}}},
      {"perturbation",
       {{"epsilon_bound", c.perturbation.epsilon_bound},
        {"window", {c.perturbation.window.begin, c.perturbation.window.end}},
        {"targets", c.perturbation.targets}}},
      {"train",
       {{"gamma", t.gamma}, {"clip_eps", t.clip_eps}, {"actor_lr", t.actor_lr},
        {"critic_lr", t.critic_lr}, {"eps_explore_start", t.eps_explore_start},
        {"eps_explore_end", t.eps_explore_end}, {"epochs", t.epochs}, {"minibatch", t.minibatch},
        {"kappa_wst", t.kappa_wst}, {"kappa_reg", t.kappa_reg}, {"n_adv", t.n_adv},
        {"reg_epsilon", t.reg_epsilon}, {"target_sync", t.target_sync},
        {"reward_scale", t.reward_scale}, {"normalize_advantages", t.normalize_advantages},
        {"hidden", t.hidden}, {"hidden_layers", t.hidden_layers}}},
      {"features",
       {{"max_lanes", f.max_lanes}, {"cav_slots", f.cav_slots}, {"ucv_slots", f.ucv_slots},
        {"position_scale", f.position_scale}, {"speed_scale", f.speed_scale},
        {"accel_scale", f.accel_scale}, {"destination_scale", f.destination_scale}}},
      {"comm_range", c.comm_range},
      {"episode_len", c.episode_len},
      {"train_episodes", c.train_episodes},
      {"test_episodes", c.test_episodes},
      {"quick_train_episodes", c.quick_train_episodes},
      {"quick_test_episodes", c.quick_test_episodes},
  };
}

HarnessConfig config_from_json(const json& j) {
  HarnessConfig c;
  {
    const json& d = section(j, "dynamics");
    auto& o = c.dynamics;
    read(d, "dt", o.dt);
    read(d, "accel_min", o.accel_min);
    read(d, "accel_max", o.accel_max);
    read(d, "steer_min", o.steer_min);
    read(d, "steer_max", o.steer_max);
    read(d, "speed_max", o.speed_max);
    read(d, "lf", o.lf);
    read(d, "lr", o.lr);
    read(d, "lateral_kp", o.lateral_kp);
    read(d, "lateral_kd", o.lateral_kd);
    read(d, "speed_kp", o.speed_kp);
    read(d, "keep_authority", o.keep_authority);
    read(d, "brake_value", o.brake_value);
    read(d, "lane_change_lookahead", o.lane_change_lookahead);
  }
  read(section(j, "actions"), "k", c.actions.k);
  {
    const json& s = section(j, "shield");
    auto& o = c.shield;
    read(s, "c1", o.c1);
    read(s, "c2", o.c2);
    read(s, "c3", o.c3);
    read(s, "gamma_cbf", o.gamma_cbf);
    read(s, "lipschitz_sum", o.lipschitz_sum);
    read(s, "horizon", o.horizon);
    read(s, "target_max_braking", o.target_max_braking);
    read(s, "discretization_margin", o.discretization_margin);
    read(s, "collision_penalty", o.collision_penalty);
    read(s, "emergency_penalty", o.emergency_penalty);
    read(s, "auto_lipschitz", c.auto_lipschitz);
    read(s, "auto_euler_margin", c.auto_euler_margin);
  }
  {
    const json& p = section(j, "perturbation");
    read(p, "epsilon_bound", c.perturbation.epsilon_bound);
    if (p.contains("window")) {
      c.perturbation.window.begin = p.at("window").at(0).get<int>();
      c.perturbation.window.end = p.at("window").at(1).get<int>();
    }
    read(p, "targets", c.perturbation.targets);
  }
  {
    const json& t = section(j, "train");
    auto& o = c.train;
    read(t, "gamma", o.gamma);
    read(t, "clip_eps", o.clip_eps);
    read(t, "actor_lr", o.actor_lr);
    read(t, "critic_lr", o.critic_lr);
    read(t, "eps_explore_start", o.eps_explore_start);
    read(t, "eps_explore_end", o.eps_explore_end);
    read(t, "epochs", o.epochs);
    read(t, "minibatch", o.minibatch);
    read(t, "kappa_wst", o.kappa_wst);
    read(t, "kappa_reg", o.kappa_reg);
    read(t, "n_adv", o.n_adv);
    read(t, "reg_epsilon", o.reg_epsilon);
    read(t, "target_sync", o.target_sync);
    read(t, "reward_scale", o.reward_scale);
    read(t, "normalize_advantages", o.normalize_advantages);
    read(t, "hidden", o.hidden);
    read(t, "hidden_layers", o.hidden_layers);
  }
  {
    const json& f = section(j, "features");
    auto& o = c.features;
    read(f, "max_lanes", o.max_lanes);
    read(f, "cav_slots", o.cav_slots);
    read(f, "ucv_slots", o.ucv_slots);
    read(f, "position_scale", o.position_scale);
    read(f, "speed_scale", o.speed_scale);
    read(f, "accel_scale", o.accel_scale);
    read(f, "destination_scale", o.destination_scale);
  }
  read(j, "comm_range", c.comm_range);
  read(j, "episode_len", c.episode_len);
  read(j, "train_episodes", c.train_episodes);
  read(j, "test_episodes", c.test_episodes);
  read(j, "quick_train_episodes", c.quick_train_episodes);
  read(j, "quick_test_episodes", c.quick_test_episodes);

  if (c.actions.k < 1) throw std::invalid_argument("actions.k must be positive");
  if (c.dynamics.dt <= 0.0) throw std::invalid_argument("dynamics.dt must be positive");
  if (c.episode_len < 0) throw std::invalid_argument("episode_len must be non-negative");
  resolve_derived(c);
  return c;
}

HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return config_from_json(json::parse(in, nullptr, true, true));
}

}  // namespace cavsafe::harness
