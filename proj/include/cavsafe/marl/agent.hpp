#pragma once

#include <random>
#include <string>
#include <vector>

#include "cavsafe/dynamics.hpp"
#include "cavsafe/marl/features.hpp"
#include "cavsafe/marl/mlp.hpp"

namespace cavsafe::marl {

enum class Algorithm { SrMappo, Mappo };

std::string to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& name);  // srmappo|mappo

struct Hyperparameters {
  double gamma = 0.99;
  double clip_eps = 0.2;
  double actor_lr = 3e-4;
  double critic_lr = 3e-3;
  double eps_explore_start = 0.3;
  double eps_explore_end = 0.05;
  int epochs = 10;
  int minibatch = 32;
  double kappa_wst = 0.1;
  double kappa_reg = 0.05;
  int n_adv = 8;
  double reg_epsilon = 2.0;   // radius of the perturbation ball in L^reg
  int target_sync = 5;        // episodes between worst-Q target copies
  double reward_scale = 0.001;  // rewards are multiplied by this before learning
  bool normalize_advantages = true;
  int hidden = 64;
  int hidden_layers = 2;
};

/// Networks of one agent. lambda_w is carried and logged only.
struct ParameterSet {
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> omega;
  double lambda_w = 0.0;
  double kappa_wst = 0.0;
  double kappa_reg = 0.0;

  bool finite() const;
};

/// Network shapes shared by all agents: the actor reads local features, both
/// critics read the concatenation of every agent's local features.
struct Architecture {
  FeatureLayout layout;
  int agent_count = 0;
  int action_count = 0;
  Mlp actor;
  Mlp critic;
  Mlp worst_q;

  static Architecture make(const FeatureLayout& layout, int agent_count,
                           const dyn::ActionSpace& space, int hidden, int hidden_layers);
  int central_size() const { return layout.size() * agent_count; }
};

ParameterSet initial_parameters(const Architecture& arch, std::mt19937_64& rng, double kappa_wst,
                                double kappa_reg);

}  // namespace cavsafe::marl
