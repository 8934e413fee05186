#pragma once

#include <string>

#include <json.hpp>

#include "cavsafe/dynamics.hpp"
#include "cavsafe/marl/agent.hpp"
#include "cavsafe/marl/features.hpp"
#include "cavsafe/perturb.hpp"
#include "cavsafe/shield.hpp"

namespace cavsafe::harness {

struct PerturbationConfig {
  double epsilon_bound = 2.0;     // declared bound ||e|| <= epsilon
  perturb::StepWindow window{50, 150};  // PTB^T active steps
  std::string targets = "ucv";    // PTB^V target set: ucv|cav|all
};

/// Every tunable constant, loadable from a JSON file. Keys missing from the file
/// keep their defaults.
struct HarnessConfig {
  dyn::DynamicsConfig dynamics;
  dyn::ActionSpace actions;
  shield::ShieldConfig shield;
  bool auto_lipschitz = true;       // estimate shield.lipschitz_sum at load
  bool auto_euler_margin = true;    // set shield.discretization_margin from dynamics
  double comm_range = world::kDefaultCommRange;
  int episode_len = 200;
  int train_episodes = 200;
  int test_episodes = 50;
  int quick_train_episodes = 20;
  int quick_test_episodes = 10;
  PerturbationConfig perturbation;
  marl::Hyperparameters train;
  marl::FeatureLayout features;
};

HarnessConfig default_config();
nlohmann::json to_json(const HarnessConfig& cfg);
/// Overlays `j` onto the defaults, then resolves the derived shield constants.
HarnessConfig config_from_json(const nlohmann::json& j);
HarnessConfig load_config(const std::string& path);

/// Fills lipschitz_sum and discretization_margin when they are automatic, and
/// sets the shield's epsilon to the declared perturbation bound.
void resolve_derived(HarnessConfig& cfg);

}  // namespace cavsafe::harness
