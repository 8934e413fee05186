#include "cavsafe/marl/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace cavsafe::marl {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::vector<int> shape(int in, int hidden, int layers, int out) {
  std::vector<int> s{in};
  for (int l = 0; l < layers; ++l) s.push_back(hidden);
  s.push_back(out);
  return s;
}

}  // namespace

std::string to_string(Algorithm algo) { return algo == Algorithm::SrMappo ? "srmappo" : "mappo"; }

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "srmappo") return Algorithm::SrMappo;
  if (name == "mappo") return Algorithm::Mappo;
  throw std::invalid_argument("unknown algorithm: " + name);
}

bool ParameterSet::finite() const {
  return all_finite(theta) && all_finite(phi) && all_finite(omega) && std::isfinite(lambda_w) &&
         std::isfinite(kappa_wst) && std::isfinite(kappa_reg);
}

Architecture Architecture::make(const FeatureLayout& layout, int agent_count,
                                const dyn::ActionSpace& space, int hidden, int hidden_layers) {
  if (agent_count <= 0) throw std::invalid_argument("need at least one agent");
  Architecture a;
  a.layout = layout;
  a.agent_count = agent_count;
  a.action_count = space.size();
  const int central = layout.size() * agent_count;
  a.actor = Mlp(shape(layout.size(), hidden, hidden_layers, space.size()));
  a.critic = Mlp(shape(central, hidden, hidden_layers, 1));
  a.worst_q = Mlp(shape(central, hidden, hidden_layers, space.size()));
  return a;
}

ParameterSet initial_parameters(const Architecture& arch, std::mt19937_64& rng, double kappa_wst,
                                double kappa_reg) {
  ParameterSet p;
  p.theta = arch.actor.initial_parameters(rng, true);
  p.phi = arch.critic.initial_parameters(rng);
  p.omega = arch.worst_q.initial_parameters(rng);
  p.kappa_wst = kappa_wst;
  p.kappa_reg = kappa_reg;
  return p;
}

}  // namespace cavsafe::marl
