#include "cavsafe/harness/reward.hpp"

#include <stdexcept>

namespace cavsafe::harness {

RewardWeights RewardWeights::uniform(int agent_count) {
  if (agent_count <= 0) throw std::invalid_argument("reward needs at least one agent");
  const double mu = 1.0 / agent_count;
  return {mu, mu, mu};
}

std::vector<double> reward(const world::World& world, const std::vector<world::Vec2>& destinations,
                           const std::vector<double>& safety_terms, const RewardWeights& weights) {
  const std::vector<int> agents = world.agent_indices();
  if (safety_terms.size() != agents.size()) throw std::invalid_argument("one safety term per agent");
  double total = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto j = static_cast<std::size_t>(agents[k]);
    const world::VehicleState& s = world.vehicles[j];
    total += weights.speed * s.v;
    total -= weights.distance * (s.position() - destinations.at(j)).norm();
    total += weights.safety * safety_terms[k];
  }
  return std::vector<double>(agents.size(), total);
}

}  // namespace cavsafe::harness
